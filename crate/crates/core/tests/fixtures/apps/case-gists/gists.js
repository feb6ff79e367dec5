function Gist(raw) {
  this.raw = raw;
}
Gist.prototype.title = function() {
  return this.raw.description;
};

function escapeHtml(s) {
  return s.replace(/&/g, '&amp;').replace(/</g, '&lt;');
}

function showList(gist) {
  var list = document.getElementById('list');
  list.innerHTML = '<li>' + gist.title() + '</li>';
}

function showDetail(gist) {
  var header = document.getElementById('header');
  header.innerHTML = '<h1>' + escapeHtml(gist.title()) + '</h1>';
}

var xhr = new XMLHttpRequest();
xhr.onload = function() {
  var items = JSON.parse(xhr.responseText);
  var gist = new Gist(items[0]);
  showList(gist);
  showDetail(gist);
};
xhr.open('GET', 'https://api.github.com/gists');
xhr.send();
