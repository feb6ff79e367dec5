function unfiltered(v) {
  var html = '<div>' + v.getName() + '</div>';
  element.innerHTML = html;
}

function filtered(v) {
  var filtered = filter(v.getName());
  var html = '<div>' + filtered + '</div>';
  element.innerHTML = html;
}

function filter(s) {
  return (s || "").replace(/</g, '&lt;');
}

var data1 = new Something();
var data2 = new Something();
unfiltered(data1);
filtered(data2);
