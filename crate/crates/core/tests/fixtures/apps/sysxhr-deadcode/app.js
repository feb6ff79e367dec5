function neverCalled() {
  var xhr = new XMLHttpRequest({ mozSystem: true });
  xhr.open('GET', 'https://feeds.example.org/rss');
  return xhr;
}
if (false) {
  neverCalled();
}
