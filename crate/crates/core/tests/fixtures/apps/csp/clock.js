function startClock() {
  setInterval('tick()', 1000);
  setTimeout(function() { tick(); }, 10);
  var f = eval('(' + settings + ')');
}
