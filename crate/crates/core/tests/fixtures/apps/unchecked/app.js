window.addEventListener('message', function(evt) {
  authWindow.close();
  token = evt.data.token;
  self.exchangeToken();
});
