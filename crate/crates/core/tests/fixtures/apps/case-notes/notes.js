function Note(record) {
  this.record = record;
}
Note.prototype.getName = function() {
  return this.record.title;
};

function filter(s) {
  return (s || "").replace(/</g, '&lt;');
}

function listEntry(note) {
  var html = '<div class="note">' + note.getName() + '</div>';
  notebook.innerHTML = html;
}

function editorTitle(note) {
  var safe = filter(note.getName());
  heading.innerHTML = '<h2>' + safe + '</h2>';
}

var xhr = new XMLHttpRequest({ mozSystem: true });
xhr.onload = function() {
  var records = JSON.parse(xhr.responseText);
  var first = new Note(records[0]);
  var current = new Note(records[1]);
  listEntry(first);
  editorTitle(current);
};
xhr.open('GET', 'https://notes.example.com/notes');
xhr.send();

window.addEventListener('message', function(evt) {
  authWindow.close();
  token = evt.data.token;
  self.exchangeToken();
});

function sync(token) {
  var xhr = new XMLHttpRequest({ mozSystem: true });
  xhr.open('POST', 'https://notes.example.com/sync');
  xhr.send(token);
}
