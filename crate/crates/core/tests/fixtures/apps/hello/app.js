document.addEventListener('DOMContentLoaded', function() {
  document.getElementById('greeting').textContent = 'Hello, world';
});
