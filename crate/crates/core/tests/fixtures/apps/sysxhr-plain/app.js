var xhr = new XMLHttpRequest();
xhr.open('GET', 'https://feeds.example.org/rss');
xhr.send();
