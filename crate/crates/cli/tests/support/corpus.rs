//! Generated corpora: app code, a bundled library, the permission-request market and the message-handler population.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORDS: &[&str] = &[
    "item", "list", "note", "user", "feed", "photo", "track", "event", "card", "panel", "entry", "story",
    "order", "place", "city", "song", "album", "score", "level", "topic", "post", "reply", "draft", "file",
];

fn word(rng: &mut ChaCha8Rng) -> &'static str {
    WORDS[rng.gen_range(0..WORDS.len())]
}

fn cap(s: &str) -> String {
    let mut c = s.chars();
    c.next().map(|f| f.to_ascii_uppercase().to_string() + c.as_str()).unwrap_or_default()
}

const LIB_HEAD: &str = r#"(function (root, factory) {
  if (typeof define === 'function' && define.amd) {
    define([], factory);
  } else if (typeof module === 'object' && module.exports) {
    module.exports = factory();
  } else {
    root.Kit = factory();
  }
}(this, function () {
  'use strict';
  var lib = {};
  var hasOwn = Object.prototype.hasOwnProperty;
  var slice = Array.prototype.slice;

  function extend(dest) {
    for (var i = 1; i < arguments.length; i++) {
      var src = arguments[i];
      for (var key in src) {
        if (hasOwn.call(src, key)) {
          dest[key] = src[key];
        }
      }
    }
    return dest;
  }

  function escapeHtml(s) {
    return String(s).replace(/&/g, '&amp;').replace(/</g, '&lt;').replace(/>/g, '&gt;').replace(/"/g, '&quot;');
  }

  function each(list, fn, ctx) {
    if (list == null) return list;
    if (typeof list.length === 'number') {
      for (var i = 0; i < list.length; i++) {
        if (fn.call(ctx, list[i], i, list) === false) break;
      }
    } else {
      for (var k in list) {
        if (hasOwn.call(list, k) && fn.call(ctx, list[k], k, list) === false) break;
      }
    }
    return list;
  }

  function map(list, fn, ctx) {
    var out = [];
    each(list, function (v, k) { out.push(fn.call(ctx, v, k, list)); });
    return out;
  }

  function debounce(fn, wait) {
    var timer = null;
    return function () {
      var ctx = this, args = arguments;
      clearTimeout(timer);
      timer = setTimeout(function () { fn.apply(ctx, args); }, wait);
    };
  }

  function template(str, data) {
    return str.replace(/\{(\w+)\}/g, function (m, name) {
      return data[name] == null ? '' : escapeHtml(data[name]);
    });
  }

  function ajax(opts, done) {
    var xhr = new XMLHttpRequest();
    xhr.open(opts.method || 'GET', opts.url, true);
    xhr.onreadystatechange = function () {
      if (xhr.readyState !== 4) return;
      var body = xhr.responseText;
      try {
        body = opts.json ? JSON.parse(body) : body;
      } catch (e) {
        return done(e);
      }
      done(null, body, xhr.status);
    };
    xhr.send(opts.data || null);
    return xhr;
  }

  function parseQuery(qs) {
    var out = {};
    each((qs || '').replace(/^\?/, '').split('&'), function (pair) {
      if (!pair) return;
      var parts = pair.split('=');
      out[decodeURIComponent(parts[0])] = decodeURIComponent(parts[1] || '');
    });
    return out;
  }

  lib.extend = extend;
  lib.escapeHtml = escapeHtml;
  lib.each = each;
  lib.map = map;
  lib.debounce = debounce;
  lib.template = template;
  lib.ajax = ajax;
  lib.parseQuery = parseQuery;
"#;

const LIB_TAIL: &str = r#"
  lib.version = '3.1.4';
  return lib;
}));
"#;

fn lib_module(rng: &mut ChaCha8Rng, i: usize, out: &mut String) {
    let w = word(rng);
    let c = format!("{}{}", cap(w), i);
    let limit = rng.gen_range(2..200);
    let cls = format!("{w}-{}", rng.gen_range(0..100));
    let _ = write!(
        out,
        r#"
  var defaults{i} = {{ cls: '{cls}', limit: {limit}, sorted: {sorted}, label: '{label}' }};

  function {c}(options) {{
    this.options = extend({{}}, defaults{i}, options);
    this.items = [];
    this.length = 0;
    this._events = {{}};
  }}

  {c}.prototype.add = function (item) {{
    if (this.items.length >= this.options.limit) {{
      this.items.shift();
    }}
    this.items.push(item);
    this.length = this.items.length;
    this.emit('add', item);
    return this;
  }};

  {c}.prototype.find = function (pred) {{
    for (var i = 0; i < this.items.length; i++) {{
      if (pred(this.items[i], i)) {{
        return this.items[i];
      }}
    }}
    return null;
  }};

  {c}.prototype.on = function (name, fn) {{
    (this._events[name] || (this._events[name] = [])).push(fn);
    return this;
  }};

  {c}.prototype.emit = function (name) {{
    var list = this._events[name];
    if (!list) return false;
    var args = slice.call(arguments, 1);
    for (var j = 0; j < list.length; j++) {{
      list[j].apply(this, args);
    }}
    return true;
  }};
"#,
        sorted = rng.gen_bool(0.5),
        label = cap(word(rng)),
    );
    if rng.gen_bool(0.7) {
        let _ = write!(
            out,
            r#"
  {c}.prototype.render = function (el) {{
    var html = '';
    for (var k = 0; k < this.items.length; k++) {{
      html += '<li class="' + this.options.cls + '">' + escapeHtml(this.items[k]) + '</li>';
    }}
    el.innerHTML = '<ul>' + html + '</ul>';
    return el;
  }};
"#
        );
    }
    if rng.gen_bool(0.6) {
        let _ = write!(
            out,
            r#"
  {c}.prototype.sortBy = function (key, desc) {{
    var sign = desc ? -1 : 1;
    this.items.sort(function (a, b) {{
      var x = a[key], y = b[key];
      if (x === y) return 0;
      return x < y ? -sign : sign;
    }});
    return this;
  }};

  {c}.prototype.toJSON = function () {{
    return map(this.items, function (v) {{
      switch (typeof v) {{
        case 'string':
          return v.trim();
        case 'number':
          return isFinite(v) ? v : null;
        case 'object':
          return v === null ? null : extend({{}}, v);
        default:
          return String(v);
      }}
    }});
  }};
"#
        );
    }
    let util = format!("{}Of{i}", word(rng));
    let _ = write!(
        out,
        r#"
  function {util}(value, fallback) {{
    var n = 0, total = 0;
    while (n < {limit} && value && n < value.length) {{
      total += value[n] ? {step} : 0;
      n++;
    }}
    if (total === 0) {{
      return fallback === undefined ? '{cls}' : fallback;
    }}
    return total + ':' + n;
  }}

  lib.{c} = {c};
  lib.{util} = {util};
"#,
        step = rng.gen_range(1..9),
    );
}

/// A UMD-style general-purpose library of at least `min_bytes`.
pub fn library(seed: u64, min_bytes: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::from(LIB_HEAD);
    let mut i = 0;
    while out.len() + LIB_TAIL.len() < min_bytes {
        lib_module(&mut rng, i, &mut out);
        i += 1;
    }
    out.push_str(LIB_TAIL);
    out
}

fn screen(rng: &mut ChaCha8Rng, app: usize, i: usize, out: &mut String) {
    let w = word(rng);
    let name = format!("{w}Screen{i}");
    let scheme = if rng.gen_bool(0.2) { "http" } else { "https" };
    let host = format!("api{}.example.com", app % 40);
    let _ = write!(
        out,
        r#"
var {name} = {{
  el: null,
  cache: {{}},
  init: function (root) {{
    this.el = document.getElementById('{w}-{i}') || root;
    this.load();
  }},
  load: function () {{
    var self = this;
    var req = new XMLHttpRequest();
    req.open('GET', '{scheme}://{host}/v1/{w}s?page={i}');
    req.onload = function () {{
      var data = JSON.parse(req.responseText);
      self.cache['{w}'] = data;
      self.show(data);
    }};
    req.send();
  }},
  show: function (data) {{
    var rows = [];
    for (var r = 0; r < data.length && r < {limit}; r++) {{
      rows.push('<div class="{w}">' + data[r].title + '</div>');
    }}
    this.el.innerHTML = rows.join('');
    var count = document.createElement('span');
    count.textContent = rows.length + ' {w}s';
    this.el.appendChild(count);
  }},
  clear: function () {{
    this.cache = {{}};
    if (this.el) {{
      this.el.textContent = '';
    }}
  }}
}};
"#,
        limit = rng.gen_range(5..50),
    );
    if rng.gen_bool(0.3) {
        let _ = write!(
            out,
            r#"
function format{cw}{i}(entry) {{
  var when = new Date(entry.time);
  var label = entry.label || '{w}';
  if (label.length > {cut}) {{
    label = label.substring(0, {cut}) + '...';
  }}
  return label + ' (' + when.toLocaleDateString() + ')';
}}
"#,
            cw = cap(w),
            cut = rng.gen_range(8..40),
        );
    }
}

/// App scripts totalling at least `min_bytes`, split over several files.
pub fn app_files(seed: u64, app: usize, min_bytes: usize) -> Vec<(String, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (app as u64).wrapping_mul(0x9e37_79b9));
    let nfiles = rng.gen_range(3..7);
    let per_file = min_bytes / nfiles + 1;
    let mut files = Vec::new();
    let mut i = 0;
    for f in 0..nfiles {
        let mut out = String::from("'use strict';\n");
        if f == 0 && rng.gen_bool(0.15) {
            out.push_str(
                "window.addEventListener('message', function (evt) {\n  var msg = evt.data;\n  if (msg && msg.type === 'refresh') {\n    location.reload();\n  }\n});\n",
            );
        }
        while out.len() < per_file {
            screen(&mut rng, app, i, &mut out);
            i += 1;
        }
        files.push((format!("js/part{f}.js"), out));
    }
    files.push((
        "index.html".to_string(),
        "<!DOCTYPE html>\n<html>\n<head><meta charset=\"utf-8\"></head>\n<body>\n<div id=\"main\"></div>\n</body>\n</html>\n"
            .to_string(),
    ));
    files
}

pub fn manifest(name: &str, category: &str, permissions: &[&str]) -> String {
    let perms: Vec<String> = permissions.iter().map(|p| format!("    \"{p}\": {{}}")).collect();
    format!(
        "{{\n  \"name\": \"{name}\",\n  \"type\": \"{category}\",\n  \"launch_path\": \"/index.html\",\n  \"permissions\": {{\n{}\n  }}\n}}\n",
        perms.join(",\n")
    )
}

/// Write an app as a directory, or as a zip archive when `archive` is set.
pub fn write_app(root: &Path, name: &str, manifest: &str, files: &[(String, String)], archive: bool) {
    if archive {
        let mut w = zip::ZipWriter::new(fs::File::create(root.join(format!("{name}.zip"))).unwrap());
        let opts = zip::write::SimpleFileOptions::default().compression_method(zip::CompressionMethod::Deflated);
        w.start_file("manifest.webapp", opts).unwrap();
        w.write_all(manifest.as_bytes()).unwrap();
        for (p, s) in files {
            w.start_file(p.as_str(), opts).unwrap();
            w.write_all(s.as_bytes()).unwrap();
        }
        w.finish().unwrap();
    } else {
        let dir = root.join(name);
        fs::create_dir_all(&dir).unwrap();
        fs::write(dir.join("manifest.webapp"), manifest).unwrap();
        for (p, s) in files {
            let path = dir.join(p);
            fs::create_dir_all(path.parent().unwrap()).unwrap();
            fs::write(path, s).unwrap();
        }
    }
}

pub struct PerfCorpus {
    pub library_apps: Vec<String>,
    pub script_bytes: usize,
    pub library_bytes: usize,
}

/// `apps` packaged apps with ~100 KB of scripts each; every eighth bundles the library.
pub fn write_perf_corpus(root: &Path, apps: usize) -> PerfCorpus {
    let lib = library(7, 260 * 1024);
    let mut info = PerfCorpus { library_apps: Vec::new(), script_bytes: 0, library_bytes: lib.len() };
    let perms = ["systemXHR", "geolocation", "storage", "desktop-notification", "alarms"];
    for a in 0..apps {
        let name = format!("app{a:04}");
        let mut files = app_files(11, a, 100 * 1024);
        if a % 8 == 0 {
            files.push(("lib/kit.js".to_string(), lib.clone()));
            info.library_apps.push(name.clone());
        }
        info.script_bytes += files.iter().filter(|(p, _)| p.ends_with(".js")).map(|(_, s)| s.len()).sum::<usize>();
        let mut rng = ChaCha8Rng::seed_from_u64(a as u64);
        let n = rng.gen_range(0..3);
        let chosen: Vec<&str> = perms.choose_multiple(&mut rng, n).copied().collect();
        write_app(root, &name, &manifest(&name, "privileged", &chosen), &files, a % 5 == 0);
    }
    info
}

/// Permission request counts of the market table, plus eight rarer permissions.
pub const MARKET_REQUESTS: &[(&str, u64)] = &[
    ("systemXHR", 142),
    ("geolocation", 106),
    ("storage", 54),
    ("desktop-notification", 53),
    ("device-storage:sdcard", 51),
    ("browser", 31),
    ("audio-channel-content", 28),
    ("device-storage:pictures", 27),
    ("alarms", 21),
    ("contacts", 16),
    ("tcp-socket", 10),
    ("mobilenetwork", 7),
    ("device-storage:videos", 6),
];

pub const MARKET_RARE: &[(&str, u64)] = &[
    ("camera", 3),
    ("fmradio", 3),
    ("audio-capture", 3),
    ("device-storage:music", 2),
    ("video-capture", 2),
    ("idle", 2),
    ("push", 2),
    ("speaker-control", 1),
];

/// Apps whose manifests together hold exactly the table's requests.
/// Each app asks for up to three permissions so requests and apps differ.
pub fn write_permission_corpus(root: &Path) -> usize {
    let mut pool: Vec<&str> = Vec::new();
    for (p, n) in MARKET_REQUESTS.iter().chain(MARKET_RARE) {
        pool.extend(std::iter::repeat(*p).take(*n as usize));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2014);
    pool.shuffle(&mut rng);
    let mut apps: Vec<Vec<&str>> = Vec::new();
    // greedy packing keeps permissions distinct within an app
    for p in pool {
        let slot = (0..apps.len()).rev().take(4).find(|&i| apps[i].len() < 3 && !apps[i].contains(&p));
        match slot {
            Some(i) if rng.gen_bool(0.5) => apps[i].push(p),
            _ => apps.push(vec![p]),
        }
    }
    for (i, perms) in apps.iter().enumerate() {
        let name = format!("t{i:04}");
        let files = vec![("app.js".to_string(), format!("var started{i} = Date.now();\n"))];
        write_app(root, &name, &manifest(&name, "privileged", perms), &files, false);
    }
    apps.len()
}

/// Handler-registering apps, `without_origin` of which never read the origin, plus apps with no handler.
pub fn write_handler_corpus(root: &Path, handlers: usize, without_origin: usize, others: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(83);
    for i in 0..handlers {
        let name = format!("h{i:03}");
        let ev = ["evt", "e", "event", "msg"][rng.gen_range(0..4)];
        let check = if i < without_origin {
            String::new()
        } else if rng.gen_bool(0.5) {
            format!("  if ({ev}.origin !== 'app://partner.example') {{\n    return;\n  }}\n")
        } else {
            format!("  if ({ev}.source !== window.parent) {{\n    return;\n  }}\n")
        };
        let src = format!(
            "window.addEventListener('message', function({ev}) {{\n{check}  var payload = {ev}.data;\n  token = payload.token;\n  self.exchangeToken();\n}});\n"
        );
        let files = vec![("app.js".to_string(), src)];
        write_app(root, &name, &manifest(&name, "privileged", &[]), &files, false);
    }
    for i in 0..others {
        let name = format!("n{i:03}");
        let files = vec![("app.js".to_string(), "document.title = 'plain';\n".to_string())];
        write_app(root, &name, &manifest(&name, "privileged", &[]), &files, false);
    }
}
