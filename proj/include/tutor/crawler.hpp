#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_set>
#include <vector>

#include "tutor/document.hpp"
#include "tutor/error.hpp"

namespace tutor {

// ---------------------------------------------------------------------------
// HTML

namespace html {

struct Event {
  enum Kind { kText, kStart, kEnd } kind;
  std::string name;  // lowercase tag name, empty for text
  std::string text;  // raw text (entities not yet decoded)
  std::map<std::string, std::string> attrs;
};

inline char lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

inline bool is_name_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
         c == ':' || c == '_';
}

inline bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f'; }

inline void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp == 0 || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) cp = 0xFFFD;
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

inline const std::map<std::string, std::uint32_t, std::less<>>& named_entities() {
  static const std::map<std::string, std::uint32_t, std::less<>> table = {
      {"amp", '&'},      {"lt", '<'},        {"gt", '>'},        {"quot", '"'},     {"apos", '\''},
      {"nbsp", ' '},     {"ndash", 0x2013},  {"mdash", 0x2014},  {"hellip", 0x2026}, {"lsquo", 0x2018},
      {"rsquo", 0x2019}, {"ldquo", 0x201C},  {"rdquo", 0x201D},  {"copy", 0xA9},    {"reg", 0xAE},
      {"trade", 0x2122}, {"deg", 0xB0},      {"middot", 0xB7},   {"bull", 0x2022},  {"times", 0xD7},
      {"eacute", 0xE9},  {"egrave", 0xE8},   {"aacute", 0xE1},   {"agrave", 0xE0},  {"ccedil", 0xE7},
      {"ouml", 0xF6},    {"uuml", 0xFC},     {"auml", 0xE4},     {"szlig", 0xDF},   {"ntilde", 0xF1},
      {"iacute", 0xED},  {"oacute", 0xF3},   {"uacute", 0xFA},   {"pound", 0xA3},   {"euro", 0x20AC},
      {"sect", 0xA7},    {"para", 0xB6},     {"laquo", 0xAB},    {"raquo", 0xBB},   {"shy", 0xAD},
  };
  return table;
}

// Decodes &name; &#N; &#xH; and leaves anything unrecognized as written.
inline std::string decode_entities(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    if (s[i] != '&') {
      out += s[i++];
      continue;
    }
    std::size_t semi = s.find(';', i + 1);
    if (semi == std::string_view::npos || semi - i > 32) {
      out += s[i++];
      continue;
    }
    std::string_view body = s.substr(i + 1, semi - i - 1);
    std::optional<std::uint32_t> cp;
    if (body.size() > 1 && body[0] == '#') {
      bool hex = body[1] == 'x' || body[1] == 'X';
      std::string_view digits = body.substr(hex ? 2 : 1);
      std::uint64_t v = 0;
      bool ok = !digits.empty();
      for (char c : digits) {
        int d = (c >= '0' && c <= '9') ? c - '0'
                : hex && (c >= 'a' && c <= 'f') ? c - 'a' + 10
                : hex && (c >= 'A' && c <= 'F') ? c - 'A' + 10
                                                : -1;
        if (d < 0) {
          ok = false;
          break;
        }
        v = std::min<std::uint64_t>(v * (hex ? 16 : 10) + static_cast<std::uint64_t>(d), 0x110000);
      }
      if (ok) cp = static_cast<std::uint32_t>(v);
    } else if (auto it = named_entities().find(body); it != named_entities().end()) {
      cp = it->second;
    }
    if (!cp) {
      out += s[i++];
      continue;
    }
    append_utf8(out, *cp);
    i = semi + 1;
  }
  return out;
}

inline bool is_raw_text(std::string_view tag) { return tag == "script" || tag == "style"; }

// Lenient tokenizer: comments, doctypes and processing instructions are
// dropped; a '<' that does not start a tag is text; script/style bodies
// are passed through as one text event.
inline std::vector<Event> tokenize(std::string_view h) {
  std::vector<Event> out;
  std::string text;
  auto flush = [&] {
    if (!text.empty()) out.push_back({Event::kText, "", std::move(text), {}});
    text.clear();
  };
  std::size_t i = 0;
  while (i < h.size()) {
    if (h[i] != '<') {
      text += h[i++];
      continue;
    }
    if (h.substr(i, 4) == "<!--") {
      std::size_t end = h.find("-->", i + 4);
      i = end == std::string_view::npos ? h.size() : end + 3;
      continue;
    }
    if (i + 1 < h.size() && (h[i + 1] == '!' || h[i + 1] == '?')) {
      std::size_t end = h.find('>', i);
      i = end == std::string_view::npos ? h.size() : end + 1;
      continue;
    }
    bool closing = i + 1 < h.size() && h[i + 1] == '/';
    std::size_t p = i + (closing ? 2 : 1);
    std::size_t name_start = p;
    while (p < h.size() && is_name_char(h[p])) ++p;
    if (p == name_start || !std::isalpha(static_cast<unsigned char>(h[name_start]))) {
      text += h[i++];
      continue;
    }
    Event e{closing ? Event::kEnd : Event::kStart, "", "", {}};
    for (std::size_t k = name_start; k < p; ++k) e.name += lower(h[k]);
    // Attributes up to the closing '>'; quoted values may contain '>'.
    while (p < h.size() && h[p] != '>') {
      if (is_space(h[p]) || h[p] == '/') {
        ++p;
        continue;
      }
      std::size_t a = p;
      while (p < h.size() && !is_space(h[p]) && h[p] != '=' && h[p] != '>' && h[p] != '/') ++p;
      std::string key;
      for (std::size_t k = a; k < p; ++k) key += lower(h[k]);
      while (p < h.size() && is_space(h[p])) ++p;
      std::string value;
      if (p < h.size() && h[p] == '=') {
        ++p;
        while (p < h.size() && is_space(h[p])) ++p;
        if (p < h.size() && (h[p] == '"' || h[p] == '\'')) {
          char q = h[p++];
          std::size_t end = h.find(q, p);
          if (end == std::string_view::npos) end = h.size();
          value = std::string(h.substr(p, end - p));
          p = std::min(end + 1, h.size());
        } else {
          std::size_t v = p;
          while (p < h.size() && !is_space(h[p]) && h[p] != '>') ++p;
          value = std::string(h.substr(v, p - v));
        }
      }
      if (!key.empty()) e.attrs.emplace(std::move(key), decode_entities(value));
    }
    i = std::min(p + 1, h.size());
    flush();
    bool raw = !closing && is_raw_text(e.name);
    std::string name = e.name;
    out.push_back(std::move(e));
    if (raw) {
      std::string close = "</" + name;
      std::size_t end = i;
      while (end < h.size()) {
        end = h.find("</", end);
        if (end == std::string_view::npos) {
          end = h.size();
          break;
        }
        bool match = true;
        for (std::size_t k = 0; k < close.size() && match; ++k) {
          match = end + k < h.size() && lower(h[end + k]) == close[k];
        }
        if (match) break;
        end += 2;
      }
      if (end > i) out.push_back({Event::kText, "", std::string(h.substr(i, end - i)), {}});
      i = end;
    }
  }
  flush();
  return out;
}

inline bool is_hidden(std::string_view tag) {
  static const std::set<std::string, std::less<>> tags = {"script", "style", "nav",      "footer",
                                                          "head",   "noscript", "template", "svg"};
  return tags.contains(tag);
}

inline bool is_block(std::string_view tag) {
  static const std::set<std::string, std::less<>> tags = {
      "address", "article", "aside",  "blockquote", "br",     "dd",      "div",   "dl",
      "dt",      "fieldset", "figcaption", "figure", "form", "h1",      "h2",    "h3",
      "h4",      "h5",      "h6",     "header",     "hr",     "li",      "main",  "ol",
      "p",       "pre",     "section", "table",     "tr",     "ul",      "caption", "body",
      "html",    "details", "summary"};
  return tags.contains(tag);
}

inline bool is_void(std::string_view tag) {
  static const std::set<std::string, std::less<>> tags = {"area", "base", "br",   "col",   "embed", "hr",
                                                          "img",  "input", "link", "meta", "source",
                                                          "track", "wbr"};
  return tags.contains(tag);
}

}  // namespace html

// Visible text of an HTML document: hidden elements dropped, one line per
// block, whitespace collapsed, entities decoded.
inline std::string extract_text(std::string_view markup) {
  std::vector<std::string> lines(1);
  std::map<std::string, int> hidden;
  int hidden_depth = 0;
  auto newline = [&] {
    if (!lines.back().empty()) lines.emplace_back();
  };
  for (const auto& e : html::tokenize(markup)) {
    if (e.kind == html::Event::kStart) {
      if (html::is_hidden(e.name) && !html::is_void(e.name)) {
        ++hidden[e.name];
        ++hidden_depth;
      }
      if (html::is_block(e.name)) newline();
      else if (e.name == "td" || e.name == "th") lines.back() += ' ';
    } else if (e.kind == html::Event::kEnd) {
      if (auto it = hidden.find(e.name); it != hidden.end() && it->second > 0) {
        --it->second;
        --hidden_depth;
      }
      if (html::is_block(e.name)) newline();
    } else if (hidden_depth == 0) {
      std::string decoded = html::decode_entities(e.text);
      for (char c : decoded) {
        if (html::is_space(c)) {
          if (!lines.back().empty() && lines.back().back() != ' ') lines.back() += ' ';
        } else {
          lines.back() += c;
        }
      }
    }
  }
  std::string out;
  for (auto& line : lines) {
    std::size_t a = line.find_first_not_of(' ');
    if (a == std::string::npos) continue;
    std::size_t b = line.find_last_not_of(' ');
    if (!out.empty()) out += '\n';
    out += line.substr(a, b - a + 1);
  }
  return out;
}

// ---------------------------------------------------------------------------
// URLs

struct Url {
  std::string scheme;  // "http" or "https"
  std::string host;    // lowercase
  int port = 0;        // 0 = scheme default
  std::string path = "/";
  std::string query;   // without '?'

  int effective_port() const { return port != 0 ? port : (scheme == "https" ? 443 : 80); }

  // scheme://host[:port]
  std::string origin() const {
    std::string o = scheme + "://" + host;
    if (port != 0) o += ":" + std::to_string(port);
    return o;
  }

  std::string path_and_query() const { return query.empty() ? path : path + "?" + query; }
  std::string str() const { return origin() + path_and_query(); }
  std::string without_query() const { return origin() + path; }

  friend bool operator==(const Url&, const Url&) = default;
};

namespace detail {

inline std::string remove_dot_segments(std::string_view path) {
  std::vector<std::string> out;
  std::size_t i = 0;
  bool trailing = false;
  while (i <= path.size()) {
    std::size_t j = path.find('/', i);
    if (j == std::string_view::npos) j = path.size();
    std::string_view seg = path.substr(i, j - i);
    trailing = false;
    if (seg == "..") {
      if (!out.empty()) out.pop_back();
      trailing = true;
    } else if (seg == ".") {
      trailing = true;
    } else if (!seg.empty() || j == path.size()) {
      out.emplace_back(seg);
    }
    i = j + 1;
  }
  std::string result;
  for (const auto& s : out) result += "/" + s;
  if (result.empty() || (trailing && result.back() != '/')) result += "/";
  return result;
}

inline std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = html::lower(c);
  return out;
}

// Splits "path?query#fragment", dropping the fragment.
inline std::pair<std::string, std::string> split_path_query(std::string_view rest) {
  if (auto hash = rest.find('#'); hash != std::string_view::npos) rest = rest.substr(0, hash);
  auto q = rest.find('?');
  if (q == std::string_view::npos) return {std::string(rest), ""};
  return {std::string(rest.substr(0, q)), std::string(rest.substr(q + 1))};
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && html::is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && html::is_space(s.back())) s.remove_suffix(1);
  return s;
}

}  // namespace detail

// Absolute http(s) URL in canonical form: lowercase scheme and host,
// default port dropped, fragment stripped, dot segments resolved.
inline std::optional<Url> parse_url(std::string_view s) {
  s = detail::trim(s);
  auto sep = s.find("://");
  if (sep == std::string_view::npos) return std::nullopt;
  Url u;
  u.scheme = detail::to_lower_ascii(s.substr(0, sep));
  if (u.scheme != "http" && u.scheme != "https") return std::nullopt;
  std::string_view rest = s.substr(sep + 3);
  std::size_t auth_end = rest.find_first_of("/?#");
  std::string_view authority = rest.substr(0, auth_end);
  rest = auth_end == std::string_view::npos ? std::string_view{} : rest.substr(auth_end);
  if (auto at = authority.rfind('@'); at != std::string_view::npos) authority = authority.substr(at + 1);
  std::string_view host = authority;
  std::string_view port;
  if (!authority.empty() && authority.front() == '[') {
    auto close = authority.find(']');
    if (close == std::string_view::npos) return std::nullopt;
    host = authority.substr(0, close + 1);
    if (close + 1 < authority.size()) {
      if (authority[close + 1] != ':') return std::nullopt;
      port = authority.substr(close + 2);
    }
  } else if (auto colon = authority.rfind(':'); colon != std::string_view::npos) {
    host = authority.substr(0, colon);
    port = authority.substr(colon + 1);
  }
  if (host.empty()) return std::nullopt;
  u.host = detail::to_lower_ascii(host);
  if (!port.empty()) {
    int p = 0;
    for (char c : port) {
      if (c < '0' || c > '9') return std::nullopt;
      p = p * 10 + (c - '0');
      if (p > 65535) return std::nullopt;
    }
    bool default_port = (u.scheme == "http" && p == 80) || (u.scheme == "https" && p == 443);
    u.port = default_port ? 0 : p;
  }
  auto [path, query] = detail::split_path_query(rest);
  u.path = detail::remove_dot_segments(path.empty() ? "/" : path);
  u.query = std::move(query);
  return u;
}

// Resolves a link found on `base`; non-http(s) targets yield nullopt.
inline std::optional<Url> resolve_url(const Url& base, std::string_view ref) {
  ref = detail::trim(ref);
  if (auto hash = ref.find('#'); hash != std::string_view::npos) ref = ref.substr(0, hash);
  if (ref.empty()) return base;
  std::size_t colon = ref.find(':');
  std::size_t first_delim = ref.find_first_of("/?#");
  if (colon != std::string_view::npos && (first_delim == std::string_view::npos || colon < first_delim)) {
    return parse_url(ref);
  }
  if (ref.starts_with("//")) return parse_url(base.scheme + ":" + std::string(ref));
  Url u = base;
  auto [path, query] = detail::split_path_query(ref);
  if (path.empty()) {
    u.query = std::move(query);
    return u;
  }
  if (path.front() == '/') {
    u.path = detail::remove_dot_segments(path);
  } else {
    std::string dir = base.path.substr(0, base.path.rfind('/') + 1);
    u.path = detail::remove_dot_segments(dir + path);
  }
  u.query = std::move(query);
  return u;
}

// href targets of <a> and <area> in document order, honoring <base href>.
inline std::vector<Url> extract_links(std::string_view markup, const Url& page) {
  std::vector<Url> out;
  Url base = page;
  for (const auto& e : html::tokenize(markup)) {
    if (e.kind != html::Event::kStart) continue;
    auto href = e.attrs.find("href");
    if (href == e.attrs.end()) continue;
    if (e.name == "base") {
      if (auto b = resolve_url(page, href->second)) base = *b;
    } else if (e.name == "a" || e.name == "area") {
      if (auto u = resolve_url(base, href->second)) out.push_back(std::move(*u));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// robots.txt

class RobotsRules {
 public:
  static RobotsRules allow_all() { return {}; }

  // Uses the group naming `agent` (case-insensitive substring of the
  // product token), else the `*` group.
  static RobotsRules parse(std::string_view text, std::string_view agent) {
    struct Group {
      std::vector<std::string> agents;
      std::vector<Rule> rules;
    };
    std::vector<Group> groups;
    bool in_agents = false;
    std::size_t i = 0;
    while (i <= text.size()) {
      std::size_t j = text.find('\n', i);
      if (j == std::string_view::npos) j = text.size();
      std::string_view line = text.substr(i, j - i);
      i = j + 1;
      if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      auto colon = line.find(':');
      if (colon == std::string_view::npos) continue;
      std::string key = detail::to_lower_ascii(detail::trim(line.substr(0, colon)));
      std::string value(detail::trim(line.substr(colon + 1)));
      if (key == "user-agent") {
        if (!in_agents) groups.emplace_back();
        groups.back().agents.push_back(detail::to_lower_ascii(value));
        in_agents = true;
      } else if (key == "allow" || key == "disallow") {
        in_agents = false;
        if (groups.empty()) continue;
        if (value.empty()) continue;  // "Disallow:" allows everything
        groups.back().rules.push_back({value, key == "allow"});
      } else {
        in_agents = false;
      }
    }
    std::string me = detail::to_lower_ascii(agent);
    const Group* star = nullptr;
    for (const auto& g : groups) {
      for (const auto& a : g.agents) {
        if (a == "*") {
          if (star == nullptr) star = &g;
        } else if (!a.empty() && me.find(a) != std::string::npos) {
          return RobotsRules(g.rules);
        }
      }
    }
    return star ? RobotsRules(star->rules) : RobotsRules{};
  }

  // Longest matching pattern decides; Allow wins ties.
  bool allowed(std::string_view path_and_query) const {
    std::size_t best = 0;
    bool verdict = true;
    for (const auto& r : rules_) {
      if (!matches(r.pattern, path_and_query)) continue;
      if (r.pattern.size() > best || (r.pattern.size() == best && r.allow)) {
        best = r.pattern.size();
        verdict = r.allow;
      }
    }
    return verdict;
  }

 private:
  struct Rule {
    std::string pattern;
    bool allow;
  };

  RobotsRules() = default;
  explicit RobotsRules(std::vector<Rule> rules) : rules_(std::move(rules)) {}

  // Prefix match with '*' wildcards and an optional '$' end anchor.
  static bool matches(std::string_view pattern, std::string_view path) {
    bool anchored = !pattern.empty() && pattern.back() == '$';
    if (anchored) pattern.remove_suffix(1);
    std::function<bool(std::size_t, std::size_t)> go = [&](std::size_t p, std::size_t s) -> bool {
      if (p == pattern.size()) return !anchored || s == path.size();
      if (pattern[p] == '*') {
        for (std::size_t k = s; k <= path.size(); ++k)
          if (go(p + 1, k)) return true;
        return false;
      }
      return s < path.size() && pattern[p] == path[s] && go(p + 1, s + 1);
    };
    return go(0, 0);
  }

  std::vector<Rule> rules_;
};

// ---------------------------------------------------------------------------
// Fetching

struct FetchResponse {
  int status = 0;
  std::string content_type;
  std::string body;
  std::string error;  // transport failure

  bool ok() const { return error.empty() && status >= 200 && status < 300; }
};

class Fetcher {
 public:
  virtual ~Fetcher() = default;
  virtual FetchResponse fetch(const Url& url, std::chrono::milliseconds timeout) = 0;
};

// Spaces requests to one origin at least `delay` apart, measured between
// departures. Each origin has its own gate; different origins never wait
// on each other.
class HostThrottle {
 public:
  using clock = std::chrono::steady_clock;

  explicit HostThrottle(std::chrono::milliseconds delay) : delay_(delay) {}

  // Blocks until the origin may be contacted; returns the departure time.
  clock::time_point wait(const std::string& origin) {
    Gate* gate;
    {
      std::lock_guard lock(mu_);
      gate = &gates_[origin];
    }
    std::lock_guard lock(gate->mu);
    if (gate->used) std::this_thread::sleep_until(gate->last + delay_);
    gate->last = clock::now();
    gate->used = true;
    return gate->last;
  }

 private:
  struct Gate {
    std::mutex mu;
    clock::time_point last;
    bool used = false;
  };

  std::chrono::milliseconds delay_;
  std::mutex mu_;
  std::map<std::string, Gate> gates_;
};

inline bool is_html(std::string_view content_type) {
  std::string ct = detail::to_lower_ascii(content_type);
  return ct.empty() || ct.starts_with("text/html") || ct.starts_with("application/xhtml");
}

inline bool is_textual(std::string_view content_type) {
  std::string ct = detail::to_lower_ascii(content_type);
  return is_html(ct) || ct.starts_with("text/plain");
}

// ---------------------------------------------------------------------------
// Crawl

inline constexpr std::string_view kUserAgent = "tutor-crawler/1.0";

struct CrawlJob {
  std::vector<std::string> seeds;
  std::string subject;
  std::size_t max_depth = 2;
  std::size_t max_pages = 200;
  bool same_host_only = true;
  std::chrono::milliseconds timeout{10000};
  std::chrono::milliseconds politeness{200};
  unsigned workers = 4;
  std::string user_agent = std::string(kUserAgent);
};

struct CrawlError {
  std::string url;
  std::string message;
};

struct CrawlReport {
  std::size_t fetched = 0;  // successful page responses
  std::size_t skipped = 0;  // robots-excluded, non-text, empty or duplicate content
  std::vector<CrawlError> errors;
  std::vector<std::string> fetch_log;  // every page request, in order
  std::vector<Document> documents;     // newly stored
};

// Receives each extracted document; returns false if it was already known.
using DocumentSink = std::function<bool(const Document&)>;

// Level-by-level breadth-first crawl. Pages of one level are fetched by up
// to `workers` threads; results are processed in frontier order, so the
// stored set and the fetch log are deterministic for a static site.
inline CrawlReport crawl(const CrawlJob& job, Fetcher& fetcher, const DocumentSink& sink) {
  if (job.max_pages < 1) throw Error(ErrorCode::kInvalidArgument, "max_pages must be >= 1");
  std::vector<Url> level;
  std::set<std::string> visited;
  std::set<std::string> seen_paths;
  std::set<std::string> hosts;
  for (const auto& s : job.seeds) {
    auto u = parse_url(s);
    if (!u) throw Error(ErrorCode::kInvalidArgument, "invalid seed URL: " + s);
    hosts.insert(u->origin());
    if (visited.insert(u->str()).second) {
      seen_paths.insert(u->without_query());
      level.push_back(*u);
    }
  }
  if (level.empty()) throw Error(ErrorCode::kInvalidArgument, "no seed URLs");

  HostThrottle throttle(job.politeness);
  std::map<std::string, RobotsRules> robots;
  auto robots_for = [&](const Url& u) -> const RobotsRules& {
    auto it = robots.find(u.origin());
    if (it != robots.end()) return it->second;
    Url r = u;
    r.path = "/robots.txt";
    r.query.clear();
    throttle.wait(u.origin());
    auto res = fetcher.fetch(r, job.timeout);
    auto rules = res.ok() ? RobotsRules::parse(res.body, job.user_agent) : RobotsRules::allow_all();
    return robots.emplace(u.origin(), std::move(rules)).first->second;
  };

  CrawlReport report;
  std::unordered_set<std::string> ids;
  std::size_t budget = job.max_pages;
  for (std::size_t depth = 0; depth <= job.max_depth && !level.empty() && budget > 0; ++depth) {
    std::vector<Url> batch;
    for (const auto& u : level) {
      if (!robots_for(u).allowed(u.path_and_query())) {
        ++report.skipped;
        continue;
      }
      if (budget == 0) break;
      --budget;
      batch.push_back(u);
    }

    std::vector<FetchResponse> results(batch.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < batch.size(); i = next++) {
        throttle.wait(batch[i].origin());
        try {
          results[i] = fetcher.fetch(batch[i], job.timeout);
        } catch (const std::exception& e) {
          results[i].error = e.what();
        }
      }
    };
    std::size_t n_workers = std::min<std::size_t>(std::max(1u, job.workers), batch.size());
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    std::vector<Url> next_level;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const Url& url = batch[i];
      const FetchResponse& res = results[i];
      report.fetch_log.push_back(url.str());
      if (!res.ok()) {
        std::string msg = res.error.empty() ? "HTTP " + std::to_string(res.status) : res.error;
        report.errors.push_back({url.str(), msg});
        continue;
      }
      ++report.fetched;
      if (!is_textual(res.content_type)) {
        ++report.skipped;
        continue;
      }
      bool markup = is_html(res.content_type);
      std::string text = markup ? extract_text(res.body) : res.body;
      if (text.empty()) {
        ++report.skipped;
      } else {
        Document doc = Document::make(url.str(), job.subject, std::move(text));
        if (ids.insert(doc.id).second && sink(doc)) {
          report.documents.push_back(std::move(doc));
        } else {
          ++report.skipped;
        }
      }
      if (!markup || depth == job.max_depth) continue;
      for (auto& link : extract_links(res.body, url)) {
        if (job.same_host_only && !hosts.contains(link.origin())) continue;
        if (job.same_host_only && !link.query.empty() && seen_paths.contains(link.without_query())) continue;
        if (!visited.insert(link.str()).second) continue;
        seen_paths.insert(link.without_query());
        next_level.push_back(std::move(link));
      }
    }
    level = std::move(next_level);
  }
  return report;
}

// Documents are stored under the store's subject.
inline CrawlReport crawl(CrawlJob job, Fetcher& fetcher, DocumentStore& store) {
  job.subject = store.subject();
  return crawl(job, fetcher, [&](const Document& d) { return store.add(d); });
}

}  // namespace tutor
