#pragma once

#include <algorithm>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "linktopo/error.hpp"

namespace linktopo {

/// Absolute http(s) URL split into the parts that matter for identity.
/// Host and scheme are lowercase; default ports are dropped; the fragment
/// is never kept.
struct Url {
  std::string scheme;
  std::string host;
  std::string port;   // empty when default
  std::string path;   // always begins with '/'
  std::string query;  // without '?'; empty when absent
  bool has_query = false;

  std::string str() const {
    std::string out = scheme + "://" + host;
    if (!port.empty()) out += ":" + port;
    out += path;
    if (has_query) out += "?" + query;
    return out;
  }

  /// Last dot-separated label of the host ("edu" for "www.x.edu").
  std::string top_level_domain() const {
    auto dot = host.rfind('.');
    return dot == std::string::npos ? host : host.substr(dot + 1);
  }
};

namespace detail {

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline std::string_view trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline bool valid_scheme(std::string_view s) {
  if (s.empty() || !std::isalpha(static_cast<unsigned char>(s[0]))) return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '+' || c == '-' || c == '.';
  });
}

// RFC 3986 5.2.4
inline std::string remove_dot_segments(std::string_view path) {
  std::vector<std::string_view> out;
  bool trailing_slash = false;
  std::size_t i = 0;
  if (!path.empty() && path[0] == '/') i = 1;
  while (i <= path.size()) {
    auto next = path.find('/', i);
    if (next == std::string_view::npos) next = path.size();
    auto seg = path.substr(i, next - i);
    bool last = next == path.size();
    if (seg == ".") {
      trailing_slash = last;
    } else if (seg == "..") {
      if (!out.empty()) out.pop_back();
      trailing_slash = last;
    } else {
      out.push_back(seg);
      trailing_slash = false;
    }
    i = next + 1;
  }
  std::string result;
  for (std::size_t k = 0; k < out.size(); ++k) {
    result += '/';
    result += out[k];
  }
  if (trailing_slash || result.empty()) result += '/';
  return result;
}

inline std::optional<Url> parse_absolute(std::string_view s) {
  auto colon = s.find(':');
  if (colon == std::string_view::npos) return std::nullopt;
  auto scheme = to_lower(s.substr(0, colon));
  if (!valid_scheme(scheme)) return std::nullopt;
  if (scheme != "http" && scheme != "https") return std::nullopt;
  auto rest = s.substr(colon + 1);
  if (rest.substr(0, 2) != "//") return std::nullopt;
  rest.remove_prefix(2);

  auto auth_end = rest.find_first_of("/?#");
  auto authority = rest.substr(0, auth_end);
  rest = auth_end == std::string_view::npos ? std::string_view{} : rest.substr(auth_end);

  if (auto at = authority.rfind('@'); at != std::string_view::npos) authority.remove_prefix(at + 1);
  std::string_view host = authority, port;
  if (auto pc = authority.rfind(':'); pc != std::string_view::npos && authority.find(']') == std::string_view::npos) {
    host = authority.substr(0, pc);
    port = authority.substr(pc + 1);
  }
  if (host.empty()) return std::nullopt;
  for (unsigned char c : host) {
    if (!(std::isalnum(c) || c == '-' || c == '.' || c == '_' || c == '[' || c == ']' || c == ':'))
      return std::nullopt;
  }
  if (!std::all_of(port.begin(), port.end(), [](unsigned char c) { return std::isdigit(c); }))
    return std::nullopt;
  if (port.size() > 5) return std::nullopt;

  Url url;
  url.scheme = scheme;
  url.host = to_lower(host);
  while (!url.host.empty() && url.host.back() == '.') url.host.pop_back();
  if (url.host.empty()) return std::nullopt;
  std::string p(port);
  while (p.size() > 1 && p[0] == '0') p.erase(0, 1);
  if ((scheme == "http" && p == "80") || (scheme == "https" && p == "443")) p.clear();
  url.port = p;

  if (auto hash = rest.find('#'); hash != std::string_view::npos) rest = rest.substr(0, hash);
  std::string_view path = rest;
  if (auto q = rest.find('?'); q != std::string_view::npos) {
    path = rest.substr(0, q);
    url.query = std::string(rest.substr(q + 1));
    url.has_query = true;
  }
  url.path = remove_dot_segments(path.empty() ? std::string_view("/") : path);
  return url;
}

}  // namespace detail

/// Parses an already-absolute URL; throws RejectedLink otherwise.
inline Url parse_url(std::string_view raw) {
  auto url = detail::parse_absolute(detail::trim(raw));
  if (!url) throw Error(ErrorKind::RejectedLink, "unparsable URL '" + std::string(raw) + "'");
  return *url;
}

/// Resolves `raw` against `base` and returns the canonical absolute form.
///
/// Canonical form: lowercase scheme and host, no default port, no fragment,
/// dot segments resolved, trailing slash kept as given. Only http and https
/// are accepted; anything else (including garbage) is a rejected link.
inline std::string normalize_url(std::string_view raw, std::string_view base) {
  auto ref = detail::trim(raw);
  if (ref.empty()) throw Error(ErrorKind::RejectedLink, "empty link");
  for (unsigned char c : ref)
    if (c < 0x20 || c == ' ') throw Error(ErrorKind::RejectedLink, "whitespace in link");

  auto first_delim = ref.find_first_of("/?#");
  auto colon = ref.find(':');
  if (colon != std::string_view::npos && (first_delim == std::string_view::npos || colon < first_delim)) {
    // Has a scheme (or is junk that looks like one).
    return parse_url(ref).str();
  }

  Url b = parse_url(base);
  if (ref.substr(0, 2) == "//") return parse_url(b.scheme + ":" + std::string(ref)).str();

  std::string_view frag_free = ref.substr(0, ref.find('#'));
  std::string_view path = frag_free, query;
  bool has_query = false;
  if (auto q = frag_free.find('?'); q != std::string_view::npos) {
    path = frag_free.substr(0, q);
    query = frag_free.substr(q + 1);
    has_query = true;
  }

  Url out = b;
  if (path.empty()) {
    if (has_query) {
      out.query = std::string(query);
      out.has_query = true;
    }
    return out.str();
  }
  if (path[0] == '/') {
    out.path = detail::remove_dot_segments(path);
  } else {
    auto slash = b.path.rfind('/');
    std::string merged = b.path.substr(0, slash + 1) + std::string(path);
    out.path = detail::remove_dot_segments(merged);
  }
  out.query = std::string(query);
  out.has_query = has_query;
  return out.str();
}

/// Host of a canonical URL string; empty if it does not parse.
inline std::string url_host(std::string_view url) {
  auto u = detail::parse_absolute(url);
  return u ? u->host : std::string{};
}

inline std::string url_tld(std::string_view url) {
  auto u = detail::parse_absolute(url);
  return u ? u->top_level_domain() : std::string{};
}

}  // namespace linktopo
