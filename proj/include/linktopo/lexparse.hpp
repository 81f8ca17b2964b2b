#pragma once

#include <cctype>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "linktopo/corpus.hpp"
#include "linktopo/error.hpp"
#include "linktopo/stopwords_data.hpp"
#include "linktopo/url.hpp"

namespace linktopo {

inline constexpr std::size_t kMinTokenLength = 3;

class StopList {
 public:
  StopList() = default;

  static StopList from_text(std::string_view text) {
    StopList list;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
      auto w = detail::to_lower(detail::trim(line));
      if (!w.empty() && w[0] != '#') list.words_.insert(w);
    }
    return list;
  }

  static StopList from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open stop list " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_text(ss.str());
  }

  /// The list shipped with the library (resources/stopwords.txt).
  static const StopList& builtin() {
    static const StopList list = from_text(detail::kDefaultStopWords);
    return list;
  }

  bool contains(std::string_view w) const { return words_.count(std::string(w)) != 0; }
  std::size_t size() const { return words_.size(); }

 private:
  std::unordered_set<std::string> words_;
};

using TokenStream = std::vector<std::string>;

namespace detail {

struct Tag {
  std::string name;  // lowercase; "/name" for end tags
  std::vector<std::pair<std::string, std::string>> attrs;
};

inline std::string decode_entities(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '&') {
      out += s[i];
      continue;
    }
    auto semi = s.find(';', i);
    if (semi == std::string_view::npos || semi - i > 8) {
      out += '&';
      continue;
    }
    auto ent = s.substr(i + 1, semi - i - 1);
    if (ent == "amp") out += '&';
    else if (ent == "lt") out += '<';
    else if (ent == "gt") out += '>';
    else if (ent == "quot") out += '"';
    else if (ent == "apos" || ent == "#39") out += '\'';
    else out += ' ';
    i = semi;
  }
  return out;
}

// Parses the tag starting at html[pos] == '<'. Returns the index just past
// the tag, or npos when the document ends inside it.
inline std::size_t parse_tag(std::string_view html, std::size_t pos, Tag& tag) {
  tag = {};
  std::size_t i = pos + 1, n = html.size();
  bool end_tag = i < n && html[i] == '/';
  if (end_tag) ++i;
  while (i < n && (std::isalnum(static_cast<unsigned char>(html[i])) || html[i] == '-' || html[i] == ':'))
    tag.name += static_cast<char>(std::tolower(static_cast<unsigned char>(html[i++])));
  if (end_tag) tag.name = "/" + tag.name;
  while (i < n) {
    while (i < n && (std::isspace(static_cast<unsigned char>(html[i])) || html[i] == '/')) ++i;
    if (i >= n) break;
    if (html[i] == '>') return i + 1;
    if (html[i] == '<') return i;  // unclosed tag; let the caller resume here
    std::string key;
    while (i < n && !std::isspace(static_cast<unsigned char>(html[i])) && html[i] != '=' && html[i] != '>' &&
           html[i] != '<')
      key += static_cast<char>(std::tolower(static_cast<unsigned char>(html[i++])));
    while (i < n && std::isspace(static_cast<unsigned char>(html[i]))) ++i;
    std::string value;
    if (i < n && html[i] == '=') {
      ++i;
      while (i < n && std::isspace(static_cast<unsigned char>(html[i]))) ++i;
      if (i < n && (html[i] == '"' || html[i] == '\'')) {
        char q = html[i++];
        auto close = html.find(q, i);
        if (close == std::string_view::npos) return std::string_view::npos;
        value = std::string(html.substr(i, close - i));
        i = close + 1;
      } else {
        while (i < n && !std::isspace(static_cast<unsigned char>(html[i])) && html[i] != '>') value += html[i++];
      }
    }
    if (!key.empty()) tag.attrs.emplace_back(std::move(key), decode_entities(value));
  }
  return std::string_view::npos;
}

inline const std::string* attr(const Tag& tag, std::string_view key) {
  for (const auto& [k, v] : tag.attrs)
    if (k == key) return &v;
  return nullptr;
}

/// Walks a document, calling on_tag for every tag and on_text for every run
/// of visible text. Script, style and comment bodies are skipped.
template <class OnTag, class OnText>
void walk_html(std::string_view html, OnTag&& on_tag, OnText&& on_text) {
  std::size_t i = 0, n = html.size();
  Tag tag;
  while (i < n) {
    auto lt = html.find('<', i);
    if (lt == std::string_view::npos) {
      on_text(html.substr(i));
      return;
    }
    if (lt > i) on_text(html.substr(i, lt - i));
    if (html.substr(lt, 4) == "<!--") {
      auto end = html.find("-->", lt + 4);
      i = end == std::string_view::npos ? n : end + 3;
      continue;
    }
    if (lt + 1 < n && (html[lt + 1] == '!' || html[lt + 1] == '?')) {
      auto end = html.find('>', lt);
      i = end == std::string_view::npos ? n : end + 1;
      continue;
    }
    if (lt + 1 >= n || !(std::isalpha(static_cast<unsigned char>(html[lt + 1])) || html[lt + 1] == '/')) {
      on_text(html.substr(lt, 1));
      i = lt + 1;
      continue;
    }
    auto next = parse_tag(html, lt, tag);
    if (next == std::string_view::npos) return;
    on_tag(tag);
    i = next;
    if (tag.name == "script" || tag.name == "style") {
      // Raw text element: skip to the matching close tag, case-insensitively.
      std::string close = "</" + tag.name;
      std::size_t k = i;
      while (true) {
        k = html.find("</", k);
        if (k == std::string_view::npos) return;
        if (to_lower(html.substr(k, close.size())) == close) break;
        k += 2;
      }
      auto end = html.find('>', k);
      i = end == std::string_view::npos ? n : end + 1;
    }
  }
}

}  // namespace detail

/// Anchor targets in document order, resolved against `base`, canonical,
/// deduplicated (first occurrence wins). Fragment-only links, non-http(s)
/// schemes and unparsable hrefs are dropped. Never throws on bad markup.
inline std::vector<std::string> extract_links(std::string_view html, std::string_view base) {
  std::vector<std::string> links;
  std::unordered_set<std::string> seen;
  std::string effective_base(base);
  detail::walk_html(
      html,
      [&](const detail::Tag& tag) {
        if (tag.name == "base") {
          if (auto href = detail::attr(tag, "href")) {
            try {
              effective_base = normalize_url(*href, base);
            } catch (const Error&) {
            }
          }
          return;
        }
        if (tag.name != "a" && tag.name != "area") return;
        const auto* href = detail::attr(tag, "href");
        if (!href) return;
        auto ref = detail::trim(*href);
        if (ref.empty() || ref[0] == '#') return;
        try {
          auto url = normalize_url(ref, effective_base);
          if (seen.insert(url).second) links.push_back(std::move(url));
        } catch (const Error&) {
        }
      },
      [](std::string_view) {});
  return links;
}

/// Splits text into lowercase alphabetic tokens, dropping short tokens and
/// stop words.
inline void append_tokens(std::string_view text, const StopList& stop, TokenStream& out) {
  std::string cur;
  auto flush = [&] {
    if (cur.size() >= kMinTokenLength && !stop.contains(cur)) out.push_back(cur);
    cur.clear();
  };
  for (char c : text) {
    auto uc = static_cast<unsigned char>(c);
    if (uc < 0x80 && std::isalpha(uc)) cur += static_cast<char>(std::tolower(uc));
    else flush();
  }
  flush();
}

/// Visible text plus <title> and the description meta tag; image alt text
/// is not included.
inline TokenStream tokenize(std::string_view html, const StopList& stop = StopList::builtin()) {
  TokenStream tokens;
  std::string text;
  detail::walk_html(
      html,
      [&](const detail::Tag& tag) {
        text += ' ';
        if (tag.name == "meta") {
          auto name = detail::attr(tag, "name");
          auto content = detail::attr(tag, "content");
          if (name && content && detail::to_lower(*name) == "description") {
            text += *content;
            text += ' ';
          }
        }
      },
      [&](std::string_view t) { text += t; });
  append_tokens(detail::decode_entities(text), stop, tokens);
  return tokens;
}

// ---------------------------------------------------------------------------
// Porter stemmer. Follows the reference C implementation, including its two
// departures from the published rules ("bli" -> "ble" and "logi" -> "log").

namespace detail {

class PorterStemmer {
 public:
  explicit PorterStemmer(std::string word) : b_(std::move(word)), k_(static_cast<int>(b_.size()) - 1) {}

  std::string run() {
    if (k_ <= 1) return b_;
    step1ab();
    if (k_ > 0) {
      step1c();
      step2();
      step3();
      step4();
      step5();
    }
    return b_.substr(0, static_cast<std::size_t>(k_ + 1));
  }

 private:
  bool cons(int i) const {
    switch (b_[i]) {
      case 'a': case 'e': case 'i': case 'o': case 'u': return false;
      case 'y': return i == 0 ? true : !cons(i - 1);
      default: return true;
    }
  }

  // Number of VC sequences in b[0..j].
  int m() const {
    int n = 0, i = 0;
    while (true) {
      if (i > j_) return n;
      if (!cons(i)) break;
      ++i;
    }
    ++i;
    while (true) {
      while (true) {
        if (i > j_) return n;
        if (cons(i)) break;
        ++i;
      }
      ++i;
      ++n;
      while (true) {
        if (i > j_) return n;
        if (!cons(i)) break;
        ++i;
      }
      ++i;
    }
  }

  bool vowel_in_stem() const {
    for (int i = 0; i <= j_; ++i)
      if (!cons(i)) return true;
    return false;
  }

  bool double_c(int j) const { return j >= 1 && b_[j] == b_[j - 1] && cons(j); }

  bool cvc(int i) const {
    if (i < 2 || !cons(i) || cons(i - 1) || !cons(i - 2)) return false;
    char ch = b_[i];
    return ch != 'w' && ch != 'x' && ch != 'y';
  }

  bool ends(std::string_view s) {
    int len = static_cast<int>(s.size());
    if (len > k_ + 1) return false;
    if (s.back() != b_[k_]) return false;
    if (std::string_view(b_).substr(static_cast<std::size_t>(k_ + 1 - len), s.size()) != s) return false;
    j_ = k_ - len;
    return true;
  }

  void set_to(std::string_view s) {
    b_.replace(static_cast<std::size_t>(j_ + 1), static_cast<std::size_t>(k_ - j_), s);
    k_ = j_ + static_cast<int>(s.size());
    b_.resize(static_cast<std::size_t>(k_ + 1));
  }

  void r(std::string_view s) {
    if (m() > 0) set_to(s);
  }

  void step1ab() {
    if (b_[k_] == 's') {
      if (ends("sses")) k_ -= 2;
      else if (ends("ies")) set_to("i");
      else if (b_[k_ - 1] != 's') --k_;
      b_.resize(static_cast<std::size_t>(k_ + 1));
    }
    if (ends("eed")) {
      if (m() > 0) --k_;
    } else if ((ends("ed") || ends("ing")) && vowel_in_stem()) {
      k_ = j_;
      b_.resize(static_cast<std::size_t>(k_ + 1));
      if (ends("at")) set_to("ate");
      else if (ends("bl")) set_to("ble");
      else if (ends("iz")) set_to("ize");
      else if (double_c(k_)) {
        --k_;
        char ch = b_[k_];
        if (ch == 'l' || ch == 's' || ch == 'z') ++k_;
      } else if (j_ = k_, m() == 1 && cvc(k_)) {
        set_to("e");
      }
    }
    b_.resize(static_cast<std::size_t>(k_ + 1));
  }

  void step1c() {
    if (ends("y") && vowel_in_stem()) b_[k_] = 'i';
  }

  void step2() {
    if (k_ < 1) return;
    switch (b_[k_ - 1]) {
      case 'a':
        if (ends("ational")) { r("ate"); break; }
        if (ends("tional")) { r("tion"); break; }
        break;
      case 'c':
        if (ends("enci")) { r("ence"); break; }
        if (ends("anci")) { r("ance"); break; }
        break;
      case 'e':
        if (ends("izer")) { r("ize"); break; }
        break;
      case 'l':
        if (ends("bli")) { r("ble"); break; }
        if (ends("alli")) { r("al"); break; }
        if (ends("entli")) { r("ent"); break; }
        if (ends("eli")) { r("e"); break; }
        if (ends("ousli")) { r("ous"); break; }
        break;
      case 'o':
        if (ends("ization")) { r("ize"); break; }
        if (ends("ation")) { r("ate"); break; }
        if (ends("ator")) { r("ate"); break; }
        break;
      case 's':
        if (ends("alism")) { r("al"); break; }
        if (ends("iveness")) { r("ive"); break; }
        if (ends("fulness")) { r("ful"); break; }
        if (ends("ousness")) { r("ous"); break; }
        break;
      case 't':
        if (ends("aliti")) { r("al"); break; }
        if (ends("iviti")) { r("ive"); break; }
        if (ends("biliti")) { r("ble"); break; }
        break;
      case 'g':
        if (ends("logi")) { r("log"); break; }
        break;
      default: break;
    }
  }

  void step3() {
    switch (b_[k_]) {
      case 'e':
        if (ends("icate")) { r("ic"); break; }
        if (ends("ative")) { r(""); break; }
        if (ends("alize")) { r("al"); break; }
        break;
      case 'i':
        if (ends("iciti")) { r("ic"); break; }
        break;
      case 'l':
        if (ends("ical")) { r("ic"); break; }
        if (ends("ful")) { r(""); break; }
        break;
      case 's':
        if (ends("ness")) { r(""); break; }
        break;
      default: break;
    }
  }

  void step4() {
    if (k_ < 1) return;
    switch (b_[k_ - 1]) {
      case 'a':
        if (ends("al")) break;
        return;
      case 'c':
        if (ends("ance")) break;
        if (ends("ence")) break;
        return;
      case 'e':
        if (ends("er")) break;
        return;
      case 'i':
        if (ends("ic")) break;
        return;
      case 'l':
        if (ends("able")) break;
        if (ends("ible")) break;
        return;
      case 'n':
        if (ends("ant")) break;
        if (ends("ement")) break;
        if (ends("ment")) break;
        if (ends("ent")) break;
        return;
      case 'o':
        if (ends("ion") && j_ >= 0 && (b_[j_] == 's' || b_[j_] == 't')) break;
        if (ends("ou")) break;
        return;
      case 's':
        if (ends("ism")) break;
        return;
      case 't':
        if (ends("ate")) break;
        if (ends("iti")) break;
        return;
      case 'u':
        if (ends("ous")) break;
        return;
      case 'v':
        if (ends("ive")) break;
        return;
      case 'z':
        if (ends("ize")) break;
        return;
      default:
        return;
    }
    if (m() > 1) {
      k_ = j_;
      b_.resize(static_cast<std::size_t>(k_ + 1));
    }
  }

  void step5() {
    j_ = k_;
    if (b_[k_] == 'e') {
      int a = m();
      if (a > 1 || (a == 1 && !cvc(k_ - 1))) --k_;
    }
    if (b_[k_] == 'l' && double_c(k_) && m() > 1) --k_;
    b_.resize(static_cast<std::size_t>(k_ + 1));
  }

  std::string b_;
  int k_;
  int j_ = 0;
};

}  // namespace detail

inline std::string porter_stem(std::string_view token) { return detail::PorterStemmer(std::string(token)).run(); }

/// tf(k, p) over stemmed tokens. The counts always sum to tokens.size().
inline TermCounts term_counts(const TokenStream& tokens) {
  TermCounts counts;
  for (const auto& t : tokens) ++counts[porter_stem(t)];
  return counts;
}

}  // namespace linktopo
