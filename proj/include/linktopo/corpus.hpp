#pragma once

#include <cstddef>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "linktopo/error.hpp"
#include "linktopo/util.hpp"

namespace linktopo {

using TermCounts = std::map<std::string, int>;

struct FetchStatus {
  enum class Kind { Ok, Timeout, HttpError, ParseError, Skipped };
  Kind kind = Kind::Ok;
  int code = 0;  // HTTP status for HttpError; 0 means transport failure

  static FetchStatus ok() { return {}; }
  static FetchStatus timeout() { return {Kind::Timeout, 0}; }
  static FetchStatus http_error(int code) { return {Kind::HttpError, code}; }
  static FetchStatus parse_error() { return {Kind::ParseError, 0}; }
  static FetchStatus skipped() { return {Kind::Skipped, 0}; }

  bool is_ok() const { return kind == Kind::Ok; }

  std::string str() const {
    switch (kind) {
      case Kind::Ok: return "ok";
      case Kind::Timeout: return "timeout";
      case Kind::HttpError: return "http-error(" + std::to_string(code) + ")";
      case Kind::ParseError: return "parse-error";
      case Kind::Skipped: return "skipped";
    }
    return "?";
  }

  static FetchStatus parse(const std::string& s) {
    if (s == "ok") return ok();
    if (s == "timeout") return timeout();
    if (s == "parse-error") return parse_error();
    if (s == "skipped") return skipped();
    if (s.rfind("http-error(", 0) == 0 && s.size() > 12 && s.back() == ')') {
      try {
        return http_error(std::stoi(s.substr(11, s.size() - 12)));
      } catch (const std::exception&) {
      }
    }
    throw Error(ErrorKind::StoreFormat, "unknown fetch_status '" + s + "'");
  }

  friend bool operator==(const FetchStatus&, const FetchStatus&) = default;
};

/// One fetched page.
struct PageRecord {
  std::string url;
  std::string topic_id;
  int depth = 0;
  std::vector<std::string> outlinks;
  TermCounts term_counts;
  FetchStatus fetch_status;
  Timestamp fetched_at{};
  std::string redirected_from;  // original URL when the fetch was redirected

  friend bool operator==(const PageRecord&, const PageRecord&) = default;
};

struct TopicSeed {
  std::string topic_id;
  std::string label;
  std::string source_url;
  std::vector<std::string> crawl_relevant_set;  // Q_q: the depth-1 frontier
  std::vector<std::string> full_relevant_set;   // Q'_q: every editor-listed link

  friend bool operator==(const TopicSeed&, const TopicSeed&) = default;
};

/// Throws Precondition when the relevant-set invariants do not hold.
inline void check_seed(const TopicSeed& seed, std::size_t min_links = 5, std::size_t max_links = 10) {
  auto n = seed.crawl_relevant_set.size();
  if (n < min_links || n > max_links)
    throw Error(ErrorKind::Precondition, "seed " + seed.topic_id + " has " + std::to_string(n) +
                                             " crawl links, expected " + std::to_string(min_links) + ".." +
                                             std::to_string(max_links));
  std::unordered_set<std::string> full(seed.full_relevant_set.begin(), seed.full_relevant_set.end());
  for (const auto& u : seed.crawl_relevant_set)
    if (!full.count(u))
      throw Error(ErrorKind::Precondition, "seed " + seed.topic_id + ": " + u + " not in full_relevant_set");
}

/// Cumulative page sets P_0 ⊆ P_1 ⊆ ... ⊆ P_d of one topic crawl, restricted
/// to successful fetches.
class CrawlSet {
 public:
  const std::string& topic_id() const { return topic_id_; }
  int max_depth() const { return max_depth_; }

  /// Successfully fetched pages in input order.
  const std::vector<PageRecord>& pages() const { return pages_; }
  const PageRecord& source() const { return pages_[source_index_]; }

  /// N_i for i = 0..max_depth.
  const std::vector<std::size_t>& cumulative_counts() const { return cumulative_; }
  std::size_t count(int d) const { return cumulative_.at(static_cast<std::size_t>(d)); }

  /// N_d(k); zero when k does not occur within distance d.
  std::size_t doc_freq(const std::string& term, int d) const {
    const auto& df = doc_freq_.at(static_cast<std::size_t>(d));
    auto it = df.find(term);
    return it == df.end() ? 0 : it->second;
  }
  const std::unordered_map<std::string, std::size_t>& doc_freq_table(int d) const {
    return doc_freq_.at(static_cast<std::size_t>(d));
  }

  const PageRecord* find(const std::string& url) const {
    auto it = index_.find(url);
    return it == index_.end() ? nullptr : &pages_[it->second];
  }

  std::size_t excluded_failures() const { return failures_; }

 private:
  friend CrawlSet build_crawl_set(const std::vector<PageRecord>& records, int d);

  std::string topic_id_;
  int max_depth_ = 0;
  std::vector<PageRecord> pages_;
  std::size_t source_index_ = 0;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::size_t> cumulative_;
  std::vector<std::unordered_map<std::string, std::size_t>> doc_freq_;
  std::size_t failures_ = 0;
};

/// Failed fetches are dropped from all counts but reported via
/// excluded_failures().
inline CrawlSet build_crawl_set(const std::vector<PageRecord>& records, int d) {
  if (d < 0) throw Error(ErrorKind::MalformedCrawl, "negative depth");
  if (records.empty()) throw Error(ErrorKind::MalformedCrawl, "no records");
  CrawlSet cs;
  cs.topic_id_ = records.front().topic_id;
  cs.max_depth_ = d;

  std::size_t sources = 0;
  std::unordered_set<std::string> seen;
  for (const auto& r : records) {
    if (r.topic_id != cs.topic_id_)
      throw Error(ErrorKind::MalformedCrawl, "mixed topics '" + cs.topic_id_ + "' and '" + r.topic_id + "'");
    if (r.depth < 0 || r.depth > d)
      throw Error(ErrorKind::MalformedCrawl, r.url + " has depth " + std::to_string(r.depth));
    if (!seen.insert(r.url).second) throw Error(ErrorKind::MalformedCrawl, "duplicate url " + r.url);
    if (r.depth == 0) {
      ++sources;
      if (!r.fetch_status.is_ok()) throw Error(ErrorKind::MalformedCrawl, "source page was not fetched");
    }
  }
  if (sources != 1)
    throw Error(ErrorKind::MalformedCrawl, std::to_string(sources) + " depth-0 records, expected exactly 1");

  std::vector<std::size_t> layer(static_cast<std::size_t>(d) + 1, 0);
  std::vector<std::unordered_map<std::string, std::size_t>> layer_df(layer.size());
  for (const auto& r : records) {
    if (!r.fetch_status.is_ok()) {
      ++cs.failures_;
      continue;
    }
    auto i = static_cast<std::size_t>(r.depth);
    if (r.depth == 0) cs.source_index_ = cs.pages_.size();
    cs.index_.emplace(r.url, cs.pages_.size());
    cs.pages_.push_back(r);
    ++layer[i];
    for (const auto& [term, count] : r.term_counts) ++layer_df[i][term];
  }

  cs.cumulative_.resize(layer.size());
  cs.doc_freq_.resize(layer.size());
  std::size_t running = 0;
  for (std::size_t i = 0; i < layer.size(); ++i) {
    running += layer[i];
    cs.cumulative_[i] = running;
    cs.doc_freq_[i] = i == 0 ? layer_df[0] : cs.doc_freq_[i - 1];
    if (i > 0)
      for (const auto& [term, n] : layer_df[i]) cs.doc_freq_[i][term] += n;
  }
  return cs;
}

// ---------------------------------------------------------------------------
// JSON Lines crawl store and seeds file

inline nlohmann::ordered_json to_json(const PageRecord& r) {
  nlohmann::ordered_json j;
  j["url"] = r.url;
  j["topic_id"] = r.topic_id;
  j["depth"] = r.depth;
  j["outlinks"] = r.outlinks;
  auto& tc = j["term_counts"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.term_counts) tc[k] = v;
  j["fetch_status"] = r.fetch_status.str();
  j["fetched_at"] = format_iso8601(r.fetched_at);
  if (!r.redirected_from.empty()) j["redirected_from"] = r.redirected_from;
  return j;
}

inline PageRecord page_record_from_json(const nlohmann::json& j) {
  PageRecord r;
  try {
    r.url = j.at("url").get<std::string>();
    r.topic_id = j.at("topic_id").get<std::string>();
    r.depth = j.at("depth").get<int>();
    r.outlinks = j.at("outlinks").get<std::vector<std::string>>();
    for (const auto& [k, v] : j.at("term_counts").items()) r.term_counts[k] = v.get<int>();
    r.fetch_status = FetchStatus::parse(j.at("fetch_status").get<std::string>());
    r.fetched_at = parse_iso8601(j.at("fetched_at").get<std::string>());
    if (j.contains("redirected_from")) r.redirected_from = j.at("redirected_from").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::StoreFormat, e.what());
  }
  if (r.depth < 0) throw Error(ErrorKind::StoreFormat, "negative depth");
  for (const auto& [k, v] : r.term_counts)
    if (v < 1) throw Error(ErrorKind::StoreFormat, "term count < 1 for '" + k + "'");
  return r;
}

/// Appends records to a JSON Lines store. One writer per file; append() may
/// be called from several threads. Lines starting with '#' are comments.
class StoreWriter {
 public:
  explicit StoreWriter(const std::string& path) : out_(path, std::ios::app | std::ios::binary) {
    if (!out_) throw Error(ErrorKind::Io, "cannot open " + path + " for append");
  }

  void append(const PageRecord& r) {
    auto line = to_json(r).dump();
    std::lock_guard lock(mu_);
    out_ << line << '\n';
    out_.flush();
    if (!out_) throw Error(ErrorKind::Io, "write failed");
  }

  void comment(const std::string& text) {
    std::lock_guard lock(mu_);
    out_ << "# " << text << '\n';
    out_.flush();
  }

 private:
  std::mutex mu_;
  std::ofstream out_;
};

inline void store_append(const std::string& path, const std::vector<PageRecord>& records) {
  StoreWriter w(path);
  for (const auto& r : records) w.append(r);
}

struct StoreContents {
  std::vector<PageRecord> records;
  std::vector<std::string> warnings;
};

/// Loads a store. A malformed line is an error naming its line number, except
/// an unterminated final line (an interrupted append), which is dropped with
/// a warning.
inline StoreContents store_load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  StoreContents out;
  std::size_t pos = 0, line_no = 0;
  while (pos < data.size()) {
    ++line_no;
    auto nl = data.find('\n', pos);
    bool terminated = nl != std::string::npos;
    std::string line = data.substr(pos, terminated ? nl - pos : std::string::npos);
    pos = terminated ? nl + 1 : data.size();
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    try {
      out.records.push_back(page_record_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      if (!terminated) {
        out.warnings.push_back(path + ":" + std::to_string(line_no) + ": dropped truncated final line");
        break;
      }
      throw Error(ErrorKind::StoreFormat, path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline nlohmann::ordered_json to_json(const TopicSeed& s) {
  nlohmann::ordered_json j;
  j["topic_id"] = s.topic_id;
  j["label"] = s.label;
  j["source_url"] = s.source_url;
  j["crawl_relevant_set"] = s.crawl_relevant_set;
  j["full_relevant_set"] = s.full_relevant_set;
  return j;
}

inline TopicSeed topic_seed_from_json(const nlohmann::json& j) {
  try {
    TopicSeed s;
    s.topic_id = j.at("topic_id").get<std::string>();
    s.label = j.value("label", std::string{});
    s.source_url = j.at("source_url").get<std::string>();
    s.crawl_relevant_set = j.value("crawl_relevant_set", std::vector<std::string>{});
    s.full_relevant_set = j.value("full_relevant_set", std::vector<std::string>{});
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::StoreFormat, std::string("seed: ") + e.what());
  }
}

inline std::vector<TopicSeed> load_seeds(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::StoreFormat, path + ": " + e.what());
  }
  if (!j.is_array()) throw Error(ErrorKind::StoreFormat, path + ": expected a JSON array of seeds");
  std::vector<TopicSeed> seeds;
  for (const auto& item : j) seeds.push_back(topic_seed_from_json(item));
  return seeds;
}

inline void save_seeds(const std::string& path, const std::vector<TopicSeed>& seeds) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& s : seeds) j.push_back(to_json(s));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
  out << j.dump(2) << '\n';
}

/// Splits a mixed store into per-topic record lists, preserving order.
inline std::map<std::string, std::vector<PageRecord>> group_by_topic(const std::vector<PageRecord>& records) {
  std::map<std::string, std::vector<PageRecord>> out;
  for (const auto& r : records) out[r.topic_id].push_back(r);
  return out;
}

}  // namespace linktopo
