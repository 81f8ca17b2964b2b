#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "linktopo/corpus.hpp"
#include "linktopo/error.hpp"
#include "linktopo/lexparse.hpp"
#include "linktopo/url.hpp"
#include "linktopo/util.hpp"

namespace linktopo {

struct CrawlConfig {
  int max_depth = 3;
  std::size_t max_pages_at_max_depth = 10000;
  std::chrono::milliseconds per_page_timeout{60000};
  std::size_t min_seed_links = 5;
  std::size_t max_seed_links = 10;
  std::optional<std::string> domain_filter;
  std::chrono::milliseconds politeness_delay{1000};
  std::size_t max_concurrent_fetches = 1;

  void validate() const {
    if (max_depth < 1) throw Error(ErrorKind::InvalidArgument, "max_depth must be >= 1");
    if (min_seed_links > max_seed_links) throw Error(ErrorKind::InvalidArgument, "min_seed_links > max_seed_links");
    if (per_page_timeout.count() <= 0) throw Error(ErrorKind::InvalidArgument, "timeout must be positive");
    if (politeness_delay.count() < 0) throw Error(ErrorKind::InvalidArgument, "politeness delay must be >= 0");
    if (max_concurrent_fetches < 1) throw Error(ErrorKind::InvalidArgument, "need at least one fetch slot");
  }
};

struct FetchResult {
  FetchStatus status;
  std::string body;
  std::string final_url;  // after redirects; equals the requested URL otherwise
  Timestamp fetched_at{};
};

/// Retrieves one document. Implementations must return within `timeout`
/// and be safe to call from several threads.
class Fetcher {
 public:
  virtual ~Fetcher() = default;
  virtual FetchResult fetch(const std::string& url, std::chrono::milliseconds timeout) = 0;
};

/// Serves a directory corpus described by manifest.json (URL -> relative
/// file path). Unknown URLs are 404s; timestamps are the epoch so repeated
/// crawls are byte-identical.
class OfflineFetcher : public Fetcher {
 public:
  explicit OfflineFetcher(std::filesystem::path root) : root_(std::move(root)) {
    std::ifstream in(root_ / "manifest.json");
    if (!in) throw Error(ErrorKind::Io, "no manifest.json under " + root_.string());
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::StoreFormat, "manifest: " + std::string(e.what()));
    }
    for (const auto& [url, path] : j.items()) manifest_[url] = path.get<std::string>();
  }

  FetchResult fetch(const std::string& url, std::chrono::milliseconds) override {
    FetchResult r;
    r.final_url = url;
    auto it = manifest_.find(url);
    if (it == manifest_.end()) {
      r.status = FetchStatus::http_error(404);
      return r;
    }
    std::ifstream in(root_ / it->second, std::ios::binary);
    if (!in) {
      r.status = FetchStatus::http_error(404);
      return r;
    }
    std::stringstream ss;
    ss << in.rdbuf();
    r.body = ss.str();
    return r;
  }

  std::size_t size() const { return manifest_.size(); }

 private:
  std::filesystem::path root_;
  std::unordered_map<std::string, std::string> manifest_;
};

/// Keeps successful bodies on disk keyed by URL hash, so interrupted live
/// crawls can be resumed without refetching.
class CachingFetcher : public Fetcher {
 public:
  CachingFetcher(Fetcher& inner, std::filesystem::path dir) : inner_(inner), dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  FetchResult fetch(const std::string& url, std::chrono::milliseconds timeout) override {
    auto path = dir_ / (hex64(fnv1a64(url)) + ".json");
    if (std::ifstream in(path); in) {
      try {
        auto j = nlohmann::json::parse(in);
        if (j.at("url") == url) {
          FetchResult r;
          r.status = FetchStatus::ok();
          r.body = j.at("body").get<std::string>();
          r.final_url = j.at("final_url").get<std::string>();
          r.fetched_at = parse_iso8601(j.at("fetched_at").get<std::string>());
          return r;
        }
      } catch (const std::exception&) {
      }
    }
    auto r = inner_.fetch(url, timeout);
    if (r.status.is_ok()) {
      nlohmann::json j{{"url", url}, {"final_url", r.final_url}, {"fetched_at", format_iso8601(r.fetched_at)},
                       {"body", r.body}};
      std::ofstream out(path, std::ios::binary);
      out << j.dump();
    }
    return r;
  }

 private:
  Fetcher& inner_;
  std::filesystem::path dir_;
};

// ---------------------------------------------------------------------------

/// Links on a different host than the source, in document order, optionally
/// restricted to one top-level domain.
inline std::vector<std::string> external_links(const std::string& source_url, const std::vector<std::string>& links,
                                               const std::optional<std::string>& domain = std::nullopt) {
  auto source_host = url_host(source_url);
  std::vector<std::string> out;
  for (const auto& l : links) {
    auto host = url_host(l);
    if (host.empty() || host == source_host) continue;
    if (domain && url_tld(l) != *domain) continue;
    out.push_back(l);
  }
  return out;
}

/// Applies the seed rules: at least min_seed_links external links, and only
/// the first max_seed_links of them form the depth-1 frontier.
inline TopicSeed validate_seed(TopicSeed seed, const std::vector<std::string>& source_links,
                               const CrawlConfig& config = {}) {
  if (source_links.size() < config.min_seed_links)
    throw Error(ErrorKind::TooFewLinks, "topic " + seed.topic_id + " has " + std::to_string(source_links.size()) +
                                            " external links, need " + std::to_string(config.min_seed_links));
  auto n = std::min(config.max_seed_links, source_links.size());
  seed.crawl_relevant_set.assign(source_links.begin(), source_links.begin() + static_cast<std::ptrdiff_t>(n));
  std::unordered_set<std::string> full(seed.full_relevant_set.begin(), seed.full_relevant_set.end());
  if (seed.full_relevant_set.empty()) {
    seed.full_relevant_set = source_links;
  } else {
    for (const auto& u : seed.crawl_relevant_set)
      if (!full.count(u)) seed.full_relevant_set.push_back(u);
  }
  return seed;
}

namespace detail {

inline PageRecord make_record(const std::string& requested, const std::string& topic, int depth, FetchResult&& fr,
                              const StopList& stop) {
  PageRecord r;
  r.topic_id = topic;
  r.depth = depth;
  r.fetched_at = fr.fetched_at;
  r.fetch_status = fr.status;
  r.url = requested;
  if (!fr.final_url.empty() && fr.final_url != requested) {
    try {
      r.url = normalize_url(fr.final_url, requested);
      if (r.url != requested) r.redirected_from = requested;
    } catch (const Error&) {
    }
  }
  if (!r.fetch_status.is_ok()) return r;
  auto links = extract_links(fr.body, r.url);
  for (auto& l : links)
    if (l != r.url) r.outlinks.push_back(std::move(l));
  r.term_counts = term_counts(tokenize(fr.body, stop));
  return r;
}

// Fetches and parses `urls` with up to `jobs` workers; results keep the
// order of `urls` regardless of completion order.
inline std::vector<PageRecord> fetch_layer(const std::vector<std::string>& urls, const std::string& topic, int depth,
                                           const CrawlConfig& config, Fetcher& fetcher, const StopList& stop) {
  std::vector<PageRecord> out(urls.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < urls.size(); i = next++)
      out[i] = make_record(urls[i], topic, depth, fetcher.fetch(urls[i], config.per_page_timeout), stop);
  };
  auto jobs = std::min(config.max_concurrent_fetches, urls.size());
  if (jobs <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  return out;
}

}  // namespace detail

using RecordSink = std::function<void(const PageRecord&)>;

struct CrawlOptions {
  const StopList* stop_list = nullptr;
  RecordSink sink;  // receives records layer by layer, in output order
};

namespace detail {

inline PageRecord fetch_source(const std::string& source_url, const TopicSeed& seed, const CrawlConfig& config,
                               Fetcher& fetcher, const StopList& stop) {
  auto source = make_record(source_url, seed.topic_id, 0, fetcher.fetch(source_url, config.per_page_timeout), stop);
  if (!source.fetch_status.is_ok())
    throw Error(ErrorKind::SourceUnreachable, seed.source_url + ": " + source.fetch_status.str());
  return source;
}

inline std::vector<PageRecord> bfs_from(const TopicSeed& seed, PageRecord source, const CrawlConfig& config,
                                        Fetcher& fetcher, const CrawlOptions& options) {
  const auto& stop = options.stop_list ? *options.stop_list : StopList::builtin();
  auto source_url = normalize_url(seed.source_url, seed.source_url);
  auto directory_host = url_host(source_url);

  std::vector<PageRecord> records;
  std::unordered_set<std::string> seen{source_url, source.url};
  auto emit = [&](PageRecord&& r) {
    if (options.sink) options.sink(r);
    records.push_back(std::move(r));
  };
  emit(std::move(source));

  auto allowed = [&](const std::string& url) {
    auto host = url_host(url);
    if (host.empty() || host == directory_host) return false;
    return !config.domain_filter || url_tld(url) == *config.domain_filter;
  };

  std::vector<std::string> layer;
  for (const auto& u : seed.crawl_relevant_set) {
    auto url = normalize_url(u, source_url);
    if (allowed(url) && seen.insert(url).second) layer.push_back(url);
  }

  for (int depth = 1; depth <= config.max_depth && !layer.empty(); ++depth) {
    if (depth == config.max_depth && layer.size() > config.max_pages_at_max_depth)
      layer.resize(config.max_pages_at_max_depth);
    auto fetched = detail::fetch_layer(layer, seed.topic_id, depth, config, fetcher, stop);

    std::vector<std::string> next;
    for (auto& r : fetched) {
      // A redirect can land on a page we already hold.
      if (!r.redirected_from.empty() && !seen.insert(r.url).second) continue;
      if (depth < config.max_depth && r.fetch_status.is_ok()) {
        for (const auto& l : r.outlinks)
          if (allowed(l) && seen.insert(l).second) next.push_back(l);
      }
      emit(std::move(r));
    }
    layer = std::move(next);
  }
  return records;
}

}  // namespace detail

/// Layer-synchronous breadth-first crawl from a validated seed. The depth-1
/// frontier is exactly the seed's crawl relevant set; later layers are the
/// unseen outlinks of the previous layer in discovery order. Links back to
/// the source's host are never followed. Every fetch attempt at max_depth
/// counts toward max_pages_at_max_depth.
inline std::vector<PageRecord> bfs_crawl(const TopicSeed& seed, const CrawlConfig& config, Fetcher& fetcher,
                                         const CrawlOptions& options = {}) {
  config.validate();
  const auto& stop = options.stop_list ? *options.stop_list : StopList::builtin();
  auto source_url = normalize_url(seed.source_url, seed.source_url);
  return detail::bfs_from(seed, detail::fetch_source(source_url, seed, config, fetcher, stop), config, fetcher,
                          options);
}

struct TopicCrawlResult {
  TopicSeed seed;  // with the validated crawl relevant set
  std::vector<PageRecord> records;
};

/// Fetches the source, derives and validates its external links (only those
/// in `config.domain_filter` when set), then runs bfs_crawl.
inline TopicCrawlResult crawl_topic(const TopicSeed& seed, const CrawlConfig& config, Fetcher& fetcher,
                                    const CrawlOptions& options = {}) {
  config.validate();
  const auto& stop = options.stop_list ? *options.stop_list : StopList::builtin();
  auto source_url = normalize_url(seed.source_url, seed.source_url);
  auto source = detail::fetch_source(source_url, seed, config, fetcher, stop);
  auto links = external_links(source.url, source.outlinks, config.domain_filter);
  TopicCrawlResult out;
  out.seed = validate_seed(seed, links, config);
  out.seed.source_url = source_url;
  out.records = detail::bfs_from(out.seed, std::move(source), config, fetcher, options);
  return out;
}

/// bfs_crawl restricted to servers in one top-level domain.
inline TopicCrawlResult domain_crawl(const TopicSeed& seed, const std::string& domain, CrawlConfig config,
                                     Fetcher& fetcher, const CrawlOptions& options = {}) {
  config.domain_filter = domain;
  return crawl_topic(seed, config, fetcher, options);
}

}  // namespace linktopo
