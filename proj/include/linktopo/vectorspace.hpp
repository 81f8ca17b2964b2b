#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "linktopo/corpus.hpp"
#include "linktopo/error.hpp"

namespace linktopo {

/// Sparse non-negative term-weight vector, sorted by term, with its
/// Euclidean norm cached. Zero weights are never stored.
class TermVector {
 public:
  using Entry = std::pair<std::string, double>;

  TermVector() = default;

  /// Entries need not be sorted; duplicate terms are summed.
  explicit TermVector(std::vector<Entry> entries) : entries_(std::move(entries)) {
    std::sort(entries_.begin(), entries_.end());
    std::vector<Entry> merged;
    for (auto& e : entries_) {
      if (e.second < 0 || !std::isfinite(e.second))
        throw Error(ErrorKind::InvalidArgument, "term weight must be finite and non-negative");
      if (!merged.empty() && merged.back().first == e.first) merged.back().second += e.second;
      else merged.push_back(std::move(e));
    }
    std::erase_if(merged, [](const Entry& e) { return e.second == 0.0; });
    entries_ = std::move(merged);
    double sq = 0;
    for (const auto& e : entries_) sq += e.second * e.second;
    norm_ = std::sqrt(sq);
  }

  const std::vector<Entry>& entries() const { return entries_; }
  double norm() const { return norm_; }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

  double weight(const std::string& term) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), term,
                               [](const Entry& e, const std::string& t) { return e.first < t; });
    return it != entries_.end() && it->first == term ? it->second : 0.0;
  }

  TermVector scaled(double c) const {
    std::vector<Entry> e = entries_;
    for (auto& x : e) x.second *= c;
    return TermVector(std::move(e));
  }

 private:
  std::vector<Entry> entries_;
  double norm_ = 0;
};

/// 1 + ln(N / N(k)), natural log, no smoothing beyond the leading 1.
inline double idf_value(std::size_t n_docs, std::size_t n_with_term) {
  if (n_with_term == 0 || n_with_term > n_docs)
    throw Error(ErrorKind::UndefinedTerm, "document frequency out of range");
  return 1.0 + std::log(static_cast<double>(n_docs) / static_cast<double>(n_with_term));
}

/// Depth-scoped idf(k, d, q) over the cumulative set P_d.
inline double idf(const std::string& term, int d, const CrawlSet& crawl) {
  auto df = crawl.doc_freq(term, d);
  if (df == 0) throw Error(ErrorKind::UndefinedTerm, "'" + term + "' does not occur within depth " + std::to_string(d));
  return idf_value(crawl.count(d), df);
}

/// tf * idf where idf comes from an arbitrary document-frequency source.
template <class DocFreq>
TermVector weigh(const TermCounts& tf, std::size_t n_docs, DocFreq&& df) {
  std::vector<TermVector::Entry> entries;
  entries.reserve(tf.size());
  for (const auto& [term, count] : tf) entries.emplace_back(term, count * idf_value(n_docs, df(term)));
  return TermVector(std::move(entries));
}

inline TermVector tfidf_vector(const PageRecord& page, int d, const CrawlSet& crawl) {
  const auto* member = crawl.find(page.url);
  if (!member || member->depth > d || d > crawl.max_depth())
    throw Error(ErrorKind::OutOfSet, page.url + " is not in P_" + std::to_string(d) + " of " + crawl.topic_id());
  return weigh(page.term_counts, crawl.count(d), [&](const std::string& k) { return crawl.doc_freq(k, d); });
}

/// Cosine of the angle between two weight vectors; 0 if either is empty.
inline double cosine_similarity(const TermVector& a, const TermVector& b) {
  if (a.norm() == 0.0 || b.norm() == 0.0) return 0.0;
  const auto& x = a.entries();
  const auto& y = b.entries();
  double dot = 0;
  std::size_t i = 0, j = 0;
  while (i < x.size() && j < y.size()) {
    int c = x[i].first.compare(y[j].first);
    if (c == 0) dot += x[i++].second * y[j++].second;
    else if (c < 0) ++i;
    else ++j;
  }
  double s = dot / (a.norm() * b.norm());
  return std::clamp(s, 0.0, 1.0);
}

struct NoiseLevel {
  double mean = 0;
  double stderr_ = 0;
  std::size_t pairs = 0;
  bool ordered_pairs = true;
};

struct TopicCrawl {
  TopicSeed seed;
  CrawlSet crawl;
};

/// Average similarity of q's source to the depth-1 pages of q', for one
/// ordered pair. Weights are computed over P_1(q') with q's source added to
/// the set, so every term of the source has a defined idf.
inline double cross_topic_similarity(const CrawlSet& query_topic, const CrawlSet& other) {
  const auto& src = query_topic.source();
  const std::size_t n = other.count(1) + 1;
  auto df = [&](const std::string& k) { return other.doc_freq(k, 1) + (src.term_counts.count(k) ? 1 : 0); };
  auto qv = weigh(src.term_counts, n, df);
  double sum = 0;
  std::size_t pages = 0;
  for (const auto& p : other.pages()) {
    if (p.depth > 1) continue;
    sum += cosine_similarity(qv, weigh(p.term_counts, n, df));
    ++pages;
  }
  return pages ? sum / static_cast<double>(pages) : 0.0;
}

/// Background similarity between unrelated topics: mean and standard error
/// over all ordered pairs (q, q'), q != q'.
inline NoiseLevel noise_level(const std::vector<TopicCrawl>& topics) {
  if (topics.size() < 2) throw Error(ErrorKind::InsufficientData, "noise level needs at least 2 topics");
  std::vector<double> values;
  values.reserve(topics.size() * (topics.size() - 1));
  for (std::size_t a = 0; a < topics.size(); ++a)
    for (std::size_t b = 0; b < topics.size(); ++b)
      if (a != b) values.push_back(cross_topic_similarity(topics[a].crawl, topics[b].crawl));
  NoiseLevel out;
  out.pairs = values.size();
  double sum = 0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  double ss = 0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.stderr_ = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) /
                                         std::sqrt(static_cast<double>(values.size()))
                                   : 0.0;
  return out;
}

}  // namespace linktopo
