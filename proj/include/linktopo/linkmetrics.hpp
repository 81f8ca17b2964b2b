#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "linktopo/corpus.hpp"
#include "linktopo/error.hpp"
#include "linktopo/vectorspace.hpp"

namespace linktopo {

struct MetricPoint {
  std::string topic_id;
  int d = 0;
  std::size_t n_pages = 0;
  double delta = 0;  // mean link distance
  double sigma = 0;  // mean cosine similarity to the source
  double R = 0;      // relevance posterior; 1 at d = 0 by convention
  double G = 0;      // generality (prior)
  std::optional<double> lambda;
};

/// Mean link distance as an exact fraction: numerator / N_d.
inline std::pair<std::uint64_t, std::uint64_t> mean_link_distance_fraction(const CrawlSet& crawl, int d) {
  if (d < 0 || d > crawl.max_depth())
    throw Error(ErrorKind::Precondition, "depth " + std::to_string(d) + " beyond crawl depth");
  const auto& n = crawl.cumulative_counts();
  std::uint64_t num = 0;
  for (int i = 1; i <= d; ++i) num += static_cast<std::uint64_t>(i) * (n[i] - n[i - 1]);
  return {num, n[static_cast<std::size_t>(d)]};
}

/// delta(q, d) = (1/N_d) * sum_{i=1..d} i * (N_i - N_{i-1}).
inline double mean_link_distance(const CrawlSet& crawl, int d) {
  auto [num, den] = mean_link_distance_fraction(crawl, d);
  return static_cast<double>(num) / static_cast<double>(den);
}

/// sigma(q, d): mean similarity of the source to every page of P_d, all
/// weighted with depth-d idf (the source included).
inline double mean_similarity(const CrawlSet& crawl, int d) {
  if (d < 0 || d > crawl.max_depth())
    throw Error(ErrorKind::Precondition, "depth " + std::to_string(d) + " beyond crawl depth");
  const auto n = crawl.count(d);
  auto df = [&](const std::string& k) { return crawl.doc_freq(k, d); };
  auto source = weigh(crawl.source().term_counts, n, df);
  double sum = 0;
  for (const auto& p : crawl.pages())
    if (p.depth <= d) sum += cosine_similarity(source, weigh(p.term_counts, n, df));
  return sum / static_cast<double>(n);
}

/// R_q(d) = |P_d ∩ relevant| / N_d.
inline double relevance_posterior(const CrawlSet& crawl, const std::unordered_set<std::string>& relevant, int d) {
  if (d < 1) throw Error(ErrorKind::Precondition, "relevance posterior needs d >= 1");
  if (d > crawl.max_depth()) throw Error(ErrorKind::Precondition, "depth beyond crawl depth");
  std::size_t hits = 0;
  for (const auto& p : crawl.pages())
    if (p.depth <= d && relevant.count(p.url)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(crawl.count(d));
}

/// Counts against the seed's crawl relevant set Q_q.
inline double relevance_posterior(const CrawlSet& crawl, const TopicSeed& seed, int d) {
  std::unordered_set<std::string> q(seed.crawl_relevant_set.begin(), seed.crawl_relevant_set.end());
  return relevance_posterior(crawl, q, d);
}

/// G_q ≈ |Q'_q| / |union of all Q'|.
inline double generality(const std::vector<std::string>& relevant, const std::vector<std::vector<std::string>>& universe) {
  std::unordered_set<std::string> all;
  for (const auto& set : universe) all.insert(set.begin(), set.end());
  all.insert(relevant.begin(), relevant.end());
  if (all.empty()) throw Error(ErrorKind::InsufficientData, "empty relevant-set universe");
  std::unordered_set<std::string> own(relevant.begin(), relevant.end());
  return static_cast<double>(own.size()) / static_cast<double>(all.size());
}

inline double generality(const TopicSeed& seed, const std::vector<TopicSeed>& all_seeds) {
  std::vector<std::vector<std::string>> universe;
  universe.reserve(all_seeds.size());
  for (const auto& s : all_seeds) universe.push_back(s.full_relevant_set);
  return generality(seed.full_relevant_set, universe);
}

inline double likelihood_factor(double R, double G) {
  if (!(G > 0)) throw Error(ErrorKind::InsufficientData, "generality must be positive");
  return R / G;
}

/// One MetricPoint per depth 0..max_depth with delta, sigma, R, G and
/// lambda filled in; lambda(q, 0) = 1/G.
inline std::vector<MetricPoint> metric_series(const CrawlSet& crawl, const std::unordered_set<std::string>& relevant,
                                              double G) {
  std::vector<MetricPoint> out;
  for (int d = 0; d <= crawl.max_depth(); ++d) {
    MetricPoint m;
    m.topic_id = crawl.topic_id();
    m.d = d;
    m.n_pages = crawl.count(d);
    m.delta = mean_link_distance(crawl, d);
    m.sigma = mean_similarity(crawl, d);
    m.R = d == 0 ? 1.0 : relevance_posterior(crawl, relevant, d);
    m.G = G;
    m.lambda = likelihood_factor(m.R, G);
    out.push_back(std::move(m));
  }
  return out;
}

inline std::vector<MetricPoint> likelihood_series(const CrawlSet& crawl, const TopicSeed& seed,
                                                  const std::vector<TopicSeed>& all_seeds) {
  std::unordered_set<std::string> q(seed.crawl_relevant_set.begin(), seed.crawl_relevant_set.end());
  return metric_series(crawl, q, generality(seed, all_seeds));
}

// ---------------------------------------------------------------------------
// Random crawler

/// eta* = G / (1 + G - R1), the fixed point of
/// eta(t+1) = eta(t) * R1 + (1 - eta(t)) * G.
inline double stationary_hit_rate(double G, double R1) {
  if (!(G > 0 && G <= 1) || !(R1 >= 0 && R1 <= 1))
    throw Error(ErrorKind::DegenerateParameters, "need 0 < G <= 1 and 0 <= R1 <= 1");
  double denom = 1.0 + G - R1;
  if (!(denom > 0)) throw Error(ErrorKind::DegenerateParameters, "1 + G - R1 must be positive");
  return G / denom;
}

inline double hit_rate_step(double eta, double G, double R1) { return eta * R1 + (1.0 - eta) * G; }

struct SimulationResult {
  double rate = 0;
  double stderr_ = 0;  // batch-means standard error
  std::size_t steps = 0;
  std::size_t burn_in = 0;
};

namespace detail {

inline SimulationResult summarize_hits(const std::vector<std::uint8_t>& hits, std::size_t burn_in) {
  SimulationResult r;
  r.burn_in = burn_in;
  r.steps = hits.size() - burn_in;
  constexpr std::size_t kBatches = 50;
  std::size_t batch = r.steps / kBatches;
  std::size_t total = 0;
  for (std::size_t i = burn_in; i < hits.size(); ++i) total += hits[i];
  r.rate = static_cast<double>(total) / static_cast<double>(r.steps);
  if (batch == 0) return r;
  std::vector<double> means;
  for (std::size_t b = 0; b < kBatches; ++b) {
    std::size_t s = 0;
    for (std::size_t i = 0; i < batch; ++i) s += hits[burn_in + b * batch + i];
    means.push_back(static_cast<double>(s) / static_cast<double>(batch));
  }
  double mu = 0;
  for (double m : means) mu += m;
  mu /= kBatches;
  double ss = 0;
  for (double m : means) ss += (m - mu) * (m - mu);
  r.stderr_ = std::sqrt(ss / (kBatches - 1)) / std::sqrt(static_cast<double>(kBatches));
  return r;
}

}  // namespace detail

/// Two-state walker: the next page is relevant with probability R1 when the
/// current one is, otherwise with probability G. Returns the fraction of
/// relevant hits after the burn-in prefix.
inline SimulationResult simulate_random_crawler(double R1, double G, std::size_t steps, std::uint64_t rng_seed,
                                                bool start_relevant = true, std::size_t burn_in = 1000) {
  if (!(G >= 0 && G <= 1) || !(R1 >= 0 && R1 <= 1))
    throw Error(ErrorKind::InvalidArgument, "probabilities must lie in [0, 1]");
  if (steps <= burn_in) throw Error(ErrorKind::InvalidArgument, "steps must exceed the burn-in");
  std::mt19937_64 rng(rng_seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::uint8_t> hits(steps);
  bool relevant = start_relevant;
  for (std::size_t t = 0; t < steps; ++t) {
    relevant = u(rng) < (relevant ? R1 : G);
    hits[t] = relevant;
  }
  return detail::summarize_hits(hits, burn_in);
}

/// Adjacency-list graph over dense page ids.
struct LinkGraph {
  std::vector<std::vector<std::size_t>> out;
  std::size_t size() const { return out.size(); }
};

/// Walks the literal link graph from `start`, following a uniformly random
/// outlink each step (jumping back to `start` at dead ends or with
/// probability `restart`), and reports the fraction of relevant pages hit.
inline SimulationResult simulate_graph_walk(const LinkGraph& graph, const std::vector<bool>& relevant, std::size_t start,
                                            std::size_t steps, std::uint64_t rng_seed, double restart = 0.0,
                                            std::size_t burn_in = 1000) {
  if (relevant.size() != graph.size() || start >= graph.size())
    throw Error(ErrorKind::InvalidArgument, "labels/start do not match the graph");
  if (steps <= burn_in) throw Error(ErrorKind::InvalidArgument, "steps must exceed the burn-in");
  std::mt19937_64 rng(rng_seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::uint8_t> hits(steps);
  std::size_t at = start;
  for (std::size_t t = 0; t < steps; ++t) {
    const auto& next = graph.out[at];
    if (next.empty() || u(rng) < restart) {
      at = start;
    } else {
      at = next[std::uniform_int_distribution<std::size_t>(0, next.size() - 1)(rng)];
    }
    hits[t] = relevant[at];
  }
  return detail::summarize_hits(hits, burn_in);
}

}  // namespace linktopo
