#pragma once

// Crawl store -> metric points -> fits. Shared by the CLI and the synthetic
// self-check.

#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include "linktopo/corpus.hpp"
#include "linktopo/error.hpp"
#include "linktopo/fitting.hpp"
#include "linktopo/linkmetrics.hpp"
#include "linktopo/util.hpp"
#include "linktopo/vectorspace.hpp"

namespace linktopo {

/// Known relevance for one topic, replacing the seed's relevant set and the
/// generality estimate.
struct TopicTruth {
  std::unordered_set<std::string> relevant;
  double generality = 0;
};

struct Analysis {
  std::vector<MetricPoint> points;
  std::optional<NoiseLevel> noise;
  std::vector<std::string> warnings;
};

namespace detail {

template <class F>
void parallel_for(std::size_t n, std::size_t jobs, F&& f) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  auto work = [&] {
    for (std::size_t i; (i = next++) < n;) {
      try {
        f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(jobs, n); ++t) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

/// Metric series for every seeded topic in the store, in seed order, plus the
/// background noise level when at least two topics are present.
inline Analysis analyze(const std::vector<PageRecord>& records, const std::vector<TopicSeed>& seeds, int max_depth,
                        const std::map<std::string, TopicTruth>* truth = nullptr, std::size_t jobs = 1) {
  Analysis out;
  auto groups = group_by_topic(records);
  std::vector<const TopicSeed*> present;
  for (const auto& s : seeds) {
    if (groups.count(s.topic_id)) present.push_back(&s);
    else out.warnings.push_back("topic " + s.topic_id + " has no records");
  }
  std::unordered_set<std::string> seeded;
  for (const auto& s : seeds) seeded.insert(s.topic_id);
  for (const auto& [topic, recs] : groups)
    if (!seeded.count(topic)) out.warnings.push_back("records for unseeded topic " + topic + " ignored");
  if (present.empty()) throw Error(ErrorKind::InsufficientData, "no seeded topic has records");

  std::vector<TopicCrawl> crawls(present.size(), TopicCrawl{{}, {}});
  std::vector<std::vector<MetricPoint>> series(present.size());
  detail::parallel_for(present.size(), jobs, [&](std::size_t i) {
    const auto& seed = *present[i];
    crawls[i] = TopicCrawl{seed, build_crawl_set(groups.at(seed.topic_id), max_depth)};
    if (truth) {
      auto it = truth->find(seed.topic_id);
      if (it == truth->end()) throw Error(ErrorKind::InsufficientData, "no ground truth for topic " + seed.topic_id);
      series[i] = metric_series(crawls[i].crawl, it->second.relevant, it->second.generality);
    } else {
      series[i] = likelihood_series(crawls[i].crawl, seed, seeds);
    }
  });
  for (auto& s : series) out.points.insert(out.points.end(), s.begin(), s.end());
  if (crawls.size() >= 2) out.noise = noise_level(crawls);
  else out.warnings.push_back("fewer than two topics: noise level not computed");
  return out;
}

// ---------------------------------------------------------------------------
// Metrics CSV: '#' metadata lines, then
// topic_id,d,n_pages,delta,sigma,R,G,lambda

inline constexpr std::string_view kMetricsHeader = "topic_id,d,n_pages,delta,sigma,R,G,lambda";

inline void write_metrics_csv(std::ostream& out, const Analysis& a, const std::vector<std::string>& comments = {}) {
  for (const auto& c : comments) out << "# " << c << '\n';
  if (a.noise)
    out << "# sigma_inf=" << format_double(a.noise->mean) << " stderr=" << format_double(a.noise->stderr_)
        << " pairs=" << a.noise->pairs << " pair_order=ordered\n";
  out << kMetricsHeader << '\n';
  for (const auto& p : a.points) {
    out << p.topic_id << ',' << p.d << ',' << p.n_pages << ',' << format_double(p.delta) << ','
        << format_double(p.sigma) << ',' << format_double(p.R) << ',' << format_double(p.G) << ','
        << (p.lambda ? format_double(*p.lambda) : std::string{}) << '\n';
  }
}

struct MetricsTable {
  std::vector<MetricPoint> points;
  std::map<std::string, std::string> metadata;  // key=value pairs from '#' lines
};

inline MetricsTable read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  MetricsTable t;
  std::string line;
  bool header = false;
  std::size_t line_no = 0;
  auto bad = [&](const std::string& why) {
    return Error(ErrorKind::StoreFormat, path + ":" + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::istringstream words(line.substr(1));
      std::string w;
      while (words >> w)
        if (auto eq = w.find('='); eq != std::string::npos) t.metadata[w.substr(0, eq)] = w.substr(eq + 1);
      continue;
    }
    if (!header) {
      if (line != kMetricsHeader) throw bad("expected header '" + std::string(kMetricsHeader) + "'");
      header = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 8) throw bad("expected 8 fields");
    try {
      MetricPoint p;
      p.topic_id = f[0];
      p.d = std::stoi(f[1]);
      p.n_pages = static_cast<std::size_t>(std::stoull(f[2]));
      p.delta = parse_double(f[3]);
      p.sigma = parse_double(f[4]);
      p.R = parse_double(f[5]);
      p.G = parse_double(f[6]);
      if (!f[7].empty()) p.lambda = parse_double(f[7]);
      t.points.push_back(std::move(p));
    } catch (const std::exception& e) {
      throw bad(e.what());
    }
  }
  if (!header) throw Error(ErrorKind::StoreFormat, path + ": missing header");
  return t;
}

// ---------------------------------------------------------------------------

enum class FitModel { Similarity, Likelihood };

struct FitReport {
  DecayFit fit;
  std::optional<Correlation> correlation;
  std::optional<double> delta_star;
  std::vector<std::string> notes;
};

/// (delta, sigma) or (delta, lambda) pairs for d >= 1; the d = 0 rows pin the
/// models by construction and carry delta = 0.
inline std::vector<DataPoint> fit_points(const std::vector<MetricPoint>& points, FitModel model) {
  std::vector<DataPoint> out;
  for (const auto& p : points) {
    if (p.d < 1) continue;
    if (model == FitModel::Similarity) out.push_back({p.delta, p.sigma});
    else if (p.lambda) out.push_back({p.delta, *p.lambda});
  }
  return out;
}

inline FitReport run_fit(const std::vector<MetricPoint>& points, FitModel model, double sigma_inf = 0,
                         double threshold = 2.0, const FitOptions& opt = {}) {
  auto data = fit_points(points, model);
  FitReport r;
  r.fit = model == FitModel::Similarity ? fit_similarity_decay(data, sigma_inf, opt) : fit_likelihood_decay(data, opt);
  try {
    r.correlation = pearson(data);
  } catch (const Error& e) {
    r.notes.push_back(e.what());
  }
  if (r.fit.degenerate) r.notes.push_back("degenerate fit: no decay signal");
  if (model == FitModel::Likelihood && !r.fit.degenerate) {
    try {
      r.delta_star = critical_distance(r.fit, threshold);
    } catch (const Error& e) {
      r.notes.push_back(e.what());
    }
  }
  return r;
}

inline nlohmann::ordered_json to_json(const FitReport& r) {
  nlohmann::ordered_json j;
  j["model"] = r.fit.model;
  bool sim = r.fit.model == SimilarityDecay::kName;
  auto names = sim ? std::vector<std::string>{"alpha1", "alpha2"}
                   : std::vector<std::string>{"alpha3", "alpha4", "alpha5"};
  auto params = nlohmann::ordered_json::object(), se = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < names.size() && i < r.fit.params.size(); ++i) {
    params[names[i]] = r.fit.params[i];
    se[names[i]] = r.fit.stderr_[i];
  }
  j["params"] = std::move(params);
  j["stderr"] = std::move(se);
  j["sse"] = r.fit.sse;
  j["rho"] = r.correlation ? nlohmann::ordered_json(r.correlation->rho) : nlohmann::ordered_json();
  j["p_value"] = r.correlation ? nlohmann::ordered_json(r.correlation->p_value) : nlohmann::ordered_json();
  j["delta_star"] = r.delta_star ? nlohmann::ordered_json(*r.delta_star) : nlohmann::ordered_json();
  j["n_points"] = r.fit.n_points;
  j["converged"] = r.fit.converged;
  j["degenerate"] = r.fit.degenerate;
  if (r.fit.sigma_inf) j["sigma_inf"] = *r.fit.sigma_inf;
  j["notes"] = r.notes;
  return j;
}

/// Reads the params/stderr of a fit JSON written by to_json(FitReport).
inline DecayFit decay_fit_from_json(const nlohmann::json& j) {
  try {
    DecayFit f;
    f.model = j.at("model").get<std::string>();
    bool sim = f.model == SimilarityDecay::kName;
    auto names = sim ? std::vector<std::string>{"alpha1", "alpha2"}
                     : std::vector<std::string>{"alpha3", "alpha4", "alpha5"};
    for (const auto& n : names) {
      f.params.push_back(j.at("params").at(n).get<double>());
      const auto& se = j.at("stderr").at(n);
      f.stderr_.push_back(se.is_null() ? std::numeric_limits<double>::infinity() : se.get<double>());
    }
    f.sse = j.value("sse", 0.0);
    f.n_points = j.value("n_points", std::size_t{0});
    f.converged = j.value("converged", true);
    f.degenerate = j.value("degenerate", false);
    if (j.contains("sigma_inf")) f.sigma_inf = j.at("sigma_inf").get<double>();
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::StoreFormat, std::string("fit: ") + e.what());
  }
}

}  // namespace linktopo
