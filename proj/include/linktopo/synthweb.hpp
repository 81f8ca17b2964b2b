#pragma once

// Synthetic topic-centred corpora with planted similarity decay and planted
// relevance clustering, emitted as an offline corpus for the crawler.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "linktopo/corpus.hpp"
#include "linktopo/crawler.hpp"
#include "linktopo/error.hpp"
#include "linktopo/lexparse.hpp"
#include "linktopo/pipeline.hpp"
#include "linktopo/util.hpp"

namespace linktopo {

struct SynthSpec {
  std::size_t n_topics = 100;
  int depth = 3;
  int first_layer_min = 5;  // layer-1 size, uniform in [min, max]
  int first_layer_max = 10;
  double branching_min = 6;  // n_{d+1} / n_d, uniform in [min, max]
  double branching_max = 16;
  double alpha1 = 1.8;
  double alpha2 = 0.6;
  double sigma_inf = 0.0318;
  double generality = 0.2;
  std::vector<double> lambda_model{3.0, 0.15, 2.0};  // alpha3, alpha4, alpha5
  std::vector<double> lambda_profile;                // lambda at d = 1..depth; overrides the model
  std::size_t vocabulary_size = 40;                  // topic terms, all carried by the source
  std::size_t terms_per_page = 40;                   // topic + background terms per page
  std::size_t background_size = 4000;
  std::size_t common_size = 100;
  std::size_t extra_links = 2;
  std::vector<std::string> domains{"edu", "com", "org", "net", "gov"};
  std::uint64_t rng_seed = 1;

  void validate() const {
    auto fail = [](const std::string& m) { throw Error(ErrorKind::SpecError, m); };
    if (n_topics < 2) fail("n_topics must be >= 2");
    if (depth < 1) fail("depth must be >= 1");
    if (first_layer_min < 5 || first_layer_max > 10 || first_layer_min > first_layer_max)
      fail("first layer size range must lie within [5, 10]");
    if (!(branching_min >= 1 && branching_min <= branching_max)) fail("branching range must satisfy 1 <= min <= max");
    if (!(alpha1 >= 0 && std::isfinite(alpha1))) fail("alpha1 must be finite and >= 0");
    if (!(alpha2 > 0 && alpha2 < 50)) fail("alpha2 must lie in (0, 50)");
    if (!(sigma_inf >= 0 && sigma_inf < 1)) fail("sigma_inf must lie in [0, 1)");
    if (!(generality > 0 && generality <= 1)) fail("generality must lie in (0, 1]");
    if (lambda_profile.empty()) {
      if (lambda_model.size() != 3) fail("lambda_model needs alpha3, alpha4, alpha5");
      if (!(lambda_model[0] >= 0) || !(lambda_model[1] > 0) || !(lambda_model[2] > 0 && lambda_model[2] < 50))
        fail("lambda_model needs alpha3 >= 0, alpha4 > 0, alpha5 in (0, 50)");
    } else {
      if (lambda_profile.size() != static_cast<std::size_t>(depth)) fail("lambda_profile needs one value per depth");
      for (double l : lambda_profile)
        if (!(l >= 0 && std::isfinite(l))) fail("lambda_profile values must be finite and >= 0");
    }
    if (vocabulary_size < 1 || terms_per_page < 1) fail("vocabulary_size and terms_per_page must be >= 1");
    if (background_size < terms_per_page) fail("background_size must be >= terms_per_page");
    if (common_size < 1) fail("common_size must be >= 1");
    if (domains.empty()) fail("domains must not be empty");
    for (const auto& d : domains)
      if (d.empty() || !std::all_of(d.begin(), d.end(), [](char c) { return c >= 'a' && c <= 'z'; }))
        fail("domain labels must be lowercase letters");
  }

  /// Planted lambda at mean link distance `delta` for depth d.
  double planted_lambda(int d, double delta) const {
    if (!lambda_profile.empty()) return lambda_profile.at(static_cast<std::size_t>(d - 1));
    return 1.0 + lambda_model[0] * std::exp(-lambda_model[1] * std::pow(delta, lambda_model[2]));
  }

  double target_sigma(double delta) const {
    return sigma_inf + (1.0 - sigma_inf) * std::exp(-alpha1 * std::pow(delta, alpha2));
  }

  /// Where the planted lambda model crosses `threshold`; none for profiles or
  /// when the model never reaches it.
  std::optional<double> planted_delta_star(double threshold = 2.0) const {
    if (!lambda_profile.empty() || lambda_model[0] <= threshold - 1.0) return std::nullopt;
    return std::pow(std::log(lambda_model[0] / (threshold - 1.0)) / lambda_model[1], 1.0 / lambda_model[2]);
  }
};

inline nlohmann::ordered_json to_json(const SynthSpec& s) {
  nlohmann::ordered_json j;
  j["n_topics"] = s.n_topics;
  j["depth"] = s.depth;
  j["first_layer"] = {s.first_layer_min, s.first_layer_max};
  j["branching"] = {s.branching_min, s.branching_max};
  j["alpha1"] = s.alpha1;
  j["alpha2"] = s.alpha2;
  j["sigma_inf"] = s.sigma_inf;
  j["generality"] = s.generality;
  if (s.lambda_profile.empty()) j["lambda_model"] = s.lambda_model;
  else j["lambda_profile"] = s.lambda_profile;
  j["vocabulary_size"] = s.vocabulary_size;
  j["terms_per_page"] = s.terms_per_page;
  j["background_size"] = s.background_size;
  j["common_size"] = s.common_size;
  j["extra_links"] = s.extra_links;
  j["domains"] = s.domains;
  j["rng_seed"] = s.rng_seed;
  return j;
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline SynthSpec synth_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorKind::SpecError, "synth spec must be a JSON object");
  static const std::set<std::string> known{
      "n_topics",        "depth",          "first_layer",    "branching",      "alpha1",      "alpha2",
      "sigma_inf",       "generality",     "lambda_model",   "lambda_profile", "vocabulary_size",
      "terms_per_page",  "background_size", "common_size",   "extra_links",    "domains",     "rng_seed"};
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw Error(ErrorKind::SpecError, "unknown synth spec key '" + k + "'");
  SynthSpec s;
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("n_topics", s.n_topics);
    get("depth", s.depth);
    if (j.contains("first_layer")) {
      auto r = j.at("first_layer").get<std::vector<int>>();
      if (r.size() != 2) throw Error(ErrorKind::SpecError, "first_layer needs [min, max]");
      s.first_layer_min = r[0];
      s.first_layer_max = r[1];
    }
    if (j.contains("branching")) {
      auto r = j.at("branching").get<std::vector<double>>();
      if (r.size() != 2) throw Error(ErrorKind::SpecError, "branching needs [min, max]");
      s.branching_min = r[0];
      s.branching_max = r[1];
    }
    get("alpha1", s.alpha1);
    get("alpha2", s.alpha2);
    get("sigma_inf", s.sigma_inf);
    get("generality", s.generality);
    get("lambda_model", s.lambda_model);
    get("lambda_profile", s.lambda_profile);
    get("vocabulary_size", s.vocabulary_size);
    get("terms_per_page", s.terms_per_page);
    get("background_size", s.background_size);
    get("common_size", s.common_size);
    get("extra_links", s.extra_links);
    get("domains", s.domains);
    get("rng_seed", s.rng_seed);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SpecError, std::string("synth spec: ") + e.what());
  }
  s.validate();
  return s;
}

inline SynthSpec load_synth_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  try {
    return synth_spec_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::SpecError, path + ": " + e.what());
  }
}

struct TopicGroundTruth {
  std::string topic_id;
  std::string label;
  std::string tld;
  std::string source_url;
  std::vector<std::size_t> layer_sizes;  // index 0 is the source
  std::vector<double> delta;             // mean link distance of P_d
  std::vector<double> sigma_target;
  std::vector<double> sigma_planted;  // sigma(q, d) of the emitted pages
  std::vector<std::size_t> topic_terms;  // topic-vocabulary occurrences per layer
  std::vector<double> lambda_target;
  std::vector<double> lambda_planted;
  double generality = 0;
  std::vector<std::string> relevant;
};

struct GroundTruth {
  SynthSpec spec;
  double common_terms_per_page = 0;
  double noise_level = 0;
  std::optional<double> delta_star;
  std::vector<TopicGroundTruth> topics;

  std::map<std::string, TopicTruth> relevance() const {
    std::map<std::string, TopicTruth> out;
    for (const auto& t : topics) out[t.topic_id] = TopicTruth{{t.relevant.begin(), t.relevant.end()}, t.generality};
    return out;
  }
};

inline nlohmann::ordered_json to_json(const GroundTruth& g) {
  nlohmann::ordered_json j;
  j["tool_version"] = kToolVersion;
  j["spec"] = to_json(g.spec);
  j["config_digest"] = hex64(fnv1a64(j["spec"].dump()));
  j["common_terms_per_page"] = g.common_terms_per_page;
  j["noise_level"] = g.noise_level;
  j["delta_star"] = g.delta_star ? nlohmann::ordered_json(*g.delta_star) : nlohmann::ordered_json();
  auto& topics = j["topics"] = nlohmann::ordered_json::array();
  for (const auto& t : g.topics) {
    nlohmann::ordered_json o;
    o["topic_id"] = t.topic_id;
    o["label"] = t.label;
    o["tld"] = t.tld;
    o["source_url"] = t.source_url;
    o["layer_sizes"] = t.layer_sizes;
    o["delta"] = t.delta;
    o["sigma_target"] = t.sigma_target;
    o["sigma_planted"] = t.sigma_planted;
    o["topic_terms"] = t.topic_terms;
    o["lambda_target"] = t.lambda_target;
    o["lambda_planted"] = t.lambda_planted;
    o["generality"] = t.generality;
    o["relevant"] = t.relevant;
    topics.push_back(std::move(o));
  }
  return j;
}

inline GroundTruth ground_truth_from_json(const nlohmann::json& j) {
  try {
    GroundTruth g;
    g.spec = synth_spec_from_json(j.at("spec"));
    g.common_terms_per_page = j.at("common_terms_per_page").get<double>();
    g.noise_level = j.at("noise_level").get<double>();
    if (!j.at("delta_star").is_null()) g.delta_star = j.at("delta_star").get<double>();
    for (const auto& o : j.at("topics")) {
      TopicGroundTruth t;
      t.topic_id = o.at("topic_id").get<std::string>();
      t.label = o.at("label").get<std::string>();
      t.tld = o.at("tld").get<std::string>();
      t.source_url = o.at("source_url").get<std::string>();
      t.layer_sizes = o.at("layer_sizes").get<std::vector<std::size_t>>();
      t.delta = o.at("delta").get<std::vector<double>>();
      t.sigma_target = o.at("sigma_target").get<std::vector<double>>();
      t.sigma_planted = o.at("sigma_planted").get<std::vector<double>>();
      t.topic_terms = o.at("topic_terms").get<std::vector<std::size_t>>();
      t.lambda_target = o.at("lambda_target").get<std::vector<double>>();
      t.lambda_planted = o.at("lambda_planted").get<std::vector<double>>();
      t.generality = o.at("generality").get<double>();
      t.relevant = o.at("relevant").get<std::vector<std::string>>();
      g.topics.push_back(std::move(t));
    }
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::StoreFormat, std::string("ground truth: ") + e.what());
  }
}

inline GroundTruth load_ground_truth(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  try {
    return ground_truth_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::StoreFormat, path + ": " + e.what());
  }
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Independent stream per (purpose, topic, layer, page).
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0,
                                 std::uint64_t d = 0) {
  std::uint64_t s = seed;
  for (auto v : {a, b, c, d}) {
    s ^= splitmix64(s) + v;
    splitmix64(s);
  }
  return splitmix64(s);
}

/// Portable draws on top of mt19937_64 (the standard distributions are
/// implementation-defined).
class SynthRng {
 public:
  explicit SynthRng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>((static_cast<unsigned __int128>(engine_()) * n) >> 64);
  }
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

enum Stream : std::uint64_t { kVocabulary = 1, kLayout = 2, kContent = 3, kLinks = 4, kLabels = 5, kSource = 6 };

/// Distinct pronounceable words that survive tokenization unchanged: at least
/// three letters, not stop words, fixed points of the stemmer.
inline std::vector<std::string> make_vocabulary(std::size_t n, std::uint64_t seed,
                                                const StopList& stop = StopList::builtin()) {
  static constexpr std::string_view consonants = "bcdfghjklmnprstvz";
  static constexpr std::string_view vowels = "aeiou";
  SynthRng rng(stream_seed(seed, kVocabulary));
  std::vector<std::string> words;
  std::unordered_set<std::string> seen;
  words.reserve(n);
  while (words.size() < n) {
    std::string w;
    std::size_t syllables = 2 + rng.index(3);
    for (std::size_t i = 0; i < syllables; ++i) {
      w += consonants[rng.index(consonants.size())];
      w += vowels[rng.index(vowels.size())];
    }
    if (rng.uniform() < 0.5) w += consonants[rng.index(consonants.size())];
    if (w.size() < kMinTokenLength || stop.contains(w) || porter_stem(w) != w) continue;
    if (seen.insert(w).second) words.push_back(std::move(w));
  }
  return words;
}

struct TopicLayout {
  std::string topic_id;
  std::string label;
  std::string tld;
  std::string source_url;
  std::vector<std::size_t> sizes;              // sizes[0] == 1
  std::vector<double> delta;                   // per depth
  std::vector<std::vector<std::string>> urls;  // per layer
};

inline std::string topic_name(std::size_t i, std::size_t n) {
  auto s = std::to_string(i + 1);
  auto width = std::max<std::size_t>(3, std::to_string(n).size());
  return "t" + std::string(width - std::min(width, s.size()), '0') + s;
}

inline constexpr std::string_view kDirectoryHost = "dir.synth.org";

inline TopicLayout make_layout(const SynthSpec& spec, std::size_t i) {
  SynthRng rng(stream_seed(spec.rng_seed, kLayout, i));
  TopicLayout t;
  t.topic_id = topic_name(i, spec.n_topics);
  t.label = "synthetic topic " + std::to_string(i + 1);
  t.tld = spec.domains[i % spec.domains.size()];
  t.source_url = "http://" + std::string(kDirectoryHost) + "/topics/" + t.topic_id + ".html";
  t.sizes.push_back(1);
  auto span = static_cast<std::size_t>(spec.first_layer_max - spec.first_layer_min + 1);
  t.sizes.push_back(static_cast<std::size_t>(spec.first_layer_min) + rng.index(span));
  for (int d = 2; d <= spec.depth; ++d) {
    double ratio = spec.branching_min + (spec.branching_max - spec.branching_min) * rng.uniform();
    t.sizes.push_back(std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(t.sizes.back() * ratio))));
  }
  std::size_t n = 0, weighted = 0;
  for (std::size_t d = 0; d < t.sizes.size(); ++d) {
    n += t.sizes[d];
    weighted += d * t.sizes[d];
    t.delta.push_back(static_cast<double>(weighted) / static_cast<double>(n));
  }
  t.urls.resize(t.sizes.size());
  t.urls[0].push_back(t.source_url);
  for (std::size_t d = 1; d < t.sizes.size(); ++d)
    for (std::size_t j = 0; j < t.sizes[d]; ++j)
      t.urls[d].push_back("http://s" + std::to_string((d + j) % 3) + "." + t.topic_id + ".synth." + t.tld + "/d" +
                          std::to_string(d) + "/p" + std::to_string(j) + ".html");
  return t;
}

/// Term ids: topic i owns [i*V, (i+1)*V), then the background pool, then the
/// common pool.
struct TermSpace {
  std::size_t topics, vocab, background, common;
  std::uint32_t topic_term(std::size_t topic, std::size_t k) const {
    return static_cast<std::uint32_t>(topic * vocab + k);
  }
  std::uint32_t background_term(std::size_t k) const { return static_cast<std::uint32_t>(topics * vocab + k); }
  std::uint32_t common_term(std::size_t k) const {
    return static_cast<std::uint32_t>(topics * vocab + background + k);
  }
  std::size_t size() const { return topics * vocab + background + common; }
};

/// The random choices behind one page, fixed before the mixing rates are
/// known so calibration moves along common random numbers.
struct PageDraw {
  std::vector<std::uint32_t> topic_order;
  std::vector<std::uint32_t> background;
  std::vector<std::uint32_t> common_order;
  double u = 0;
};

inline PageDraw draw_page(const SynthSpec& spec, const TermSpace& ts, std::size_t topic, std::uint64_t stream) {
  SynthRng rng(stream);
  PageDraw p;
  p.topic_order.resize(spec.vocabulary_size);
  for (std::size_t k = 0; k < spec.vocabulary_size; ++k) p.topic_order[k] = ts.topic_term(topic, k);
  rng.shuffle(p.topic_order);
  std::unordered_set<std::size_t> used;
  while (p.background.size() < spec.terms_per_page) {
    auto k = rng.index(spec.background_size);
    if (used.insert(k).second) p.background.push_back(ts.background_term(k));
  }
  p.common_order.resize(spec.common_size);
  for (std::size_t k = 0; k < spec.common_size; ++k) p.common_order[k] = ts.common_term(k);
  rng.shuffle(p.common_order);
  p.u = rng.uniform();
  return p;
}

inline std::size_t common_count(double cbar, double u, std::size_t pool) {
  double whole = std::floor(cbar);
  auto c = static_cast<std::size_t>(whole) + (u < cbar - whole ? 1 : 0);
  return std::min(c, pool);
}

inline std::vector<std::uint32_t> source_terms(const PageDraw& draw, double cbar) {
  std::vector<std::uint32_t> t(draw.topic_order.begin(), draw.topic_order.end());
  auto c = common_count(cbar, draw.u, draw.common_order.size());
  t.insert(t.end(), draw.common_order.begin(), draw.common_order.begin() + static_cast<std::ptrdiff_t>(c));
  return t;
}

inline std::vector<std::uint32_t> page_terms(const PageDraw& draw, std::size_t m, std::size_t t, double cbar) {
  std::vector<std::uint32_t> out(draw.topic_order.begin(), draw.topic_order.begin() + static_cast<std::ptrdiff_t>(m));
  out.insert(out.end(), draw.background.begin(), draw.background.begin() + static_cast<std::ptrdiff_t>(t - m));
  auto c = common_count(cbar, draw.u, draw.common_order.size());
  out.insert(out.end(), draw.common_order.begin(), draw.common_order.begin() + static_cast<std::ptrdiff_t>(c));
  return out;
}

/// Scratch for term-id similarity sums over one vocabulary.
class SimilarityScratch {
 public:
  explicit SimilarityScratch(std::size_t vocab) : df_(vocab, 0), mark_(vocab, 0) {}

  /// sigma(q, d) for pages[0] = source and every other page within distance
  /// d; every page is a set of distinct term ids, so tf = 1.
  double cumulative_sigma(const std::vector<const std::vector<std::uint32_t>*>& pages) {
    const double n = static_cast<double>(pages.size());
    for (const auto* p : pages)
      for (auto k : *p) ++df_[k];
    auto weight = [&](std::uint32_t k) { return 1.0 + std::log(n / static_cast<double>(df_[k])); };
    const auto& src = *pages[0];
    double ns = 0;
    for (auto k : src) {
      mark_[k] = 1;
      double w = weight(k);
      ns += w * w;
    }
    double sum = 0;
    for (const auto* p : pages) {
      double np = 0, dot = 0;
      for (auto k : *p) {
        double w2 = weight(k);
        w2 *= w2;
        np += w2;
        if (mark_[k]) dot += w2;
      }
      if (np > 0 && ns > 0) sum += std::clamp(dot / (std::sqrt(ns) * std::sqrt(np)), 0.0, 1.0);
    }
    for (auto k : src) mark_[k] = 0;
    for (const auto* p : pages)
      for (auto k : *p) df_[k] = 0;
    return sum / n;
  }

  /// Mean over ordered pairs of the similarity of topic a's source to the
  /// depth-1 pages of topic b, with idf over b's depth-1 set plus a's source.
  double noise_level(const std::vector<std::vector<const std::vector<std::uint32_t>*>>& depth1) {
    double total = 0;
    std::size_t pairs = 0;
    for (std::size_t b = 0; b < depth1.size(); ++b) {
      const auto& pb = depth1[b];
      const double n = static_cast<double>(pb.size() + 1);
      for (const auto* p : pb)
        for (auto k : *p) ++df_[k];
      for (std::size_t a = 0; a < depth1.size(); ++a) {
        if (a == b) continue;
        const auto& src = *depth1[a][0];
        for (auto k : src) mark_[k] = 1;
        auto weight = [&](std::uint32_t k) {
          return 1.0 + std::log(n / static_cast<double>(df_[k] + mark_[k]));
        };
        double ns = 0;
        for (auto k : src) {
          double w = weight(k);
          ns += w * w;
        }
        double sum = 0;
        for (const auto* p : pb) {
          double np = 0, dot = 0;
          for (auto k : *p) {
            double w2 = weight(k);
            w2 *= w2;
            np += w2;
            if (mark_[k]) dot += w2;
          }
          if (np > 0 && ns > 0) sum += std::clamp(dot / (std::sqrt(ns) * std::sqrt(np)), 0.0, 1.0);
        }
        total += sum / static_cast<double>(pb.size());
        ++pairs;
        for (auto k : src) mark_[k] = 0;
      }
      for (const auto* p : pb)
        for (auto k : *p) df_[k] = 0;
    }
    return total / static_cast<double>(pairs);
  }

 private:
  std::vector<std::uint32_t> df_;
  std::vector<std::uint8_t> mark_;
};

/// One topic's pages as term-id sets, layer by layer.
struct TopicContent {
  std::vector<std::vector<std::vector<std::uint32_t>>> pages;  // [layer][page]
  std::vector<std::size_t> topic_terms;                          // M_d
  std::vector<double> sigma;                                     // sigma(q, d)
};

inline constexpr double kPureBackground = 1e-9;

class TopicBuilder {
 public:
  /// Draws the random choices of layers 0..depth.
  TopicBuilder(const SynthSpec& spec, const TermSpace& ts, const TopicLayout& layout, std::size_t topic, int depth)
      : spec_(spec), layout_(layout) {
    source_draw_ = draw_page(spec, ts, topic, stream_seed(spec.rng_seed, kSource, topic));
    draws_.resize(static_cast<std::size_t>(depth) + 1);
    for (std::size_t d = 1; d < draws_.size(); ++d)
      for (std::size_t j = 0; j < layout.sizes[d]; ++j)
        draws_[d].push_back(draw_page(spec, ts, topic, stream_seed(spec.rng_seed, kContent, topic, d, j)));
  }

  /// Plants layers 1..depth for common-term rate cbar.
  TopicContent build(double cbar, int depth, SimilarityScratch& scratch) const {
    TopicContent c;
    c.pages.resize(static_cast<std::size_t>(depth) + 1);
    c.pages[0].push_back(source_terms(source_draw_, cbar));
    c.topic_terms.push_back(spec_.vocabulary_size);
    c.sigma.push_back(1.0);
    for (int d = 1; d <= depth; ++d) plant_layer(c, static_cast<std::size_t>(d), cbar, scratch);
    return c;
  }

 private:
  void fill_layer(TopicContent& c, std::size_t d, std::size_t M, double cbar, bool copy) const {
    const auto n = layout_.sizes[d];
    auto& layer = c.pages[d];
    layer.assign(n, {});
    for (std::size_t j = 0; j < n; ++j) {
      if (copy) {
        layer[j] = c.pages[0][0];
        continue;
      }
      std::size_t m = M / n + (j < M % n ? 1 : 0);
      layer[j] = page_terms(draws_[d][j], m, spec_.terms_per_page, cbar);
    }
  }

  double measure(const TopicContent& c, std::size_t d, SimilarityScratch& scratch) const {
    std::vector<const std::vector<std::uint32_t>*> all;
    for (std::size_t i = 0; i <= d; ++i)
      for (const auto& p : c.pages[i]) all.push_back(&p);
    return scratch.cumulative_sigma(all);
  }

  void plant_layer(TopicContent& c, std::size_t d, double cbar, SimilarityScratch& scratch) const {
    const double target = spec_.target_sigma(layout_.delta[d]);
    const auto n = layout_.sizes[d];
    const std::size_t per_page = std::min(spec_.terms_per_page, spec_.vocabulary_size);
    auto eval = [&](std::size_t M) {
      fill_layer(c, d, M, cbar, false);
      return measure(c, d, scratch);
    };
    auto where = [&] { return layout_.topic_id + " depth " + std::to_string(d); };

    if (target >= 1.0) {
      fill_layer(c, d, 0, cbar, true);
      c.topic_terms.push_back(n * spec_.vocabulary_size);
      c.sigma.push_back(measure(c, d, scratch));
      return;
    }
    std::size_t lo = 0, hi = n * per_page;
    double f_lo = eval(lo);
    if (target <= f_lo) {
      if (target - spec_.sigma_inf >= kPureBackground)
        throw Error(ErrorKind::SpecError, "infeasible similarity target " + format_double(target) + " at " + where() +
                                              ": background alone gives " + format_double(f_lo));
      c.topic_terms.push_back(0);
      c.sigma.push_back(f_lo);
      return;
    }
    double f_hi = eval(hi);
    if (target > f_hi)
      throw Error(ErrorKind::SpecError, "infeasible similarity target " + format_double(target) + " at " + where() +
                                            ": at most " + format_double(f_hi) + " reachable");
    while (hi - lo > 1) {
      auto mid = lo + (hi - lo) / 2;
      double f = eval(mid);
      if (f < target) lo = mid, f_lo = f;
      else hi = mid, f_hi = f;
    }
    auto best = target - f_lo <= f_hi - target ? lo : hi;
    c.topic_terms.push_back(best);
    c.sigma.push_back(eval(best));
  }

  const SynthSpec& spec_;
  const TopicLayout& layout_;
  PageDraw source_draw_;
  std::vector<std::vector<PageDraw>> draws_;
};

inline std::string render_html(const std::string& title_comment, const std::vector<std::uint32_t>& terms,
                               const std::vector<std::string>& words, const std::vector<std::string>& links) {
  std::string h = "<!DOCTYPE html>\n<html>\n<head><title></title></head>\n<body>\n<!-- " + title_comment + " -->\n<p>";
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (i) h += (i % 12 == 0) ? '\n' : ' ';
    h += words[terms[i]];
  }
  h += "</p>\n<ul>\n";
  for (const auto& l : links) h += "<li><a href=\"" + l + "\"></a></li>\n";
  h += "</ul>\n</body>\n</html>\n";
  return h;
}

inline void write_file(const std::filesystem::path& p, const std::string& data) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + p.string());
  out << data;
  if (!out) throw Error(ErrorKind::Io, "write failed for " + p.string());
}

}  // namespace detail

struct GenerateOptions {
  std::size_t jobs = 1;
};

/// Plants the spec and, when out_dir is non-empty, writes the offline corpus:
/// manifest.json, seeds.json, ground_truth.json and one HTML file per page.
inline GroundTruth generate(const SynthSpec& spec, const std::filesystem::path& out_dir,
                            const GenerateOptions& opt = {}) {
  spec.validate();
  const detail::TermSpace ts{spec.n_topics, spec.vocabulary_size, spec.background_size, spec.common_size};
  const auto words = detail::make_vocabulary(ts.size(), spec.rng_seed);

  std::vector<detail::TopicLayout> layouts;
  for (std::size_t i = 0; i < spec.n_topics; ++i) layouts.push_back(detail::make_layout(spec, i));
  std::vector<std::unique_ptr<detail::TopicBuilder>> builders(spec.n_topics);
  detail::parallel_for(spec.n_topics, opt.jobs, [&](std::size_t i) {
    builders[i] = std::make_unique<detail::TopicBuilder>(spec, ts, layouts[i], i, 1);
  });

  // Common-term rate chosen so the cross-topic background equals sigma_inf;
  // only the sources and depth-1 pages enter that measurement.
  detail::SimilarityScratch scratch(ts.size());
  auto noise_at = [&](double cbar) {
    std::vector<detail::TopicContent> first(spec.n_topics);
    for (std::size_t i = 0; i < spec.n_topics; ++i) first[i] = builders[i]->build(cbar, 1, scratch);
    std::vector<std::vector<const std::vector<std::uint32_t>*>> depth1(spec.n_topics);
    for (std::size_t i = 0; i < spec.n_topics; ++i)
      for (std::size_t d = 0; d <= 1; ++d)
        for (const auto& p : first[i].pages[d]) depth1[i].push_back(&p);
    return scratch.noise_level(depth1);
  };
  // A rate whose layer-1 targets are unreachable counts as too high.
  auto probe = [&](double cbar) -> std::optional<double> {
    try {
      return noise_at(cbar);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::SpecError || cbar == 0) throw;
      return std::nullopt;
    }
  };
  double lo = 0, hi = static_cast<double>(spec.common_size);
  double f_lo = *probe(lo);
  auto f_hi = probe(hi);
  if (spec.sigma_inf < f_lo || (f_hi && spec.sigma_inf > *f_hi))
    throw Error(ErrorKind::SpecError, "sigma_inf " + format_double(spec.sigma_inf) + " below the reachable floor " +
                                          format_double(f_lo) + " or above the ceiling " +
                                          format_double(f_hi.value_or(f_lo)));
  while (hi - lo > 1e-6) {
    double mid = 0.5 * (lo + hi);
    auto f = probe(mid);
    if (f && *f < spec.sigma_inf) lo = mid, f_lo = *f;
    else hi = mid, f_hi = f;
  }
  const double cbar = !f_hi || spec.sigma_inf - f_lo <= *f_hi - spec.sigma_inf ? lo : hi;
  if (!f_hi && std::abs(f_lo - spec.sigma_inf) > 1e-3)
    throw Error(ErrorKind::SpecError, "sigma_inf " + format_double(spec.sigma_inf) +
                                          " unreachable: layer-1 targets become infeasible at background " +
                                          format_double(f_lo));

  GroundTruth truth;
  truth.spec = spec;
  truth.common_terms_per_page = cbar;
  truth.noise_level = noise_at(cbar);
  truth.delta_star = spec.planted_delta_star();
  truth.topics.resize(spec.n_topics);

  std::vector<std::string> manifest(spec.n_topics);
  detail::parallel_for(spec.n_topics, opt.jobs, [&](std::size_t i) {
    const auto& lay = layouts[i];
    detail::SimilarityScratch local(ts.size());
    auto content = detail::TopicBuilder(spec, ts, lay, i, spec.depth).build(cbar, spec.depth, local);

    auto& t = truth.topics[i];
    t.topic_id = lay.topic_id;
    t.label = lay.label;
    t.tld = lay.tld;
    t.source_url = lay.source_url;
    t.layer_sizes = lay.sizes;
    t.delta = lay.delta;
    for (double dl : lay.delta) t.sigma_target.push_back(spec.target_sigma(dl));
    t.sigma_target[0] = 1.0;
    t.sigma_planted = content.sigma;
    t.topic_terms = content.topic_terms;
    t.generality = spec.generality;

    detail::SynthRng label_rng(detail::stream_seed(spec.rng_seed, detail::kLabels, i));
    std::size_t labelled = 0, n = 1;
    t.lambda_target.push_back(1.0 / spec.generality);
    t.lambda_planted.push_back(1.0 / spec.generality);
    for (std::size_t d = 1; d < lay.sizes.size(); ++d) {
      n += lay.sizes[d];
      double lam = spec.planted_lambda(static_cast<int>(d), lay.delta[d]);
      auto want = static_cast<long long>(std::llround(lam * spec.generality * static_cast<double>(n)));
      auto total = static_cast<std::size_t>(std::clamp<long long>(want, static_cast<long long>(labelled),
                                                                  static_cast<long long>(labelled + lay.sizes[d])));
      std::vector<std::size_t> order(lay.sizes[d]);
      for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
      label_rng.shuffle(order);
      std::vector<std::size_t> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(total - labelled));
      std::sort(chosen.begin(), chosen.end());
      for (auto j : chosen) t.relevant.push_back(lay.urls[d][j]);
      labelled = total;
      t.lambda_target.push_back(lam);
      t.lambda_planted.push_back(static_cast<double>(total) / (spec.generality * static_cast<double>(n)));
    }

    if (out_dir.empty()) return;
    std::string entries;
    auto add = [&](const std::string& url, const std::string& rel, const std::string& html) {
      detail::write_file(out_dir / rel, html);
      entries += "  " + nlohmann::json(url).dump() + ": " + nlohmann::json(rel).dump() + ",\n";
    };
    std::vector<std::string> links{"http://" + std::string(detail::kDirectoryHost) + "/"};
    links.insert(links.end(), lay.urls[1].begin(), lay.urls[1].end());
    add(lay.source_url, lay.topic_id + "/source.html",
        detail::render_html(lay.topic_id + " source", content.pages[0][0], words, links));
    for (std::size_t d = 1; d < lay.sizes.size(); ++d) {
      const auto nd = lay.sizes[d];
      const auto reach = std::min(d + 1, lay.sizes.size() - 1);
      for (std::size_t j = 0; j < nd; ++j) {
        std::vector<std::string> out;
        if (d + 1 < lay.sizes.size())
          for (std::size_t k = j; k < lay.sizes[d + 1]; k += nd) out.push_back(lay.urls[d + 1][k]);
        detail::SynthRng link_rng(detail::stream_seed(spec.rng_seed, detail::kLinks, i, d, j));
        for (std::size_t e = 0; e < spec.extra_links; ++e) {
          auto layer = 1 + link_rng.index(reach);
          out.push_back(lay.urls[layer][link_rng.index(lay.sizes[layer])]);
        }
        add(lay.urls[d][j], lay.topic_id + "/d" + std::to_string(d) + "/p" + std::to_string(j) + ".html",
            detail::render_html(lay.topic_id + " depth " + std::to_string(d), content.pages[d][j], words, out));
      }
    }
    manifest[i] = std::move(entries);
  });

  if (out_dir.empty()) return truth;
  std::string m = "{\n";
  for (const auto& e : manifest) m += e;
  if (m.size() > 2) m.erase(m.size() - 2, 1);  // trailing comma
  m += "}\n";
  detail::write_file(out_dir / "manifest.json", m);

  std::vector<TopicSeed> seeds;
  for (const auto& lay : layouts) seeds.push_back(TopicSeed{lay.topic_id, lay.label, lay.source_url, lay.urls[1], lay.urls[1]});
  save_seeds((out_dir / "seeds.json").string(), seeds);
  detail::write_file(out_dir / "ground_truth.json", to_json(truth).dump(2) + "\n");
  return truth;
}

// ---------------------------------------------------------------------------

struct DepthCheck {
  int d = 0;
  double mean_measured = 0;
  double mean_target = 0;
  double stderr_ = 0;
  bool within_3se = false;
};

struct SelfCheckReport {
  std::size_t topics = 0;
  std::size_t pages = 0;
  double sigma_inf_planted = 0;
  double sigma_inf_measured = 0;
  double alpha1_planted = 0, alpha2_planted = 0;
  std::optional<FitReport> similarity;
  std::optional<FitReport> likelihood;
  std::optional<double> alpha1_rel_error, alpha2_rel_error;
  std::optional<double> delta_star_planted;
  std::optional<double> delta_star_error;
  std::vector<DepthCheck> depths;
  bool no_decay = false;
  std::vector<std::string> notes;
};

struct SelfCheckOptions {
  std::size_t jobs = 1;
  double threshold = 2.0;
};

/// Offline crawl of a generated corpus, analysis against its ground truth,
/// both fits, and the comparison with the planted values.
inline SelfCheckReport self_check(const std::filesystem::path& corpus, const SelfCheckOptions& opt = {}) {
  auto truth = load_ground_truth((corpus / "ground_truth.json").string());
  auto seeds = load_seeds((corpus / "seeds.json").string());
  OfflineFetcher fetcher(corpus);
  CrawlConfig config;
  config.max_depth = truth.spec.depth;
  config.politeness_delay = std::chrono::milliseconds(0);
  config.max_concurrent_fetches = std::max<std::size_t>(1, opt.jobs);

  SelfCheckReport rep;
  std::vector<PageRecord> records;
  std::vector<TopicSeed> validated;
  for (const auto& s : seeds) {
    auto res = crawl_topic(s, config, fetcher);
    validated.push_back(res.seed);
    records.insert(records.end(), std::make_move_iterator(res.records.begin()),
                   std::make_move_iterator(res.records.end()));
  }
  rep.topics = validated.size();
  rep.pages = records.size();

  auto rel = truth.relevance();
  auto a = analyze(records, validated, truth.spec.depth, &rel, opt.jobs);
  for (auto& w : a.warnings) rep.notes.push_back(w);
  rep.sigma_inf_planted = truth.spec.sigma_inf;
  rep.sigma_inf_measured = a.noise ? a.noise->mean : truth.spec.sigma_inf;
  rep.alpha1_planted = truth.spec.alpha1;
  rep.alpha2_planted = truth.spec.alpha2;

  std::map<std::string, const TopicGroundTruth*> by_id;
  for (const auto& t : truth.topics) by_id[t.topic_id] = &t;
  for (int d = 1; d <= truth.spec.depth; ++d) {
    std::vector<double> measured, target;
    for (const auto& p : a.points) {
      if (p.d != d) continue;
      measured.push_back(p.sigma);
      target.push_back(by_id.at(p.topic_id)->sigma_target.at(static_cast<std::size_t>(d)));
    }
    DepthCheck c;
    c.d = d;
    auto n = static_cast<double>(measured.size());
    for (std::size_t i = 0; i < measured.size(); ++i) {
      c.mean_measured += measured[i] / n;
      c.mean_target += target[i] / n;
    }
    double ss = 0;
    for (double v : measured) ss += (v - c.mean_measured) * (v - c.mean_measured);
    c.stderr_ = measured.size() > 1 ? std::sqrt(ss / (n - 1) / n) : 0.0;
    c.within_3se = std::abs(c.mean_measured - c.mean_target) <= 3 * c.stderr_ + 1e-12;
    rep.depths.push_back(c);
  }

  try {
    rep.similarity = run_fit(a.points, FitModel::Similarity, rep.sigma_inf_measured, opt.threshold);
    const auto& f = rep.similarity->fit;
    if (truth.spec.alpha1 == 0) {
      rep.no_decay = true;
      rep.notes.push_back(f.degenerate ? "no-decay: planted alpha1 = 0 and the fit is flagged degenerate"
                                       : "no-decay planted but the fit is not flagged degenerate");
    } else {
      rep.alpha1_rel_error = std::abs(f.params[0] - truth.spec.alpha1) / truth.spec.alpha1;
      rep.alpha2_rel_error = std::abs(f.params[1] - truth.spec.alpha2) / truth.spec.alpha2;
    }
  } catch (const NonConvergenceError& e) {
    rep.notes.push_back(std::string("similarity fit: ") + e.what());
  }
  try {
    rep.likelihood = run_fit(a.points, FitModel::Likelihood, 0, opt.threshold);
    rep.delta_star_planted = truth.spec.planted_delta_star(opt.threshold);
    if (rep.delta_star_planted && rep.likelihood->delta_star)
      rep.delta_star_error = std::abs(*rep.likelihood->delta_star - *rep.delta_star_planted);
  } catch (const Error& e) {
    rep.notes.push_back(std::string("likelihood fit: ") + e.what());
  }
  return rep;
}

inline nlohmann::ordered_json to_json(const SelfCheckReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(); };
  nlohmann::ordered_json j;
  j["topics"] = r.topics;
  j["pages"] = r.pages;
  j["sigma_inf"] = {{"planted", r.sigma_inf_planted}, {"measured", r.sigma_inf_measured}};
  j["alpha1"] = {{"planted", r.alpha1_planted},
                 {"recovered", r.similarity ? nlohmann::ordered_json(r.similarity->fit.params[0]) : nullptr},
                 {"relative_error", opt(r.alpha1_rel_error)}};
  j["alpha2"] = {{"planted", r.alpha2_planted},
                 {"recovered", r.similarity ? nlohmann::ordered_json(r.similarity->fit.params[1]) : nullptr},
                 {"relative_error", opt(r.alpha2_rel_error)}};
  j["similarity_fit"] = r.similarity ? to_json(*r.similarity) : nlohmann::ordered_json();
  j["likelihood_fit"] = r.likelihood ? to_json(*r.likelihood) : nlohmann::ordered_json();
  j["delta_star"] = {{"planted", opt(r.delta_star_planted)},
                     {"recovered", r.likelihood ? opt(r.likelihood->delta_star) : nlohmann::ordered_json()},
                     {"abs_error", opt(r.delta_star_error)}};
  auto& depths = j["depths"] = nlohmann::ordered_json::array();
  for (const auto& c : r.depths)
    depths.push_back({{"d", c.d},
                      {"mean_measured", c.mean_measured},
                      {"mean_target", c.mean_target},
                      {"stderr", c.stderr_},
                      {"within_3se", c.within_3se}});
  j["no_decay"] = r.no_decay;
  j["notes"] = r.notes;
  return j;
}

}  // namespace linktopo
