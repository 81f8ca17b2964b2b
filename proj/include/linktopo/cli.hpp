#pragma once

// The linktopo command line: crawl, analyze, fit, compare-domains, simulate,
// gen-synth and self-check.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "linktopo/corpus.hpp"
#include "linktopo/crawler.hpp"
#include "linktopo/error.hpp"
#include "linktopo/fitting.hpp"
#include "linktopo/http_fetcher.hpp"
#include "linktopo/lexparse.hpp"
#include "linktopo/linkmetrics.hpp"
#include "linktopo/pipeline.hpp"
#include "linktopo/synthweb.hpp"
#include "linktopo/util.hpp"

namespace linktopo::cli {

/// JSON config files: top-level keys are global options, nested objects are
/// subcommands, e.g. {"crawl": {"depth": 2, "cap": 500}}.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    return dump(app, default_also).dump(2) + "\n";
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConversionError("config", e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config", "top level must be a JSON object");
    std::vector<CLI::ConfigItem> items;
    walk(j, {}, items);
    return items;
  }

 private:
  static std::string scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void walk(const nlohmann::json& j, std::vector<std::string> parents, std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        auto p = parents;
        p.push_back(key);
        walk(value, p, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array())
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      else
        item.inputs.push_back(scalar(value));
      items.push_back(std::move(item));
    }
  }

  static nlohmann::ordered_json dump(const CLI::App* app, bool default_also) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto* opt : app->get_options()) {
      if (!opt->get_configurable() || opt->get_lnames().empty()) continue;
      const auto& name = opt->get_lnames().front();
      if (opt->count() > 0) {
        auto res = opt->results();
        j[name] = res.size() == 1 ? nlohmann::ordered_json(res.front()) : nlohmann::ordered_json(res);
      } else if (default_also && !opt->get_default_str().empty()) {
        j[name] = opt->get_default_str();
      }
    }
    for (const auto* sub : app->get_subcommands({})) {
      auto s = dump(sub, default_also);
      if (!s.empty()) j[sub->get_name()] = std::move(s);
    }
    return j;
  }
};

/// Option values that determine a subcommand's output: every parameter, but
/// not file locations or the degree of parallelism.
inline nlohmann::ordered_json run_config(const CLI::App& sub) {
  static const std::set<std::string> excluded{"help",  "out",   "jobs",  "config", "curve",  "seeds",     "store",
                                              "in",    "truth", "offline", "spec", "corpus", "table", "fits",
                                              "stop-words"};
  nlohmann::ordered_json j;
  j["command"] = sub.get_name();
  auto& opts = j["options"] = nlohmann::ordered_json::object();
  for (const auto* opt : sub.get_options()) {
    auto name = opt->get_lnames().empty() ? opt->get_name() : opt->get_lnames().front();
    if (excluded.count(name)) continue;
    if (opt->count() > 0) opts[name] = opt->results();
    else opts[name] = opt->get_default_str();
  }
  return j;
}

inline std::string config_digest(const CLI::App& sub) { return hex64(fnv1a64(run_config(sub).dump())); }

inline std::vector<std::string> provenance(const CLI::App& sub) {
  return {"tool_version=" + std::string(kToolVersion), "config_digest=" + config_digest(sub)};
}

inline std::size_t default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

/// Writes to `path`, or to `out` when path is empty or "-".
inline void emit(const std::string& path, std::ostream& out, const std::string& data) {
  if (path.empty() || path == "-") {
    out << data;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot write " + path);
  f << data;
  if (!f) throw Error(ErrorKind::Io, "write failed for " + path);
}

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

// ---------------------------------------------------------------------------

struct CrawlArgs {
  std::string seeds, out, domain, offline, stop_words;
  int depth = 3;
  std::size_t cap = 10000;
  double timeout = 60;
  int delay_ms = 1000;
  std::size_t min_links = 5, max_links = 10;
  std::size_t jobs = default_jobs();
  bool no_robots = false;
};

inline void add_crawl(CLI::App& app, CrawlArgs& a) {
  auto* c = app.add_subcommand("crawl", "Breadth-first crawl from each topic source");
  c->add_option("--seeds", a.seeds, "Seeds JSON file")->required()->check(CLI::ExistingFile);
  c->add_option("--out", a.out, "Crawl store (JSON Lines) to write")->required();
  c->add_option("--depth", a.depth, "Maximum link depth")->check(CLI::Range(1, 64));
  c->add_option("--cap", a.cap, "Page cap at the maximum depth");
  c->add_option("--timeout", a.timeout, "Per-page timeout in seconds")->check(CLI::PositiveNumber);
  c->add_option("--domain", a.domain, "Only follow servers in this top-level domain");
  c->add_option("--offline", a.offline, "Serve pages from an offline corpus directory")->check(CLI::ExistingDirectory);
  c->add_option("--delay", a.delay_ms, "Politeness delay per host in milliseconds")->check(CLI::NonNegativeNumber);
  c->add_option("--min-links", a.min_links, "Fewest external links a source may have");
  c->add_option("--max-links", a.max_links, "External links of the source used as the depth-1 frontier");
  c->add_option("--stop-words", a.stop_words, "Stop-word file, one word per line")->check(CLI::ExistingFile);
  c->add_flag("--no-robots", a.no_robots, "Ignore robots.txt");
  c->add_option("--jobs", a.jobs, "Concurrent fetches")->check(CLI::PositiveNumber);
}

inline int do_crawl(const CLI::App& sub, const CrawlArgs& a, Streams io) {
  CrawlConfig config;
  config.max_depth = a.depth;
  config.max_pages_at_max_depth = a.cap;
  config.per_page_timeout = std::chrono::milliseconds(static_cast<long long>(a.timeout * 1000));
  config.politeness_delay = std::chrono::milliseconds(a.delay_ms);
  config.min_seed_links = a.min_links;
  config.max_seed_links = a.max_links;
  config.max_concurrent_fetches = a.jobs;
  if (!a.domain.empty()) config.domain_filter = detail::to_lower(a.domain);
  config.validate();

  auto stop = a.stop_words.empty() ? StopList::builtin() : StopList::from_file(a.stop_words);
  std::unique_ptr<Fetcher> base;
  if (!a.offline.empty()) base = std::make_unique<OfflineFetcher>(a.offline);
  else base = std::make_unique<HttpFetcher>(config.politeness_delay, !a.no_robots);
  std::unique_ptr<Fetcher> cached;
  Fetcher* fetcher = base.get();
  if (const char* cache = std::getenv("LINKTOPO_CACHE"); cache && *cache && a.offline.empty()) {
    cached = std::make_unique<CachingFetcher>(*base, cache);
    fetcher = cached.get();
  }

  auto seeds = load_seeds(a.seeds);
  { std::ofstream truncate(a.out, std::ios::binary | std::ios::trunc); }
  StoreWriter writer(a.out);
  for (const auto& line : provenance(sub)) writer.comment(line);
  CrawlOptions options{&stop, [&](const PageRecord& r) { writer.append(r); }};

  std::vector<TopicSeed> validated;
  std::size_t pages = 0;
  for (const auto& seed : seeds) {
    try {
      auto res = crawl_topic(seed, config, *fetcher, options);
      pages += res.records.size();
      validated.push_back(std::move(res.seed));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::SourceUnreachable && e.kind() != ErrorKind::TooFewLinks) throw;
      io.err << "warning: topic " << seed.topic_id << " skipped: " << e.what() << '\n';
    }
  }
  if (validated.empty()) throw Error(ErrorKind::InsufficientData, "no topic could be crawled");
  save_seeds(a.out + ".seeds.json", validated);
  io.err << "crawled " << validated.size() << " topics, " << pages << " records -> " << a.out << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct AnalyzeArgs {
  std::string store, seeds, out, truth;
  int depth = 3;
  std::size_t jobs = default_jobs();
};

inline void add_analyze(CLI::App& app, AnalyzeArgs& a) {
  auto* c = app.add_subcommand("analyze", "Per-topic, per-depth metrics as CSV");
  c->add_option("--store", a.store, "Crawl store")->required()->check(CLI::ExistingFile);
  c->add_option("--seeds", a.seeds, "Seeds JSON (the validated seeds written by crawl)")
      ->required()
      ->check(CLI::ExistingFile);
  c->add_option("--out", a.out, "CSV output ('-' for stdout)")->required();
  c->add_option("--depth", a.depth, "Maximum depth in the store")->check(CLI::Range(0, 64));
  c->add_option("--truth", a.truth, "Ground truth of a synthetic corpus: relevance labels and generality")
      ->check(CLI::ExistingFile);
  c->add_option("--jobs", a.jobs, "Worker threads")->check(CLI::PositiveNumber);
}

inline int do_analyze(const CLI::App& sub, const AnalyzeArgs& a, Streams io) {
  auto store = store_load(a.store);
  for (const auto& w : store.warnings) io.err << "warning: " << w << '\n';
  auto seeds = load_seeds(a.seeds);
  std::optional<std::map<std::string, TopicTruth>> truth;
  if (!a.truth.empty()) truth = load_ground_truth(a.truth).relevance();
  auto analysis = analyze(store.records, seeds, a.depth, truth ? &*truth : nullptr, a.jobs);
  for (const auto& w : analysis.warnings) io.err << "warning: " << w << '\n';
  std::ostringstream csv;
  write_metrics_csv(csv, analysis, provenance(sub));
  emit(a.out, io.out, csv.str());
  return 0;
}

// ---------------------------------------------------------------------------

struct FitArgs {
  std::string model, in, out, curve;
  std::optional<double> sigma_inf;
  double threshold = 2.0;
};

inline void add_fit(CLI::App& app, FitArgs& a) {
  auto* c = app.add_subcommand("fit", "Fit a decay model to an analyze CSV");
  c->add_option("--model", a.model, "similarity or likelihood")
      ->required()
      ->check(CLI::IsMember({"similarity", "likelihood"}));
  c->add_option("--in", a.in, "Metrics CSV from analyze")->required()->check(CLI::ExistingFile);
  c->add_option("--out", a.out, "JSON output (default stdout)");
  c->add_option("--sigma-inf", a.sigma_inf, "Noise level; defaults to the CSV's sigma_inf");
  c->add_option("--threshold", a.threshold, "Likelihood threshold defining delta*");
  c->add_option("--curve", a.curve, "Also write the fitted curve as CSV: delta,fitted");
}

inline int do_fit(const CLI::App& sub, const FitArgs& a, Streams io) {
  auto table = read_metrics_csv(a.in);
  auto model = a.model == "similarity" ? FitModel::Similarity : FitModel::Likelihood;
  double sigma_inf = 0;
  if (model == FitModel::Similarity) {
    if (a.sigma_inf) sigma_inf = *a.sigma_inf;
    else if (auto it = table.metadata.find("sigma_inf"); it != table.metadata.end()) sigma_inf = parse_double(it->second);
    else throw Error(ErrorKind::InsufficientData, a.in + " has no sigma_inf line; pass --sigma-inf");
  }
  auto report = run_fit(table.points, model, sigma_inf, a.threshold);
  auto j = to_json(report);
  j["tool_version"] = kToolVersion;
  j["config_digest"] = config_digest(sub);
  emit(a.out, io.out, j.dump(2) + "\n");

  if (!a.curve.empty()) {
    double top = 0;
    for (const auto& p : fit_points(table.points, model)) top = std::max(top, p.x);
    std::ostringstream c;
    for (const auto& line : provenance(sub)) c << "# " << line << '\n';
    c << "delta,fitted\n";
    const int steps = 200;
    for (int i = 1; i <= steps; ++i) {
      double x = top * 1.25 * i / steps;
      c << format_double(x) << ',' << format_double(evaluate(report.fit, x)) << '\n';
    }
    emit(a.curve, io.out, c.str());
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct CompareArgs {
  std::vector<std::string> fits;
  std::string table, out;
  double confidence = 0.683;
};

inline void add_compare(CLI::App& app, CompareArgs& a) {
  auto* c = app.add_subcommand("compare-domains", "Significance graph between per-domain similarity fits");
  c->add_option("fits", a.fits, "label=fit.json pairs");
  c->add_option("--table", a.table, "CSV with domain,alpha1,alpha1_stderr,alpha2,alpha2_stderr")
      ->check(CLI::ExistingFile);
  c->add_option("--confidence", a.confidence, "Two-sided confidence of the intervals")
      ->check(CLI::Range(0.0, 1.0));
  c->add_option("--out", a.out, "Edge list output (default stdout)");
}

inline std::map<std::string, DecayFit> read_fit_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  std::map<std::string, DecayFit> fits;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 5) throw Error(ErrorKind::StoreFormat, path + ": expected 5 fields in '" + line + "'");
    DecayFit fit;
    fit.model = SimilarityDecay::kName;
    fit.params = {parse_double(f[1]), parse_double(f[3])};
    fit.stderr_ = {parse_double(f[2]), parse_double(f[4])};
    fit.converged = true;
    fits[f[0]] = fit;
  }
  return fits;
}

inline int do_compare(const CLI::App& sub, const CompareArgs& a, Streams io) {
  std::map<std::string, DecayFit> fits;
  if (!a.table.empty()) fits = read_fit_table(a.table);
  for (const auto& spec : a.fits) {
    auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) throw Error(ErrorKind::InvalidArgument, "expected label=fit.json: " + spec);
    std::ifstream in(spec.substr(eq + 1));
    if (!in) throw Error(ErrorKind::Io, "cannot open " + spec.substr(eq + 1));
    try {
      fits[spec.substr(0, eq)] = decay_fit_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::StoreFormat, spec.substr(eq + 1) + ": " + e.what());
    }
  }
  if (fits.size() < 2) throw Error(ErrorKind::InsufficientData, "compare-domains needs at least two fits");
  double sigmas = sigmas_for_confidence(a.confidence);
  auto graph = compare_domains(fits, sigmas);
  std::string text;
  for (const auto& line : provenance(sub)) text += "# " + line + "\n";
  emit(a.out, io.out, text + graph.to_text(sigmas));
  return 0;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  double G = 0, R1 = 0;
  std::size_t steps = 1000000, burn_in = 1000;
  std::uint64_t seed = 1;
  std::string out;
};

inline void add_simulate(CLI::App& app, SimulateArgs& a) {
  auto* c = app.add_subcommand("simulate", "Monte Carlo check of the stationary hit rate");
  c->add_option("--G", a.G, "Generality (prior relevance probability)")->required();
  c->add_option("--R1", a.R1, "Probability that a link from a relevant page leads to a relevant page")->required();
  c->add_option("--steps", a.steps, "Crawler steps, burn-in included");
  c->add_option("--burn-in", a.burn_in, "Steps discarded before counting");
  c->add_option("--seed", a.seed, "Random seed");
  c->add_option("--out", a.out, "JSON output (default stdout)");
}

inline int do_simulate(const CLI::App& sub, const SimulateArgs& a, Streams io) {
  double eta = stationary_hit_rate(a.G, a.R1);
  auto sim = simulate_random_crawler(a.R1, a.G, a.steps, a.seed, true, a.burn_in);
  nlohmann::ordered_json j;
  j["G"] = a.G;
  j["R1"] = a.R1;
  j["eta_star"] = eta;
  j["rate"] = sim.rate;
  j["stderr"] = sim.stderr_;
  j["z"] = sim.stderr_ > 0 ? (sim.rate - eta) / sim.stderr_ : 0.0;
  j["within_2se"] = std::abs(sim.rate - eta) <= 2 * sim.stderr_;
  j["steps"] = sim.steps;
  j["burn_in"] = sim.burn_in;
  j["lambda1"] = a.R1 / a.G;
  j["beats_prior"] = eta > a.G;
  j["tool_version"] = kToolVersion;
  j["config_digest"] = config_digest(sub);
  emit(a.out, io.out, j.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------

struct GenArgs {
  std::string spec, out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> topics;
  std::size_t jobs = default_jobs();
};

inline void add_gen(CLI::App& app, GenArgs& a) {
  auto* c = app.add_subcommand("gen-synth", "Generate a synthetic corpus with planted decay");
  c->add_option("--spec", a.spec, "Synth spec JSON (defaults when omitted)")->check(CLI::ExistingFile);
  c->add_option("--out", a.out, "Output corpus directory")->required();
  c->add_option("--seed", a.seed, "Override the spec's rng_seed");
  c->add_option("--topics", a.topics, "Override the spec's n_topics");
  c->add_option("--jobs", a.jobs, "Worker threads")->check(CLI::PositiveNumber);
}

inline int do_gen(const CLI::App&, const GenArgs& a, Streams io) {
  SynthSpec spec = a.spec.empty() ? SynthSpec{} : load_synth_spec(a.spec);
  if (a.seed) spec.rng_seed = *a.seed;
  if (a.topics) spec.n_topics = *a.topics;
  auto truth = generate(spec, a.out, GenerateOptions{a.jobs});
  std::size_t pages = 0;
  for (const auto& t : truth.topics)
    for (auto n : t.layer_sizes) pages += n;
  io.err << "generated " << truth.topics.size() << " topics, " << pages << " pages -> " << a.out << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct CheckArgs {
  std::string corpus, out;
  double threshold = 2.0;
  std::size_t jobs = default_jobs();
};

inline void add_check(CLI::App& app, CheckArgs& a) {
  auto* c = app.add_subcommand("self-check", "Crawl, analyze and fit a synthetic corpus against its ground truth");
  c->add_option("corpus", a.corpus, "Corpus directory from gen-synth")->required()->check(CLI::ExistingDirectory);
  c->add_option("--out", a.out, "JSON report (default stdout)");
  c->add_option("--threshold", a.threshold, "Likelihood threshold defining delta*");
  c->add_option("--jobs", a.jobs, "Worker threads")->check(CLI::PositiveNumber);
}

inline int do_check(const CLI::App& sub, const CheckArgs& a, Streams io) {
  auto rep = self_check(a.corpus, SelfCheckOptions{a.jobs, a.threshold});
  auto j = to_json(rep);
  j["tool_version"] = kToolVersion;
  j["config_digest"] = config_digest(sub);
  emit(a.out, io.out, j.dump(2) + "\n");
  auto pct = [](const std::optional<double>& v) { return v ? format_double(*v * 100) + "%" : std::string("n/a"); };
  io.err << "alpha1 relative error " << pct(rep.alpha1_rel_error) << ", alpha2 relative error "
         << pct(rep.alpha2_rel_error);
  if (rep.delta_star_error) io.err << ", delta* off by " << format_double(*rep.delta_star_error);
  io.err << '\n';
  for (const auto& n : rep.notes) io.err << "note: " << n << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

/// Exit codes: 0 success, 1 error from the library, 2 usage error.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Link topology versus lexical and semantic content of Web pages", "linktopo"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON config file; flags override its values");
  app.allow_config_extras(CLI::config_extras_mode::error);

  CrawlArgs crawl;
  AnalyzeArgs analyze_args;
  FitArgs fit;
  CompareArgs compare;
  SimulateArgs simulate;
  GenArgs gen;
  CheckArgs check;
  add_crawl(app, crawl);
  add_analyze(app, analyze_args);
  add_fit(app, fit);
  add_compare(app, compare);
  add_simulate(app, simulate);
  add_gen(app, gen);
  add_check(app, check);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n' << "run 'linktopo --help' for usage\n";
    return 2;
  }

  Streams io{out, err};
  const auto* sub = app.get_subcommands().front();
  const auto& name = sub->get_name();
  try {
    if (name == "crawl") return do_crawl(*sub, crawl, io);
    if (name == "analyze") return do_analyze(*sub, analyze_args, io);
    if (name == "fit") return do_fit(*sub, fit, io);
    if (name == "compare-domains") return do_compare(*sub, compare, io);
    if (name == "simulate") return do_simulate(*sub, simulate, io);
    if (name == "gen-synth") return do_gen(*sub, gen, io);
    if (name == "self-check") return do_check(*sub, check, io);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<const char*> argv{"linktopo"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace linktopo::cli
