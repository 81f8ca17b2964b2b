#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "linktopo/cli.hpp"

using namespace linktopo;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / "linktopo_cli_test" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string strip_comments(const std::string& text) {
  std::istringstream in(text);
  std::string line, out;
  while (std::getline(in, line))
    if (line.empty() || line.front() != '#') out += line + "\n";
  return out;
}

std::string page(const std::string& words, const std::vector<std::string>& links) {
  std::string html = "<html><body><p>" + words + "</p>";
  for (const auto& l : links) html += "<a href=\"" + l + "\">x</a>";
  return html + "</body></html>";
}

// Two topics. t1: s1 -> {a, b}, a -> c, b -> a. t2: s2 -> {x, y}.
fs::path offline_web(const std::string& name) {
  auto dir = scratch(name);
  nlohmann::json manifest;
  auto add = [&](const std::string& url, const std::string& file, const std::string& html) {
    write(dir / file, html);
    manifest[url] = file;
  };
  add("http://s1.org/", "s1.html", page("graph theory", {"http://a.com/", "http://b.com/"}));
  add("http://a.com/", "a.html", page("graph theory", {"http://c.net/"}));
  add("http://b.com/", "b.html", page("graph theory", {"http://a.com/"}));
  add("http://c.net/", "c.html", page("graph theory", {}));
  add("http://s2.org/", "s2.html", page("apple orchard", {"http://x.com/", "http://y.com/"}));
  add("http://x.com/", "x.html", page("apple orchard", {}));
  add("http://y.com/", "y.html", page("apple orchard", {}));
  write(dir / "manifest.json", manifest.dump());
  write(dir / "seeds.json", R"([{"topic_id": "t1", "source_url": "http://s1.org/"},
                                {"topic_id": "t2", "source_url": "http://s2.org/"}])");
  return dir;
}

Result crawl_and_analyze(const fs::path& dir, const std::string& jobs) {
  auto store = (dir / "crawl.jsonl").string();
  auto c = run({"crawl", "--seeds", (dir / "seeds.json").string(), "--out", store, "--offline", dir.string(),
                "--depth", "2", "--min-links", "2", "--jobs", jobs});
  EXPECT_EQ(c.code, 0) << c.err;
  return run({"analyze", "--store", store, "--seeds", store + ".seeds.json", "--out", "-", "--depth", "2", "--jobs",
              jobs});
}

}  // namespace

TEST(Cli, VersionAndHelp) {
  auto v = run({"--version"});
  EXPECT_EQ(v.code, 0);
  EXPECT_EQ(v.out, std::string(kToolVersion) + "\n");
  auto h = run({"--help"});
  EXPECT_EQ(h.code, 0);
  EXPECT_NE(h.out.find("gen-synth"), std::string::npos);
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"simulate", "--G", "0.2", "--R1", "0.5", "--bogus"}).code, 2);
  EXPECT_EQ(run({"simulate", "--G", "0.2"}).code, 2);
  EXPECT_EQ(run({"fit", "--model", "cubic", "--in", "x.csv"}).code, 2);
  auto missing = run({"analyze", "--store", "/nonexistent/s.jsonl", "--seeds", "/nonexistent/s.json", "--out", "-"});
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.err.find("usage error"), std::string::npos);
}

TEST(Cli, LibraryErrorsExitOne) {
  auto dir = scratch("errors");
  write(dir / "short.csv", "topic_id,d,n_pages,delta,sigma,R,G,lambda\nt,0,1,0,1,1,0.2,\nt,1,5,0.8,0.5,0.4,0.2,2\n");
  auto fit = run({"fit", "--model", "similarity", "--in", (dir / "short.csv").string(), "--sigma-inf", "0.03"});
  EXPECT_EQ(fit.code, 1);
  EXPECT_NE(fit.err.find("error:"), std::string::npos);

  auto nosigma = run({"fit", "--model", "similarity", "--in", (dir / "short.csv").string()});
  EXPECT_EQ(nosigma.code, 1);

  write(dir / "bad.json", "{not json");
  auto bad = run({"gen-synth", "--spec", (dir / "bad.json").string(), "--out", (dir / "c").string()});
  EXPECT_EQ(bad.code, 1);

  EXPECT_EQ(run({"simulate", "--G", "0", "--R1", "0.5", "--steps", "100"}).code, 1);
}

TEST(Cli, AnalyzeHandComputedFixture) {
  auto dir = offline_web("fixture");
  auto r = crawl_and_analyze(dir, "1");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("# sigma_inf=0 stderr=0 pairs=2 pair_order=ordered\n"), std::string::npos) << r.out;

  // Every page of a topic carries the same words, so sigma is 1. G = 2 / 4 for
  // each topic. t1 depth 1 holds s1, a, b (a and b relevant); depth 2 adds c.
  std::vector<std::string> rows;
  std::istringstream in(strip_comments(r.out));
  for (std::string line; std::getline(in, line);) {
    if (rows.empty()) {
      rows.push_back(line);
      continue;
    }
    auto c1 = line.find(',', line.find(',', line.find(',', line.find(',') + 1) + 1) + 1);
    auto c2 = line.find(',', c1 + 1);
    EXPECT_NEAR(std::stod(line.substr(c1 + 1, c2 - c1 - 1)), 1.0, 1e-12) << line;
    rows.push_back(line.substr(0, c1) + line.substr(c2));
  }
  EXPECT_EQ(rows, (std::vector<std::string>{"topic_id,d,n_pages,delta,sigma,R,G,lambda",
                                            "t1,0,1,0,1,0.5,2",
                                            "t1,1,3,0.6666666666666666,0.6666666666666666,0.5,1.3333333333333333",
                                            "t1,2,4,1,0.5,0.5,1",
                                            "t2,0,1,0,1,0.5,2",
                                            "t2,1,3,0.6666666666666666,0.6666666666666666,0.5,1.3333333333333333",
                                            "t2,2,3,0.6666666666666666,0.6666666666666666,0.5,1.3333333333333333"}));

  auto seeds = load_seeds((dir / "crawl.jsonl").string() + ".seeds.json");
  ASSERT_EQ(seeds.size(), 2u);
  EXPECT_EQ(seeds[0].crawl_relevant_set, (std::vector<std::string>{"http://a.com/", "http://b.com/"}));
}

TEST(Cli, OutputsIndependentOfJobs) {
  auto dir = offline_web("jobs");
  auto one = crawl_and_analyze(dir, "1");
  auto store1 = slurp(dir / "crawl.jsonl");
  auto four = crawl_and_analyze(dir, "4");
  ASSERT_EQ(one.code, 0);
  ASSERT_EQ(four.code, 0);
  EXPECT_EQ(one.out, four.out);
  EXPECT_EQ(store1, slurp(dir / "crawl.jsonl"));

  auto g1 = scratch("jobs_g1"), g3 = scratch("jobs_g3");
  ASSERT_EQ(run({"gen-synth", "--out", g1.string(), "--topics", "4", "--jobs", "1"}).code, 0);
  ASSERT_EQ(run({"gen-synth", "--out", g3.string(), "--topics", "4", "--jobs", "3"}).code, 0);
  EXPECT_EQ(slurp(g1 / "ground_truth.json"), slurp(g3 / "ground_truth.json"));
  EXPECT_EQ(slurp(g1 / "manifest.json"), slurp(g3 / "manifest.json"));
}

TEST(Cli, DigestIgnoresPathsAndJobs) {
  auto a = run({"simulate", "--G", "0.25", "--R1", "0.25", "--steps", "2000", "--seed", "3"});
  auto dir = scratch("digest");
  auto b = run({"simulate", "--G", "0.25", "--R1", "0.25", "--steps", "2000", "--seed", "3", "--out",
                (dir / "s.json").string()});
  ASSERT_EQ(a.code, 0);
  ASSERT_EQ(b.code, 0);
  EXPECT_EQ(a.out, slurp(dir / "s.json"));
  auto c = run({"simulate", "--G", "0.25", "--R1", "0.25", "--steps", "2000", "--seed", "4"});
  EXPECT_NE(nlohmann::json::parse(a.out)["config_digest"], nlohmann::json::parse(c.out)["config_digest"]);
}

TEST(Cli, Simulate) {
  auto r = run({"simulate", "--G", "0.25", "--R1", "0.25", "--steps", "200000", "--seed", "7"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = nlohmann::json::parse(r.out);
  EXPECT_DOUBLE_EQ(j["eta_star"].get<double>(), 0.25);
  EXPECT_TRUE(j["within_2se"].get<bool>() || std::abs(j["z"].get<double>()) < 3);
  EXPECT_EQ(j["steps"].get<std::size_t>() + j["burn_in"].get<std::size_t>(), 200000u);
  EXPECT_FALSE(j["beats_prior"].get<bool>());

  auto hi = nlohmann::json::parse(run({"simulate", "--G", "0.2", "--R1", "0.6", "--steps", "5000"}).out);
  EXPECT_TRUE(hi["beats_prior"].get<bool>());
  EXPECT_DOUBLE_EQ(hi["eta_star"].get<double>(), 0.2 / 0.6);
}

TEST(Cli, ConfigFileWithOverride) {
  auto dir = scratch("config");
  write(dir / "cfg.json", R"({"simulate": {"G": 0.2, "R1": 0.6, "steps": 5000, "seed": 9}})");
  auto from_file = run({"--config", (dir / "cfg.json").string(), "simulate"});
  ASSERT_EQ(from_file.code, 0) << from_file.err;
  auto j = nlohmann::json::parse(from_file.out);
  EXPECT_DOUBLE_EQ(j["G"].get<double>(), 0.2);
  EXPECT_EQ(j["steps"].get<std::size_t>(), 4000u);

  auto flags = run({"simulate", "--G", "0.2", "--R1", "0.6", "--steps", "5000", "--seed", "9"});
  EXPECT_EQ(from_file.out, flags.out);

  auto overridden = run({"--config", (dir / "cfg.json").string(), "simulate", "--steps", "3000"});
  ASSERT_EQ(overridden.code, 0);
  EXPECT_EQ(nlohmann::json::parse(overridden.out)["steps"].get<std::size_t>(), 2000u);

  write(dir / "bad.json", R"({"simulate": {"G": 0.2, "R1": 0.6, "bogus": 1}})");
  EXPECT_EQ(run({"--config", (dir / "bad.json").string(), "simulate"}).code, 2);
}

TEST(Cli, CompareDomainsTable) {
  auto dir = scratch("compare");
  write(dir / "table.csv",
        "domain,alpha1,alpha1_stderr,alpha2,alpha2_stderr\n"
        "edu,1.11,0.03,0.87,0.05\n"
        "net,1.16,0.04,0.88,0.05\n"
        "gov,1.22,0.07,1.00,0.09\n"
        "org,1.38,0.03,0.93,0.05\n"
        "com,1.63,0.04,1.13,0.05\n");
  auto r = run({"compare-domains", "--table", (dir / "table.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("edu -> com alpha1-and-alpha2\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("org -> com alpha1-and-alpha2\n"), std::string::npos);
  EXPECT_NE(r.out.find("edu -> org alpha1-only\n"), std::string::npos);
  EXPECT_EQ(r.out.find("edu -> net"), std::string::npos);
  EXPECT_EQ(r.out.find("net -> edu"), std::string::npos);

  write(dir / "one.csv", "domain,alpha1,alpha1_stderr,alpha2,alpha2_stderr\nedu,1,0.1,1,0.1\n");
  EXPECT_EQ(run({"compare-domains", "--table", (dir / "one.csv").string()}).code, 1);
}

TEST(Cli, GenSynthFitAndSelfCheck) {
  auto dir = scratch("synth");
  auto corpus = dir / "corpus";
  auto g = run({"gen-synth", "--out", corpus.string(), "--topics", "12", "--jobs", "2"});
  ASSERT_EQ(g.code, 0) << g.err;
  ASSERT_TRUE(fs::exists(corpus / "seeds.json"));
  ASSERT_TRUE(fs::exists(corpus / "ground_truth.json"));

  auto store = (dir / "crawl.jsonl").string();
  ASSERT_EQ(run({"crawl", "--seeds", (corpus / "seeds.json").string(), "--out", store, "--offline", corpus.string(),
                 "--jobs", "2"})
                .code,
            0);
  auto csv = (dir / "metrics.csv").string();
  auto a = run({"analyze", "--store", store, "--seeds", store + ".seeds.json", "--out", csv, "--truth",
                (corpus / "ground_truth.json").string(), "--jobs", "2"});
  ASSERT_EQ(a.code, 0) << a.err;

  auto curve = (dir / "curve.csv").string();
  auto f = run({"fit", "--model", "similarity", "--in", csv, "--curve", curve});
  ASSERT_EQ(f.code, 0) << f.err;
  auto fit = nlohmann::json::parse(f.out);
  EXPECT_EQ(fit["model"], "similarity-decay");
  EXPECT_TRUE(fit["converged"].get<bool>());
  EXPECT_LT(fit["rho"].get<double>(), 0);
  EXPECT_NE(slurp(curve).find("delta,fitted\n"), std::string::npos);

  auto l = run({"fit", "--model", "likelihood", "--in", csv});
  ASSERT_EQ(l.code, 0) << l.err;
  EXPECT_EQ(nlohmann::json::parse(l.out)["model"], "likelihood-decay");

  auto s = run({"self-check", corpus.string(), "--jobs", "2"});
  ASSERT_EQ(s.code, 0) << s.err;
  EXPECT_NE(s.err.find("alpha1 relative error"), std::string::npos);
  auto rep = nlohmann::json::parse(s.out);
  EXPECT_EQ(rep["topics"].get<std::size_t>(), 12u);
}
