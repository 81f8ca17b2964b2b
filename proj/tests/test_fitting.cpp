#include <gtest/gtest.h>

#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <random>

#include "linktopo/fitting.hpp"

using namespace linktopo;

namespace {

template <class F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no linktopo::Error thrown";
  return ErrorKind::Io;
}

constexpr double kSigmaInf = 0.0318;

double sim_model(double x, double a1, double a2, double s = kSigmaInf) {
  return s + (1 - s) * std::exp(-a1 * std::pow(x, a2));
}

double lam_model(double x, double a3, double a4, double a5) { return 1 + a3 * std::exp(-a4 * std::pow(x, a5)); }

// 100 topics x 3 depths, deltas spread like a depth-3 crawl.
std::vector<DataPoint> similarity_dataset(std::uint64_t seed, double noise) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d1(0.8, 0.95), d2(1.5, 2.0), d3(2.4, 2.95);
  std::normal_distribution<double> eps(0.0, noise);
  std::vector<DataPoint> pts;
  for (int t = 0; t < 100; ++t)
    for (auto* dist : {&d1, &d2, &d3}) {
      double x = (*dist)(rng);
      pts.push_back({x, sim_model(x, 1.8, 0.6) + (noise > 0 ? eps(rng) : 0.0)});
    }
  return pts;
}

double sse(const DecayFit& f, const std::vector<DataPoint>& pts) {
  double s = 0;
  for (const auto& p : pts) {
    double r = p.y - evaluate(f, p.x);
    s += r * r;
  }
  return s;
}

DecayFit fit_with(double a1, double e1, double a2, double e2) {
  DecayFit f;
  f.model = SimilarityDecay::kName;
  f.params = {a1, a2};
  f.stderr_ = {e1, e2};
  return f;
}

}  // namespace

TEST(SimilarityFit, NoiselessRecovery) {
  auto pts = similarity_dataset(1, 0);
  auto fit = fit_similarity_decay(pts, kSigmaInf);
  ASSERT_TRUE(fit.converged);
  EXPECT_NEAR(fit.params[0], 1.8, 1e-6);
  EXPECT_NEAR(fit.params[1], 0.6, 1e-6);
  double sy = 0;
  for (const auto& p : pts) sy += p.y * p.y;
  EXPECT_LE(fit.sse, 1e-18 * sy);
  ASSERT_TRUE(fit.sigma_inf);
  EXPECT_EQ(*fit.sigma_inf, kSigmaInf);
  EXPECT_DOUBLE_EQ(evaluate(fit, 0.0), 1.0);
}

TEST(SimilarityFit, NoisyRecoveryMostSeeds) {
  int ok = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    auto fit = fit_similarity_decay(similarity_dataset(1000 + s, 0.005), kSigmaInf);
    if (std::abs(fit.params[0] / 1.8 - 1) <= 0.05 && std::abs(fit.params[1] / 0.6 - 1) <= 0.05) ++ok;
  }
  EXPECT_GE(ok, 95);
}

TEST(SimilarityFit, PerturbingByStderrRaisesSse) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto pts = similarity_dataset(77 + s, 0.005);
    auto fit = fit_similarity_decay(pts, kSigmaInf);
    ASSERT_TRUE(fit.converged);
    double base = sse(fit, pts);
    for (std::size_t i = 0; i < 2; ++i) {
      EXPECT_GE(fit.stderr_[i], 0.0);
      for (double sign : {-1.0, 1.0}) {
        auto p = fit;
        p.params[i] += sign * fit.stderr_[i];
        EXPECT_GT(sse(p, pts), base);
      }
    }
  }
}

TEST(SimilarityFit, Preconditions) {
  std::vector<DataPoint> two{{1, 0.5}, {2, 0.3}};
  EXPECT_EQ(kind_of([&] { fit_similarity_decay(two, kSigmaInf); }), ErrorKind::Precondition);
  EXPECT_EQ(kind_of([&] { fit_similarity_decay(similarity_dataset(1, 0), 1.0); }), ErrorKind::Precondition);
}

TEST(LikelihoodFit, NoiselessRecovery) {
  std::vector<DataPoint> pts;
  for (int i = 0; i <= 110; ++i) {
    double x = 0.5 + 5.5 * i / 110.0;
    pts.push_back({x, lam_model(x, 1000, 0.002, 5.5)});
  }
  auto fit = fit_likelihood_decay(pts);
  ASSERT_TRUE(fit.converged);
  EXPECT_NEAR(fit.params[0] / 1000, 1, 1e-4);
  EXPECT_NEAR(fit.params[1] / 0.002, 1, 1e-4);
  EXPECT_NEAR(fit.params[2] / 5.5, 1, 1e-4);
  EXPECT_FALSE(fit.degenerate);
}

TEST(LikelihoodFit, FlatDataIsDegenerate) {
  std::vector<DataPoint> pts;
  for (int i = 1; i <= 12; ++i) pts.push_back({0.25 * i, 1.0});
  auto fit = fit_likelihood_decay(pts);
  EXPECT_TRUE(fit.degenerate);
  EXPECT_NEAR(fit.params[0], 0.0, 1e-6);
}

TEST(LikelihoodFit, ThreePointsRejected) {
  std::vector<DataPoint> pts{{1, 5}, {2, 3}, {3, 1.5}};
  EXPECT_EQ(kind_of([&] { fit_likelihood_decay(pts); }), ErrorKind::Precondition);
}

TEST(CriticalDistance, ReferenceParameters) {
  DecayFit f;
  f.model = LikelihoodDecay::kName;
  f.params = {1000, 0.002, 5.5};
  double ds = critical_distance(f, 2.0);
  EXPECT_NEAR(ds, 4.40, 0.01);
  EXPECT_NEAR(lam_model(ds, 1000, 0.002, 5.5), 2.0, 1e-6);
  EXPECT_NEAR(ds, std::pow(std::log(1000.0) / 0.002, 1 / 5.5), 1e-8);
}

TEST(CriticalDistance, BoundaryAndNoCrossing) {
  DecayFit f;
  f.model = LikelihoodDecay::kName;
  f.params = {1, 0.5, 2};
  EXPECT_EQ(critical_distance(f, 2.0), 0.0);
  f.params = {3, 0.5, 2};
  EXPECT_EQ(kind_of([&] { critical_distance(f, 1 + 3 + 1e-9); }), ErrorKind::NoCrossing);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> a3(1.5, 1e4), a4(1e-3, 1), a5(0.5, 7), th(1.1, 2.5);
  for (int i = 0; i < 200; ++i) {
    f.params = {a3(rng), a4(rng), a5(rng)};
    double t = std::min(th(rng), f.params[0]);
    double ds = critical_distance(f, t);
    EXPECT_NEAR(lam_model(ds, f.params[0], f.params[1], f.params[2]), t, 1e-6);
  }
}

TEST(Pearson, PerfectAnticorrelation) {
  std::vector<DataPoint> pts;
  for (int i = 0; i < 10; ++i) pts.push_back({double(i), 5 - 2.0 * i});
  auto c = pearson(pts);
  EXPECT_DOUBLE_EQ(c.rho, -1.0);
  EXPECT_EQ(c.p_value, 0.0);
}

TEST(Pearson, MatchesDirectDefinition) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 3 + rng() % 300;
    std::vector<DataPoint> pts;
    for (std::size_t i = 0; i < n; ++i) {
      double x = g(rng);
      pts.push_back({x, 0.3 * x + g(rng)});
    }
    long double mx = 0, my = 0;
    for (const auto& p : pts) {
      mx += p.x;
      my += p.y;
    }
    mx /= n;
    my /= n;
    long double cov = 0, vx = 0, vy = 0;
    for (const auto& p : pts) {
      cov += (p.x - mx) * (p.y - my);
      vx += (p.x - mx) * (p.x - mx);
      vy += (p.y - my) * (p.y - my);
    }
    double rho = static_cast<double>((cov / (n - 1)) / (std::sqrt(vx / (n - 1)) * std::sqrt(vy / (n - 1))));
    auto c = pearson(pts);
    EXPECT_NEAR(c.rho, rho, 1e-12);
    // Two-sided p from the regularized incomplete beta.
    double dof = double(n - 2), t2 = rho * rho * dof / (1 - rho * rho);
    double p = boost::math::ibeta(dof / 2, 0.5, dof / (dof + t2));
    EXPECT_NEAR(c.p_value, p, 1e-10);
  }
}

TEST(Pearson, IndependentSeriesRarelyCorrelated) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0, 1);
  int small = 0;
  for (int s = 0; s < 500; ++s) {
    std::vector<DataPoint> pts;
    for (int i = 0; i < 300; ++i) pts.push_back({u(rng), u(rng)});
    if (std::abs(pearson(pts).rho) < 0.2) ++small;
  }
  EXPECT_GE(small, 495);
}

TEST(Pearson, ConstantSeriesUndefined) {
  std::vector<DataPoint> pts{{1, 2}, {2, 2}, {3, 2}};
  EXPECT_EQ(kind_of([&] { pearson(pts); }), ErrorKind::UndefinedCorrelation);
}

TEST(CompareDomains, PublishedTable) {
  std::map<std::string, DecayFit> fits{{"edu", fit_with(1.11, 0.03, 0.87, 0.05)},
                                       {"net", fit_with(1.16, 0.04, 0.88, 0.05)},
                                       {"gov", fit_with(1.22, 0.07, 1.00, 0.09)},
                                       {"org", fit_with(1.38, 0.03, 0.93, 0.05)},
                                       {"com", fit_with(1.63, 0.04, 1.13, 0.05)}};
  auto g = compare_domains(fits, sigmas_for_confidence(0.683));
  ASSERT_NE(g.edge("edu", "com"), nullptr);
  EXPECT_EQ(g.edge("edu", "com")->strength, EdgeStrength::Alpha1AndAlpha2);
  EXPECT_EQ(g.edge("edu", "net"), nullptr);
  EXPECT_EQ(g.edge("net", "edu"), nullptr);
  ASSERT_NE(g.edge("org", "com"), nullptr);
  EXPECT_EQ(g.edge("org", "com")->strength, EdgeStrength::Alpha1AndAlpha2);
  ASSERT_NE(g.edge("edu", "org"), nullptr);
  EXPECT_EQ(g.edge("edu", "org")->strength, EdgeStrength::Alpha1Only);
  EXPECT_EQ(g.nodes.size(), 5u);
}

TEST(CompareDomains, IdenticalFitsGiveEmptyGraph) {
  std::map<std::string, DecayFit> fits{{"a", fit_with(1, 0.1, 1, 0.1)}, {"b", fit_with(1, 0.1, 1, 0.1)}};
  EXPECT_TRUE(compare_domains(fits).edges.empty());
}

TEST(CompareDomains, AntisymmetricNoSelfEdges) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> a(0.5, 2), e(0.001, 0.2);
  for (int trial = 0; trial < 200; ++trial) {
    std::map<std::string, DecayFit> fits;
    for (int k = 0; k < 5; ++k) fits["d" + std::to_string(k)] = fit_with(a(rng), e(rng), a(rng), e(rng));
    auto g = compare_domains(fits);
    for (const auto& edge : g.edges) {
      EXPECT_NE(edge.from, edge.to);
      EXPECT_EQ(g.edge(edge.to, edge.from), nullptr);
      const auto& fa = fits[edge.from];
      const auto& fb = fits[edge.to];
      EXPECT_LT(fa.params[0] + fa.stderr_[0], fb.params[0] - fb.stderr_[0]);
    }
  }
}

TEST(CompareDomains, ConfidenceToSigmas) {
  EXPECT_EQ(sigmas_for_confidence(0.683), 1.0);
  EXPECT_NEAR(sigmas_for_confidence(0.95), 1.959964, 1e-6);
  EXPECT_EQ(kind_of([] { sigmas_for_confidence(1.0); }), ErrorKind::InvalidArgument);
}
