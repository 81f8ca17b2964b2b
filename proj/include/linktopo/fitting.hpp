#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "linktopo/error.hpp"

namespace linktopo {

struct DataPoint {
  double x = 0;  // link distance
  double y = 0;
};

/// sigma(delta) = s_inf + (1 - s_inf) * exp(-a1 * delta^a2), s_inf fixed.
struct SimilarityDecay {
  static constexpr int kParams = 2;
  static constexpr const char* kName = "similarity-decay";
  using Params = Eigen::Matrix<double, kParams, 1>;

  double sigma_inf = 0;

  double value(double x, const Params& p) const {
    return sigma_inf + (1.0 - sigma_inf) * std::exp(-p[0] * std::pow(x, p[1]));
  }
  Eigen::Matrix<double, 1, kParams> jacobian(double x, const Params& p) const {
    double xp = std::pow(x, p[1]);
    double e = std::exp(-p[0] * xp);
    Eigen::Matrix<double, 1, kParams> j;
    j << -(1.0 - sigma_inf) * xp * e, -(1.0 - sigma_inf) * p[0] * xp * std::log(x) * e;
    return j;
  }
  static bool admissible(const Params& p) { return p[1] > 0 && p[1] < 50 && std::abs(p[0]) < 1e6; }
  static double amplitude(const Params& p) { return p[0]; }

  static std::vector<Params> default_grid() {
    std::vector<Params> grid;
    for (double a1 : {0.5, 1.0, 2.0, 4.0})
      for (double a2 : {0.3, 0.6, 1.0, 1.5}) grid.emplace_back(a1, a2);
    return grid;
  }
};

/// lambda(delta) = 1 + a3 * exp(-a4 * delta^a5).
struct LikelihoodDecay {
  static constexpr int kParams = 3;
  static constexpr const char* kName = "likelihood-decay";
  using Params = Eigen::Matrix<double, kParams, 1>;

  double value(double x, const Params& p) const { return 1.0 + p[0] * std::exp(-p[1] * std::pow(x, p[2])); }
  Eigen::Matrix<double, 1, kParams> jacobian(double x, const Params& p) const {
    double xp = std::pow(x, p[2]);
    double e = std::exp(-p[1] * xp);
    Eigen::Matrix<double, 1, kParams> j;
    j << e, -p[0] * xp * e, -p[0] * p[1] * xp * std::log(x) * e;
    return j;
  }
  static bool admissible(const Params& p) { return p[2] > 0 && p[2] < 50 && std::abs(p[1]) < 1e6; }
  static double amplitude(const Params& p) { return p[0]; }

  static std::vector<Params> default_grid() {
    std::vector<Params> grid;
    for (double a3 : {10.0, 1e2, 1e3, 1e4})
      for (double a4 : {1e-3, 1e-2, 1e-1})
        for (double a5 : {1.0, 3.0, 5.0, 7.0}) grid.emplace_back(a3, a4, a5);
    return grid;
  }
};

struct DecayFit {
  std::string model;
  std::vector<double> params;
  std::vector<double> stderr_;
  double sse = 0;
  std::size_t n_points = 0;
  bool converged = false;
  bool degenerate = false;
  double gradient_norm = 0;
  int iterations = 0;
  std::optional<double> sigma_inf;  // fixed input of the similarity model

  double param(std::size_t i) const { return params.at(i); }
  double error(std::size_t i) const { return stderr_.at(i); }
};

/// Thrown when no start converges; carries the lowest-SSE partial fit.
class NonConvergenceError : public Error {
 public:
  explicit NonConvergenceError(DecayFit best)
      : Error(ErrorKind::NonConvergence, "no start of " + best.model + " converged"), best_(std::move(best)) {}
  const DecayFit& best() const { return best_; }

 private:
  DecayFit best_;
};

struct FitOptions {
  int max_iterations = 500;
  double relative_tolerance = 1e-12;
};

namespace detail {

template <class Model>
double sum_squares(const Model& model, const std::vector<DataPoint>& pts, const typename Model::Params& p) {
  double s = 0;
  for (const auto& pt : pts) {
    double r = pt.y - model.value(pt.x, p);
    s += r * r;
  }
  return s;
}

template <class Model>
void normal_equations(const Model& model, const std::vector<DataPoint>& pts, const typename Model::Params& p,
                      Eigen::Matrix<double, Model::kParams, Model::kParams>& jtj,
                      Eigen::Matrix<double, Model::kParams, 1>& jtr) {
  jtj.setZero();
  jtr.setZero();
  for (const auto& pt : pts) {
    auto j = model.jacobian(pt.x, p);
    double r = pt.y - model.value(pt.x, p);
    jtj.noalias() += j.transpose() * j;
    jtr.noalias() += j.transpose() * r;
  }
}

struct StartResult {
  std::vector<double> params;
  double sse = std::numeric_limits<double>::infinity();
  bool converged = false;
  int iterations = 0;
};

// Damped Gauss-Newton from one start. Damping is multiplied by 10 after a
// rejected step and divided by 10 after an accepted one.
template <class Model>
StartResult levenberg_marquardt(const Model& model, const std::vector<DataPoint>& pts, typename Model::Params p,
                                const FitOptions& opt, double y_scale) {
  using Mat = Eigen::Matrix<double, Model::kParams, Model::kParams>;
  using Vec = Eigen::Matrix<double, Model::kParams, 1>;
  StartResult out;
  double sse = sum_squares(model, pts, p);
  if (!std::isfinite(sse)) return out;
  double damping = 1e-3;
  Mat jtj;
  Vec jtr;
  normal_equations(model, pts, p, jtj, jtr);
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    if (sse <= 1e-30 * y_scale) {
      out.converged = true;
      break;
    }
    Mat a = jtj;
    for (int i = 0; i < Model::kParams; ++i) a(i, i) += damping * std::max(jtj(i, i), 1e-300);
    Vec step = a.ldlt().solve(jtr);
    Vec trial = p + step;
    double trial_sse = step.allFinite() && Model::admissible(trial) ? sum_squares(model, pts, trial)
                                                                      : std::numeric_limits<double>::infinity();
    if (std::isfinite(trial_sse) && trial_sse < sse) {
      double rel = (sse - trial_sse) / sse;
      p = trial;
      sse = trial_sse;
      damping = std::max(damping / 10.0, 1e-15);
      normal_equations(model, pts, p, jtj, jtr);
      if (rel < opt.relative_tolerance) {
        out.converged = true;
        ++it;
        break;
      }
    } else {
      damping *= 10.0;
      if (damping > 1e16) {
        // No descent direction left at working precision.
        out.converged = true;
        ++it;
        break;
      }
    }
  }
  out.params.assign(p.data(), p.data() + Model::kParams);
  out.sse = sse;
  out.iterations = it;
  return out;
}

}  // namespace detail

/// Multi-start damped least squares. The lowest-SSE converged start wins;
/// standard errors come from s^2 (J^T J)^-1 at that optimum.
template <class Model>
DecayFit nls_fit(const Model& model, const std::vector<DataPoint>& points,
                 const std::vector<typename Model::Params>& grid, const FitOptions& opt = {}) {
  using Mat = Eigen::Matrix<double, Model::kParams, Model::kParams>;
  using Vec = Eigen::Matrix<double, Model::kParams, 1>;
  const std::size_t min_points = Model::kParams + 1;
  if (points.size() < min_points)
    throw Error(ErrorKind::Precondition, std::string(Model::kName) + " needs at least " + std::to_string(min_points) +
                                             " points, got " + std::to_string(points.size()));
  for (const auto& pt : points)
    if (!(pt.x > 0) || !std::isfinite(pt.y))
      throw Error(ErrorKind::Precondition, "fit points need delta > 0 and finite y");
  if (grid.empty()) throw Error(ErrorKind::Precondition, "empty start grid");

  double y_scale = 0;
  for (const auto& pt : points) y_scale += pt.y * pt.y;
  y_scale = std::max(y_scale, 1e-300);

  detail::StartResult best, best_any;
  for (const auto& start : grid) {
    auto r = detail::levenberg_marquardt(model, points, start, opt, y_scale);
    if (r.sse < best_any.sse) best_any = r;
    if (r.converged && r.sse < best.sse) best = r;
  }

  auto finish = [&](const detail::StartResult& r) {
    DecayFit fit;
    fit.model = Model::kName;
    fit.params = r.params;
    fit.sse = r.sse;
    fit.n_points = points.size();
    fit.converged = r.converged;
    fit.iterations = r.iterations;
    if (r.params.empty()) return fit;
    Vec p = Eigen::Map<const Vec>(r.params.data());
    Mat jtj;
    Vec jtr;
    detail::normal_equations(model, points, p, jtj, jtr);
    fit.gradient_norm = jtr.norm();
    double dof = static_cast<double>(points.size()) - Model::kParams;
    double s2 = r.sse / dof;
    Eigen::FullPivLU<Mat> lu(jtj);
    lu.setThreshold(1e-12);
    fit.stderr_.assign(Model::kParams, std::numeric_limits<double>::infinity());
    bool singular = !lu.isInvertible();
    if (!singular) {
      Mat cov = lu.inverse() * s2;
      for (int i = 0; i < Model::kParams; ++i) fit.stderr_[i] = std::sqrt(std::max(cov(i, i), 0.0));
    }
    fit.degenerate = singular || std::abs(Model::amplitude(p)) < 1e-6;
    return fit;
  };

  if (best.params.empty()) throw NonConvergenceError(finish(best_any));
  return finish(best);
}

inline DecayFit fit_similarity_decay(const std::vector<DataPoint>& points, double sigma_inf,
                                     const FitOptions& opt = {}) {
  if (!(sigma_inf >= 0 && sigma_inf < 1)) throw Error(ErrorKind::Precondition, "sigma_inf must lie in [0, 1)");
  SimilarityDecay model{sigma_inf};
  auto fit = nls_fit(model, points, SimilarityDecay::default_grid(), opt);
  fit.sigma_inf = sigma_inf;
  return fit;
}

inline DecayFit fit_likelihood_decay(const std::vector<DataPoint>& points, const FitOptions& opt = {}) {
  return nls_fit(LikelihoodDecay{}, points, LikelihoodDecay::default_grid(), opt);
}

inline double evaluate(const DecayFit& fit, double x) {
  if (fit.model == SimilarityDecay::kName) {
    SimilarityDecay m{fit.sigma_inf.value_or(0.0)};
    return m.value(x, SimilarityDecay::Params(fit.params[0], fit.params[1]));
  }
  return LikelihoodDecay{}.value(x, LikelihoodDecay::Params(fit.params[0], fit.params[1], fit.params[2]));
}

// ---------------------------------------------------------------------------

struct Correlation {
  double rho = 0;
  double p_value = 1;
  std::size_t n = 0;
};

/// Sample Pearson correlation with a two-sided t-test p-value (n-2 dof).
inline Correlation pearson(const std::vector<DataPoint>& points) {
  const auto n = points.size();
  if (n < 3) throw Error(ErrorKind::Precondition, "pearson needs at least 3 points");
  double mx = 0, my = 0;
  for (const auto& p : points) {
    mx += p.x;
    my += p.y;
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0, sxx = 0, syy = 0;
  for (const auto& p : points) {
    sxy += (p.x - mx) * (p.y - my);
    sxx += (p.x - mx) * (p.x - mx);
    syy += (p.y - my) * (p.y - my);
  }
  if (sxx == 0 || syy == 0) throw Error(ErrorKind::UndefinedCorrelation, "constant series");
  Correlation c;
  c.n = n;
  c.rho = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  double dof = static_cast<double>(n - 2);
  if (std::abs(c.rho) >= 1.0) {
    c.p_value = 0.0;
  } else {
    double t = c.rho * std::sqrt(dof / (1.0 - c.rho * c.rho));
    boost::math::students_t dist(dof);
    c.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  }
  return c;
}

// ---------------------------------------------------------------------------

enum class EdgeStrength { Alpha1Only, Alpha1AndAlpha2 };

inline std::string_view to_string(EdgeStrength s) {
  return s == EdgeStrength::Alpha1Only ? "alpha1-only" : "alpha1-and-alpha2";
}

struct SignificanceEdge {
  std::string from;  // decays more slowly (smaller alpha1)
  std::string to;
  EdgeStrength strength = EdgeStrength::Alpha1Only;
  friend bool operator==(const SignificanceEdge&, const SignificanceEdge&) = default;
};

struct SignificanceGraph {
  std::vector<std::string> nodes;
  std::vector<SignificanceEdge> edges;

  const SignificanceEdge* edge(const std::string& a, const std::string& b) const {
    for (const auto& e : edges)
      if (e.from == a && e.to == b) return &e;
    return nullptr;
  }

  /// "from -> to strength" per line, after a header comment.
  std::string to_text(double sigmas) const {
    std::string out = "# significance graph: interval half-width " + std::to_string(sigmas) + " stderr\n";
    out += "# nodes:";
    for (const auto& n : nodes) out += " " + n;
    out += "\n";
    for (const auto& e : edges) out += e.from + " -> " + e.to + " " + std::string(to_string(e.strength)) + "\n";
    return out;
  }
};

/// Half-width in standard errors of a central interval with the given
/// coverage. 68.3% maps to one standard error.
inline double sigmas_for_confidence(double confidence) {
  if (!(confidence > 0 && confidence < 1)) throw Error(ErrorKind::InvalidArgument, "confidence must be in (0, 1)");
  if (std::abs(confidence - 0.683) < 1e-9) return 1.0;
  return boost::math::quantile(boost::math::normal(), 0.5 + confidence / 2.0);
}

/// Edge a -> b when a's alpha1 interval lies entirely below b's; upgraded
/// when the alpha2 intervals are disjoint as well.
inline SignificanceGraph compare_domains(const std::map<std::string, DecayFit>& fits, double sigmas = 1.0) {
  SignificanceGraph g;
  for (const auto& [name, fit] : fits) {
    if (fit.params.size() < 2 || fit.stderr_.size() < 2)
      throw Error(ErrorKind::Precondition, "fit for " + name + " lacks parameters or standard errors");
    g.nodes.push_back(name);
  }
  auto disjoint_below = [&](double a, double ea, double b, double eb) { return a + sigmas * ea < b - sigmas * eb; };
  for (const auto& [a, fa] : fits) {
    for (const auto& [b, fb] : fits) {
      if (a == b) continue;
      if (!disjoint_below(fa.params[0], fa.stderr_[0], fb.params[0], fb.stderr_[0])) continue;
      bool a2 = disjoint_below(fa.params[1], fa.stderr_[1], fb.params[1], fb.stderr_[1]) ||
                disjoint_below(fb.params[1], fb.stderr_[1], fa.params[1], fa.stderr_[1]);
      g.edges.push_back({a, b, a2 ? EdgeStrength::Alpha1AndAlpha2 : EdgeStrength::Alpha1Only});
    }
  }
  return g;
}

/// Smallest delta >= 0 where the fitted likelihood model drops to
/// `threshold`, found by bisection to 1e-9.
inline double critical_distance(const DecayFit& fit, double threshold = 2.0) {
  if (fit.model != LikelihoodDecay::kName || fit.params.size() != 3)
    throw Error(ErrorKind::Precondition, "critical distance needs a likelihood-decay fit");
  const double a3 = fit.params[0], a4 = fit.params[1], a5 = fit.params[2];
  if (!(a4 > 0 && a5 > 0)) throw Error(ErrorKind::NoCrossing, "model does not decay");
  auto lambda = [&](double x) { return 1.0 + a3 * std::exp(-a4 * std::pow(x, a5)); };
  if (lambda(0.0) < threshold || threshold <= 1.0)
    throw Error(ErrorKind::NoCrossing, "lambda never reaches " + std::to_string(threshold));
  if (lambda(0.0) == threshold) return 0.0;
  double lo = 0.0, hi = 1.0;
  while (lambda(hi) > threshold) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) throw Error(ErrorKind::NoCrossing, "no crossing below 1e12");
  }
  while (hi - lo > 1e-9) {
    double mid = 0.5 * (lo + hi);
    (lambda(mid) > threshold ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace linktopo
