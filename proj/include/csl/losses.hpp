#ifndef CSL_LOSSES_HPP
#define CSL_LOSSES_HPP

#include "csl/data.hpp"
#include "csl/types.hpp"

#include <json.hpp>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace csl {

enum class LossKind { exponential, logistic, squared };

inline std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::exponential: return "exponential";
    case LossKind::logistic: return "logistic";
    case LossKind::squared: return "squared";
  }
  return "?";
}

inline LossKind loss_kind_from_string(const std::string& s) {
  if (s == "exponential" || s == "exp") return LossKind::exponential;
  if (s == "logistic") return LossKind::logistic;
  if (s == "squared" || s == "least_squares") return LossKind::squared;
  throw ConfigError("unknown loss kind: " + s);
}

// Scalar pieces as functions of the signed score z = w^T x.

inline double loss_scalar(LossKind k, double z) {
  switch (k) {
    case LossKind::exponential: return std::exp(-z);
    case LossKind::logistic: return z >= 0.0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
    case LossKind::squared: return (1.0 - z) * (1.0 - z);
  }
  return 0.0;
}

/// d loss / dz
inline double loss_deriv(LossKind k, double z) {
  switch (k) {
    case LossKind::exponential: return -std::exp(-z);
    case LossKind::logistic: {
      // -1/(1+e^z), evaluated without overflow
      if (z >= 0.0) {
        double e = std::exp(-z);
        return -e / (1.0 + e);
      }
      return -1.0 / (1.0 + std::exp(z));
    }
    case LossKind::squared: return -2.0 * (1.0 - z);
  }
  return 0.0;
}

inline double loss_second(LossKind k, double z) {
  switch (k) {
    case LossKind::exponential: return std::exp(-z);
    case LossKind::logistic: {
      double e = std::exp(-std::abs(z));
      return e / ((1.0 + e) * (1.0 + e));
    }
    case LossKind::squared: return 2.0;
  }
  return 0.0;
}

struct LossModel {
  LossKind kind = LossKind::exponential;
  double dataset_radius_r = 0.0;
  double margin_gamma = 0.0;
  double smoothness_L = 0.0;  // +inf for exponential
  double selfbound_c = 0.0;
  double selfbound_alpha = 1.0;
  double hessian_h = 0.0;
  double lower_tau = 0.0;
  double pl_mu = 0.0;
};

/// mu = 2 sigma_min_nonzero^2 / n for F(w) = (1/n) ||1 - Xw||^2.
inline double estimate_pl_constant(const Mat& x_signed) {
  const double n = static_cast<double>(x_signed.rows());
  Eigen::JacobiSVD<Mat> svd(x_signed);
  const Vec& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0.0;
  double thresh = 1e-10 * s(0);
  double smin = s(0);
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > thresh) smin = s(i);
  return 2.0 * smin * smin / n;
}

inline double estimate_pl_constant(const Dataset& ds) {
  return estimate_pl_constant(ds.signed_features());
}

inline LossModel make_loss_model(LossKind kind, const Dataset& ds) {
  LossModel m;
  m.kind = kind;
  const double r = ds.radius_r;
  m.dataset_radius_r = r;
  m.margin_gamma = ds.margin_gamma;
  switch (kind) {
    case LossKind::exponential:
      m.smoothness_L = std::numeric_limits<double>::infinity();
      m.selfbound_c = r;
      m.selfbound_alpha = 1.0;
      m.hessian_h = r * r;
      m.lower_tau = ds.margin_gamma;
      break;
    case LossKind::logistic:
      m.smoothness_L = r * r / 4.0;
      m.selfbound_c = r;
      m.selfbound_alpha = 1.0;
      m.hessian_h = 2.0 * r * r;
      m.lower_tau = 0.0;  // lower bound holds with Phi, not F
      break;
    case LossKind::squared:
      m.smoothness_L = 2.0 * r * r;
      m.selfbound_c = 2.0 * r;
      m.selfbound_alpha = 0.5;
      m.hessian_h = 0.0;
      m.lower_tau = 0.0;
      m.pl_mu = estimate_pl_constant(ds);
      break;
  }
  return m;
}

inline nlohmann::json to_json(const LossModel& m) {
  auto num = [](double v) -> nlohmann::json {
    if (std::isinf(v)) return "inf";
    return v;
  };
  return {{"kind", to_string(m.kind)},       {"r", m.dataset_radius_r},  {"gamma", m.margin_gamma},
          {"L", num(m.smoothness_L)},        {"c", m.selfbound_c},       {"alpha", m.selfbound_alpha},
          {"h", m.hessian_h},                {"tau", m.lower_tau},       {"mu", m.pl_mu}};
}

inline double loss_value(const LossModel& m, const Vec& w, const Vec& x_signed) {
  if (w.size() != x_signed.size()) throw ConfigError("loss_value: dimension mismatch");
  return loss_scalar(m.kind, w.dot(x_signed));
}

inline Vec loss_grad(const LossModel& m, const Vec& w, const Vec& x_signed) {
  return loss_deriv(m.kind, w.dot(x_signed)) * x_signed;
}

/// Mean loss and gradient over the rows of x (signed samples).
inline double risk_and_grad(LossKind k, const Mat& x, const Vec& w, Vec* grad) {
  const auto n = x.rows();
  if (n == 0) throw ConfigError("empty shard");
  Vec z = x * w;
  double val = 0.0;
  Vec dz(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    val += loss_scalar(k, z(i));
    dz(i) = loss_deriv(k, z(i));
  }
  const double inv = 1.0 / static_cast<double>(n);
  if (grad) *grad = (x.transpose() * dz) * inv;
  return val * inv;
}

inline double risk(LossKind k, const Mat& x, const Vec& w) { return risk_and_grad(k, x, w, nullptr); }

inline Vec risk_grad(LossKind k, const Mat& x, const Vec& w) {
  Vec g;
  risk_and_grad(k, x, w, &g);
  return g;
}

inline Mat risk_hessian(LossKind k, const Mat& x, const Vec& w) {
  Vec z = x * w;
  Vec s(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) s(i) = loss_second(k, z(i));
  return x.transpose() * s.asDiagonal() * x / static_cast<double>(x.rows());
}

/// Rows of the signed matrix belonging to a shard.
inline Mat gather_rows(const Mat& x, const std::vector<Eigen::Index>& idx) {
  Mat out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = x.row(idx[r]);
  return out;
}

inline std::pair<double, Vec> local_risk_and_grad(const LossModel& m, const Vec& w,
                                                  const std::vector<Eigen::Index>& shard,
                                                  const Dataset& ds) {
  if (shard.empty()) throw ConfigError("empty shard");
  Mat xs = gather_rows(ds.signed_features(), shard);
  Vec g;
  double v = risk_and_grad(m.kind, xs, w, &g);
  return {v, g};
}

/// (1/N) sum_l F_l(w_l). W has one row per agent.
inline double global_risk(LossKind k, const Mat& w_rows, const std::vector<Mat>& shard_x) {
  const auto nag = static_cast<Eigen::Index>(shard_x.size());
  if (w_rows.rows() != nag) throw ConfigError("global_risk: agent count mismatch");
  double s = 0.0;
  for (Eigen::Index l = 0; l < nag; ++l)
    s += risk(k, shard_x[static_cast<std::size_t>(l)], w_rows.row(l).transpose());
  return s / static_cast<double>(nag);
}

inline double global_risk(const LossModel& m, const Mat& w_rows, const Partition& p, const Dataset& ds) {
  Mat x = ds.signed_features();
  std::vector<Mat> shards;
  for (const auto& s : p.shards) shards.push_back(gather_rows(x, s));
  Mat rows = w_rows.rows() == 1 ? Mat(w_rows.replicate(p.n_agents(), 1)) : w_rows;
  return global_risk(m.kind, rows, shards);
}

inline double realizability_rho(const LossModel& m, double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("epsilon must be in (0,1)");
  if (!(m.margin_gamma > 0.0)) throw ConfigError("realizability needs a known margin");
  switch (m.kind) {
    case LossKind::exponential: return std::log(1.0 / eps) / m.margin_gamma;
    case LossKind::logistic: return -std::log(std::expm1(eps)) / m.margin_gamma;
    case LossKind::squared: break;
  }
  throw ConfigError("realizability profile defined for exponential and logistic losses only");
}

/// Witness vector rho(eps) * w_mm / ||w_mm||.
inline Vec realizability_witness(const LossModel& m, const Dataset& ds, double eps) {
  if (ds.w_mm.size() == 0) throw ConfigError("realizability needs the max-margin solution");
  return realizability_rho(m, eps) * ds.w_mm.normalized();
}

/// Power-iteration operator norm of a symmetric PSD matrix.
inline double power_norm(const Mat& h, int iters = 500, std::uint64_t seed = 1) {
  if (h.rows() == 0) return 0.0;
  auto rng = make_rng(seed, 0x9057ull);
  Gaussian g(rng);
  Vec v(h.rows());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = g();
  v.normalize();
  double lam = 0.0;
  for (int it = 0; it < iters; ++it) {
    Vec hv = h * v;
    double nv = hv.norm();
    if (nv == 0.0) return 0.0;
    lam = nv;
    v = hv / nv;
  }
  return lam;
}

struct BoundViolations {
  double grad_upper = 0.0;  // max(||grad|| - c F, 0), relative to F
  double grad_lower = 0.0;  // max(lower - ||grad||, 0)
  double hessian = 0.0;     // max(||H|| - h F, 0)
  long trials = 0;

  double worst() const { return std::max({grad_upper, grad_lower, hessian}); }
};

/// Samples Gaussian w at scales {0.1, 1, 10}. Violations are relative to the
/// bound's magnitude so tiny-loss regimes are judged fairly.
inline BoundViolations verify_self_bounds(const LossModel& m, const Dataset& ds, int n_trials,
                                          std::uint64_t seed) {
  if (m.kind == LossKind::squared) throw ConfigError("self-bound propositions cover exponential and logistic losses");
  if (!(m.margin_gamma > 0.0)) throw ConfigError("self-bound check needs a known margin");
  Mat x = ds.signed_features();
  const double r = ds.radius_r;
  const double gam = ds.margin_gamma;
  const double h = m.kind == LossKind::exponential ? r * r : 2.0 * r * r;
  auto rng = make_rng(seed, 0x5E1Full);
  Gaussian g(rng);
  BoundViolations out;
  const double scales[3] = {0.1, 1.0, 10.0};
  for (int t = 0; t < n_trials; ++t) {
    double sc = scales[t % 3];
    Vec w(ds.d());
    for (Eigen::Index k = 0; k < w.size(); ++k) w(k) = sc * g();
    Vec grad;
    double f = risk_and_grad(m.kind, x, w, &grad);
    if (!(f > 0.0) || !std::isfinite(f)) continue;
    double gn = grad.norm();
    double lower;
    if (m.kind == LossKind::exponential) {
      lower = gam * f;
    } else {
      Vec z = x * w;
      double phi = 0.0;
      for (Eigen::Index i = 0; i < z.size(); ++i) phi += -loss_deriv(m.kind, z(i));
      lower = gam * phi / static_cast<double>(z.size());
    }
    double hn = power_norm(risk_hessian(m.kind, x, w), 300, static_cast<std::uint64_t>(t) + 1);
    out.grad_upper = std::max(out.grad_upper, (gn - r * f) / f);
    out.grad_lower = std::max(out.grad_lower, (lower - gn) / f);
    out.hessian = std::max(out.hessian, (hn - h * f) / f);
    ++out.trials;
  }
  return out;
}

}  // namespace csl

#endif  // CSL_LOSSES_HPP
