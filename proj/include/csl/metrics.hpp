#ifndef CSL_METRICS_HPP
#define CSL_METRICS_HPP

#include "csl/engine.hpp"
#include "csl/losses.hpp"
#include "csl/topology.hpp"
#include "csl/types.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace csl {

/// sum_l ||w_l - wbar||^2
inline double consensus_error(const Mat& w) {
  if (w.rows() == 0) return 0.0;
  Eigen::RowVectorXd mean = w.colwise().mean();
  return (w.rowwise() - mean).squaredNorm();
}

inline double consensus_error_normalized(const Mat& w) {
  return w.rows() ? consensus_error(w) / static_cast<double>(w.rows()) : 0.0;
}

inline double directional_distance(const Vec& w, const Vec& w_mm) {
  double a = w.norm(), b = w_mm.norm();
  if (a == 0.0 || b == 0.0) throw ConfigError("directional_distance: zero vector");
  return (w / a - w_mm / b).norm();
}

struct Record {
  long t = 1;
  double eta = 0.0;
  double train_loss_mean = 0.0;   // F(wbar)
  double train_loss_local = 0.0;  // (1/N) sum_l F_l(w_l)
  double consensus_sq = 0.0;      // ||W - Wbar||_F^2
  double test_loss = std::numeric_limits<double>::quiet_NaN();
  double dir_dist = std::numeric_limits<double>::quiet_NaN();        // wbar
  double dir_dist_agent0 = std::numeric_limits<double>::quiet_NaN();  // w_1
  double grad_norm = 0.0;
  double err_train = 0.0;
  double err_test = std::numeric_limits<double>::quiet_NaN();
};

struct Trajectory {
  std::string algo;
  std::vector<Record> records;
  std::vector<Mat> states;  // W at every t when requested
  std::string abort_reason;  // empty when the run completed

  bool aborted() const { return !abort_reason.empty(); }

  std::vector<double> field(double Record::*f) const {
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.*f);
    return out;
  }
  std::vector<double> times() const {
    std::vector<double> out;
    for (const auto& r : records) out.push_back(static_cast<double>(r.t));
    return out;
  }
};

/// Direction convention: the zero vector has no direction, recorded as distance 1.
inline double dir_dist_or_one(const Vec& w, const Vec& w_mm) {
  if (w_mm.size() == 0) return std::numeric_limits<double>::quiet_NaN();
  if (w.norm() == 0.0) return 1.0;
  return directional_distance(w, w_mm);
}

inline double misclassification(const Mat& x_signed, const Vec& w) {
  if (x_signed.rows() == 0) return std::numeric_limits<double>::quiet_NaN();
  Vec z = x_signed * w;
  return static_cast<double>((z.array() <= 0.0).count()) / static_cast<double>(z.size());
}

struct TestLoss {
  double mean = 0.0;
  double se = 0.0;
};

inline TestLoss estimate_test_loss(LossKind k, const Vec& w, const Mat& holdout_signed) {
  const auto m = holdout_signed.rows();
  if (m == 0) throw ConfigError("empty holdout");
  Vec z = holdout_signed * w;
  double s = 0.0, s2 = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    double v = loss_scalar(k, z(i));
    s += v;
    s2 += v * v;
  }
  double md = static_cast<double>(m);
  double mean = s / md;
  double var = m > 1 ? std::max(0.0, (s2 - md * mean * mean) / (md - 1.0)) : 0.0;
  return {mean, std::sqrt(var / md)};
}

inline TestLoss estimate_test_loss(const LossModel& m, const Vec& w, const Dataset& holdout) {
  return estimate_test_loss(m.kind, w, holdout.signed_features());
}

/// Snapshot of every plotted quantity at the state's current t.
inline Record measure(const Problem& pr, const AlgoState& s, const Mat* holdout, const Vec& w_mm) {
  Record r;
  r.t = s.t;
  r.eta = s.schedule.at(s.t);
  Vec wbar = s.W.colwise().mean().transpose();
  Vec g;
  r.train_loss_mean = risk_and_grad(pr.model.kind, pr.x, wbar, &g);
  r.grad_norm = g.norm();
  r.train_loss_local = s.F_local.mean();
  r.consensus_sq = consensus_error(s.W);
  if (holdout && holdout->rows() > 0) {
    r.test_loss = estimate_test_loss(pr.model.kind, wbar, *holdout).mean;
    r.err_test = misclassification(*holdout, wbar);
  }
  r.dir_dist = dir_dist_or_one(wbar, w_mm);
  r.dir_dist_agent0 = dir_dist_or_one(s.W.row(0).transpose(), w_mm);
  r.err_train = misclassification(pr.x, wbar);
  return r;
}

struct CheckReport {
  std::string check;
  bool preconditions_met = true;
  long violations = 0;
  // Largest excess of the checked side over its bound (LHS - RHS).
  // Negative when the inequality holds everywhere with room to spare.
  double max_slack = -std::numeric_limits<double>::infinity();
  nlohmann::json details = nlohmann::json::array();

  bool passed() const { return preconditions_met && violations == 0; }

  void observe(double lhs, double rhs, double tol, nlohmann::json detail = nullptr) {
    double excess = lhs - rhs;
    max_slack = std::max(max_slack, excess);
    if (excess > tol) {
      ++violations;
      if (!detail.is_null() && details.size() < 50) details.push_back(std::move(detail));
    }
  }
};

inline nlohmann::json to_json(const CheckReport& r) {
  nlohmann::json slack = std::isfinite(r.max_slack) ? nlohmann::json(r.max_slack) : nlohmann::json(nullptr);
  return {{"check", r.check},
          {"preconditions_met", r.preconditions_met},
          {"violations", r.violations},
          {"max_slack", slack},
          {"details", r.details}};
}

struct RecursionReports {
  CheckReport proof_form;      // alpha2 N eta^2 L F
  CheckReport statement_form;  // alpha2 N eta^2 L^2 F
};

/// Per-step consensus recursion. states[k] is W at t = k + 1; fbar[k] likewise.
inline RecursionReports check_consensus_recursion(const std::vector<Mat>& states,
                                                  const std::vector<double>& fbar,
                                                  const MixingMatrix& mix, const LossModel& m,
                                                  double eta, double tol = 1e-9) {
  RecursionReports out;
  out.proof_form.check = "consensus_recursion_proof_form";
  out.statement_form.check = "consensus_recursion_statement_form";
  const double L = m.smoothness_L;
  const auto& s = mix.spec;
  bool pre = std::isfinite(L) && eta <= (1.0 - s.lambda) / (4.0 * L);
  out.proof_form.preconditions_met = pre;
  out.statement_form.preconditions_met = pre;
  if (!pre) {
    out.proof_form.details.push_back("step size above (1 - lambda) / (4 L)");
    out.statement_form.details = out.proof_form.details;
    return out;
  }
  const double n = static_cast<double>(mix.n());
  double prev = states.empty() ? 0.0 : consensus_error(states[0]);
  for (std::size_t k = 1; k < states.size(); ++k) {
    double cur = consensus_error(states[k]);
    double base = s.alpha1 * prev;
    double drive = s.alpha2 * n * eta * eta * fbar[k - 1];
    long t = static_cast<long>(k) + 1;
    out.proof_form.observe(cur, base + drive * L, tol, {{"t", t}, {"lhs", cur}, {"rhs", base + drive * L}});
    out.statement_form.observe(cur, base + drive * L * L, tol,
                               {{"t", t}, {"lhs", cur}, {"rhs", base + drive * L * L}});
    prev = cur;
  }
  return out;
}

/// Averaged train-loss bound with the comparator w = rho(1/T) w_mm / ||w_mm||.
/// fbar[k] = F(wbar^(k+1)); T <= fbar.size().
inline CheckReport check_train_bound_convex(const std::vector<double>& fbar, const LossModel& m,
                                            const Dataset& ds, double eta, long T,
                                            double eta_max_convex) {
  CheckReport r;
  r.check = "train_bound_convex";
  if (T < 1 || static_cast<std::size_t>(T) > fbar.size()) throw ConfigError("T outside trajectory");
  r.preconditions_met = eta < eta_max_convex && ds.margin_gamma > 0.0;
  if (!r.preconditions_met) {
    r.details.push_back("step size or margin precondition unmet");
    return r;
  }
  Vec w = Vec::Zero(ds.d());
  if (T > 1) w = realizability_witness(m, ds, 1.0 / static_cast<double>(T));
  double fw = risk(m.kind, ds.signed_features(), w);
  double lhs = 0.0;
  for (long t = 0; t < T; ++t) lhs += fbar[static_cast<std::size_t>(t)];
  lhs /= static_cast<double>(T);
  double rhs = 2.0 * w.squaredNorm() / (eta * static_cast<double>(T)) + 4.0 * fw;
  r.observe(lhs, rhs, 0.0, {{"T", T}, {"lhs", lhs}, {"rhs", rhs}});
  r.details.push_back({{"T", T}, {"lhs", lhs}, {"rhs", rhs}, {"F_w", fw}, {"norm_w", w.norm()}});
  return r;
}

/// Half / double relation between F(W) and F(wbar) on every record, under the
/// step-size guard at every step before the last.
inline CheckReport check_sandwich(const Trajectory& tr, const MixingMatrix& mix, double h, int n_agents,
                                  double tol = 1e-9) {
  CheckReport r;
  r.check = "sandwich";
  for (std::size_t k = 0; k + 1 < tr.records.size(); ++k) {
    const auto& rec = tr.records[k];
    double mt = std::max(rec.train_loss_local, rec.train_loss_mean);
    if (rec.eta > sandwich_guard(mix.spec, h, n_agents, mt) * (1.0 + 1e-12)) {
      r.preconditions_met = false;
      r.details.push_back({{"t", rec.t}, {"guard_violated", true}});
      return r;
    }
  }
  for (const auto& rec : tr.records) {
    double fw = rec.train_loss_local, fb = rec.train_loss_mean;
    r.observe(fw, 2.0 * fb, tol * std::max(1.0, fb), {{"t", rec.t}, {"side", "upper"}});
    r.observe(0.5 * fb, fw, tol * std::max(1.0, fb), {{"t", rec.t}, {"side", "lower"}});
  }
  return r;
}

/// Count of consecutive records where F(wbar) increases by more than tol.
inline CheckReport check_descent(const Trajectory& tr, double tol = 1e-12) {
  CheckReport r;
  r.check = "descent";
  for (std::size_t k = 1; k < tr.records.size(); ++k) {
    double prev = tr.records[k - 1].train_loss_mean, cur = tr.records[k].train_loss_mean;
    r.observe(cur, prev, tol, {{"t", tr.records[k].t}, {"prev", prev}, {"cur", cur}});
  }
  return r;
}

struct RateFit {
  double t_lo = 0.0, t_hi = 0.0;
  double exponent = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t points = 0;
};

/// Ordinary least squares of y on x with r^2.
inline RateFit least_squares_fit(const std::vector<double>& x, const std::vector<double>& y) {
  RateFit f;
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  f.exponent = sxx > 0.0 ? sxy / sxx : 0.0;
  f.intercept = my - f.exponent * mx;
  if (syy <= 0.0) {
    f.r_squared = 1.0;
  } else {
    double sse = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      double e = y[i] - (f.intercept + f.exponent * x[i]);
      sse += e * e;
    }
    f.r_squared = std::clamp(1.0 - sse / syy, 0.0, 1.0);
  }
  f.points = x.size();
  return f;
}

/// Slope of log(value) against log(t) over the last window_fraction of the
/// iteration range.
inline RateFit fit_rate(const std::vector<double>& t, const std::vector<double>& v, double window_fraction = 0.5) {
  if (t.size() != v.size() || t.empty()) throw ConfigError("fit_rate: empty or mismatched series");
  if (!(window_fraction > 0.0 && window_fraction <= 1.0)) throw ConfigError("fit_rate: bad window fraction");
  double tmin = t.front(), tmax = t.back();
  double lo = tmax - window_fraction * (tmax - tmin);
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < lo) continue;
    if (!(v[i] > 0.0) || !(t[i] > 0.0)) throw ConfigError("fit_rate: nonpositive value in window");
    lx.push_back(std::log(t[i]));
    ly.push_back(std::log(v[i]));
  }
  if (lx.size() < 10) throw ConfigError("fit_rate: fewer than 10 points in window");
  RateFit f = least_squares_fit(lx, ly);
  f.t_lo = std::exp(lx.front());
  f.t_hi = std::exp(lx.back());
  return f;
}

inline RateFit fit_rate(const Trajectory& tr, double Record::*field, double window_fraction = 0.5) {
  return fit_rate(tr.times(), tr.field(field), window_fraction);
}

struct PLReport {
  CheckReport train;
  CheckReport consensus;
  double zeta = 1.0;
  RateFit log_linear;  // slope of log F against t
};

/// Geometric decay of train loss and consensus under the PL step rule.
inline PLReport check_pl_linear_convergence(const Trajectory& tr, const MixingMatrix& mix,
                                            const LossModel& m, double eta, double eta_max_pl,
                                            double tol = 1e-9) {
  PLReport out;
  out.train.check = "pl_train_geometric";
  out.consensus.check = "pl_consensus_geometric";
  bool pre = m.pl_mu > 0.0 && eta <= eta_max_pl && !tr.records.empty();
  out.train.preconditions_met = out.consensus.preconditions_met = pre;
  if (!pre) return out;
  const auto& s = mix.spec;
  out.zeta = 1.0 - eta * m.pl_mu / 2.0;
  const double f1 = tr.records.front().train_loss_mean;
  const double L = m.smoothness_L;
  const double ccoef = 2.0 * s.alpha2 * eta * eta * L * L * f1 / (1.0 - s.alpha1);
  const double n = static_cast<double>(mix.n());
  std::vector<double> xs, ys;
  for (const auto& r : tr.records) {
    double z = std::pow(out.zeta, static_cast<double>(r.t - 1));
    out.train.observe(r.train_loss_mean, z * f1, tol, {{"t", r.t}});
    out.consensus.observe(r.consensus_sq / n, ccoef * z, tol, {{"t", r.t}});
  }
  const double tmax = static_cast<double>(tr.records.back().t);
  for (const auto& r : tr.records) {
    if (static_cast<double>(r.t) < tmax / 2.0 || !(r.train_loss_mean > 1e-250)) continue;
    xs.push_back(static_cast<double>(r.t));
    ys.push_back(std::log(r.train_loss_mean));
  }
  if (xs.size() >= 2) out.log_linear = least_squares_fit(xs, ys);
  return out;
}

/// Argmin of the 5-point centred moving average (window shrinks at the ends).
inline std::pair<double, double> detect_test_loss_minimum(const std::vector<double>& t,
                                                          const std::vector<double>& v) {
  if (t.empty() || t.size() != v.size()) throw ConfigError("detect_test_loss_minimum: empty series");
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(v.size());
  double best = std::numeric_limits<double>::infinity();
  std::ptrdiff_t arg = 0;
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - 2), hi = std::min(n - 1, i + 2);
    double s = 0.0;
    for (std::ptrdiff_t k = lo; k <= hi; ++k) s += v[static_cast<std::size_t>(k)];
    s /= static_cast<double>(hi - lo + 1);
    if (s < best) {
      best = s;
      arg = i;
    }
  }
  return {t[static_cast<std::size_t>(arg)], best};
}

inline std::pair<double, double> detect_test_loss_minimum(const Trajectory& tr) {
  return detect_test_loss_minimum(tr.times(), tr.field(&Record::test_loss));
}

}  // namespace csl

#endif  // CSL_METRICS_HPP
