#ifndef CSL_VERIFY_HPP
#define CSL_VERIFY_HPP

#include "csl/harness.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace csl {

/// A prepared synthetic problem with the given shape.
inline PreparedProblem synthetic_problem(LossKind loss, long n, long d, int agents, double p, std::uint64_t seed,
                                         bool normalize = false, long holdout_m = 0,
                                         const std::string& graph = "erdos_renyi") {
  ExperimentConfig c;
  c.dataset.n = n;
  c.dataset.d = d;
  c.dataset.seed = seed;
  c.dataset.holdout_m = holdout_m;
  c.dataset.normalize = normalize;
  c.topology.kind = graph;
  c.topology.n_agents = agents;
  c.topology.p_connect = p;
  c.topology.seed = seed;
  c.loss = loss;
  return prepare(c);
}

inline StepOptions constant_step(double eta, double gamma = 0.0, bool recenter = false) {
  StepOptions so;
  so.schedule.kind = Schedule::constant;
  so.schedule.c = eta;
  so.gamma_momentum = gamma;
  so.recenter = recenter;
  return so;
}

// ---------------------------------------------------------------- stability bound

struct StabilityBoundParams {
  long n = 50, d = 10;
  int agents = 5;
  double p_connect = 0.4;
  long T = 200;
  int n_seeds = 20;
  double eta_factor = 0.99;  // times eta_max_convex
  long holdout_m = 2000;
  std::uint64_t seed0 = 1;
};

struct StabilityBoundResult {
  CheckReport report;
  double mean_lhs = 0.0, mean_rhs = 0.0, se = 0.0;
  std::vector<double> loo_distance;  // ||wbar_T - wbar_T^{-i}|| per seed
};

namespace detail {

/// sum_t ||W_t - Wbar_t||_F and per-t F(wbar_t) along a DGD run of T states.
struct DgdPath {
  double sum_cons_norm = 0.0;
  std::vector<double> fbar;
  Vec wbar_T;
};

inline DgdPath dgd_path(const Problem& pr, double eta, long T) {
  AlgoState s = init_state(Algo::dgd, pr, constant_step(eta));
  DgdPath out;
  for (long t = 1; t <= T; ++t) {
    out.sum_cons_norm += std::sqrt(consensus_error(s.W));
    out.fbar.push_back(risk(pr.model.kind, pr.x, s.W.colwise().mean().transpose()));
    if (t < T) step(s, pr);
  }
  out.wbar_T = s.W.colwise().mean().transpose();
  return out;
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double se_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = mean_of(v), s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

}  // namespace detail

/// Monte-Carlo evaluation of the stability bound on test loss (logistic DGD).
/// The leave-one-out term uses one random left-out sample per seed; the left-out
/// row is zeroed so its agent keeps the 1/n_l normalisation and gets no gradient from it.
inline StabilityBoundResult check_stability_bound(const StabilityBoundParams& kp) {
  StabilityBoundResult res;
  res.report.check = "stability_bound";
  std::vector<double> lhs, rhs;
  for (int s = 0; s < kp.n_seeds; ++s) {
    std::uint64_t seed = kp.seed0 + static_cast<std::uint64_t>(s);
    auto pp = synthetic_problem(LossKind::logistic, kp.n, kp.d, kp.agents, kp.p_connect, seed, false, kp.holdout_m);
    const Problem& pr = pp.problem;
    const auto& m = pr.model;
    auto rules = compute_step_rules(pr.mixing, m, pr.n_agents(), std::log(2.0));
    double eta = kp.eta_factor * rules.eta_max_convex;
    if (!(eta > 0.0) || eta > 2.0 / m.smoothness_L) {
      res.report.preconditions_met = false;
      return res;
    }
    auto path = detail::dgd_path(pr, eta, kp.T);
    // leave-one-out rerun
    auto rng = make_rng(seed, 0x100ull);
    auto i = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(kp.n)));
    Problem loo = pr;
    for (std::size_t l = 0; l < pp.partition.shards.size(); ++l) {
      const auto& sh = pp.partition.shards[l];
      for (std::size_t r = 0; r < sh.size(); ++r)
        if (sh[r] == i) loo.shard_x[l].row(static_cast<Eigen::Index>(r)).setZero();
    }
    auto lpath = detail::dgd_path(loo, eta, kp.T);
    res.loo_distance.push_back((path.wbar_T - lpath.wbar_T).norm());

    const double L = m.smoothness_L, c = m.selfbound_c, a = m.selfbound_alpha;
    const double n = static_cast<double>(kp.n), T = static_cast<double>(kp.T);
    const double N = static_cast<double>(pr.n_agents());
    double avg = detail::mean_of(path.fbar);
    double t1 = 4.0 * path.fbar.back();
    double t2 = 9.0 * L * L * c * c * eta * eta * T * T / std::pow(n, 3.0 - 2.0 * a) * std::pow(avg, 2.0 * a);
    double t3 = 9.0 * std::pow(L, 4) * eta * eta / N * path.sum_cons_norm * path.sum_cons_norm;
    double t4 = 9.0 * std::pow(L, 4) * eta * eta / N * lpath.sum_cons_norm * lpath.sum_cons_norm;
    lhs.push_back(estimate_test_loss(m.kind, path.wbar_T, pp.holdout_x).mean);
    rhs.push_back(t1 + t2 + t3 + t4);
    res.report.details.push_back({{"seed", seed}, {"lhs", lhs.back()}, {"rhs", rhs.back()},
                                  {"terms", {t1, t2, t3, t4}}, {"eta", eta}});
  }
  res.mean_lhs = detail::mean_of(lhs);
  res.mean_rhs = detail::mean_of(rhs);
  double sl = detail::se_of(lhs), sr = detail::se_of(rhs);
  res.se = std::sqrt(sl * sl + sr * sr);
  res.report.observe(res.mean_lhs, res.mean_rhs + 2.0 * res.se, 0.0);
  return res;
}

// ---------------------------------------------------------------- suites

struct SuiteLine {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyOptions {
  std::uint64_t seed = 1;
  double eta_scale = 1.0;  // multiplies the bounds suite step sizes
};

namespace detail {

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline Mat random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  Gaussian g(rng);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index k = 0; k < c; ++k) m(i, k) = g();
  return m;
}

}  // namespace detail

inline std::vector<SuiteLine> suite_mixing(const VerifyOptions& o) {
  std::vector<SuiteLine> out;
  auto rng = make_rng(o.seed, 0x313ull);
  double worst_sym = 0, worst_stoch = 0, worst_contr = -1e300, worst_l2 = 0;
  bool alpha_ok = true;
  for (int k = 0; k < 50; ++k) {
    int n = 5 + static_cast<int>(uniform_index(rng, 46));
    double p = 0.1 + 0.8 * uniform01(rng);
    auto g = generate_erdos_renyi(n, p, o.seed * 1000 + static_cast<std::uint64_t>(k));
    auto m = build_mixing_matrix(g);
    const Mat& a = m.weights;
    worst_sym = std::max(worst_sym, (a - a.transpose()).cwiseAbs().maxCoeff());
    worst_stoch = std::max(worst_stoch, (a.rowwise().sum().array() - 1.0).abs().maxCoeff());
    worst_stoch = std::max(worst_stoch, (a.colwise().sum().array() - 1.0).abs().maxCoeff());
    worst_l2 = std::max(worst_l2, m.spec.lambda2);
    if (m.spec.lambda > 0.0) alpha_ok = alpha_ok && m.spec.alpha1 > 0.75 && m.spec.alpha1 < 1.0 && m.spec.alpha2 > 4.0;
    for (int r = 0; r < 20; ++r) {
      Mat w = detail::random_matrix(rng, n, 3);
      Eigen::RowVectorXd mean = w.colwise().mean();
      double lhs = ((a * w).rowwise() - mean).squaredNorm();
      double rhs = m.spec.lambda * (w.rowwise() - mean).squaredNorm();
      worst_contr = std::max(worst_contr, lhs - rhs);
    }
  }
  out.push_back({"symmetric", worst_sym == 0.0, "max |A - A^T| = " + detail::num(worst_sym)});
  out.push_back({"doubly_stochastic", worst_stoch < 1e-12, "max row/col deviation = " + detail::num(worst_stoch)});
  out.push_back({"lambda2_below_one", worst_l2 < 1.0, "max lambda2 = " + detail::num(worst_l2)});
  out.push_back({"contraction", worst_contr <= 1e-10, "max excess = " + detail::num(worst_contr)});
  out.push_back({"alpha_ranges", alpha_ok, "alpha1 in (3/4,1), alpha2 > 4"});
  return out;
}

inline std::vector<SuiteLine> suite_losses(const VerifyOptions& o) {
  std::vector<SuiteLine> out;
  auto rng = make_rng(o.seed, 0x10ull);
  Gaussian g(rng);
  for (LossKind k : {LossKind::exponential, LossKind::logistic, LossKind::squared}) {
    double worst_fd = 0, worst_cvx = -1e300, worst_sb = -1e300;
    const double c_sb = k == LossKind::squared ? 2.0 : 1.0;  // per unit ||x||
    const double a_sb = k == LossKind::squared ? 0.5 : 1.0;
    for (int t = 0; t < 100; ++t) {
      Vec x(4), w(4), v(4);
      for (int i = 0; i < 4; ++i) {
        x(i) = g();
        w(i) = g();
        v(i) = g();
      }
      LossModel m;
      m.kind = k;
      Vec gr = loss_grad(m, w, x);
      for (int i = 0; i < 4; ++i) {
        Vec e = Vec::Zero(4);
        e(i) = 1e-6;
        double fd = (loss_value(m, w + e, x) - loss_value(m, w - e, x)) / 2e-6;
        worst_fd = std::max(worst_fd, std::abs(fd - gr(i)) / std::max(1.0, std::abs(gr(i))));
      }
      worst_cvx = std::max(worst_cvx, loss_value(m, w, x) + gr.dot(v - w) - loss_value(m, v, x));
      worst_sb = std::max(worst_sb, gr.norm() - c_sb * x.norm() * std::pow(loss_value(m, w, x), a_sb));
    }
    out.push_back({"gradient_fd_" + to_string(k), worst_fd < 1e-5, "max rel err = " + detail::num(worst_fd)});
    out.push_back({"convexity_" + to_string(k), worst_cvx <= 1e-9, "max excess = " + detail::num(worst_cvx)});
    out.push_back({"selfbound_" + to_string(k), worst_sb <= 1e-9, "max excess = " + detail::num(worst_sb)});
  }
  for (LossKind k : {LossKind::exponential, LossKind::logistic}) {
    auto ds = generate_signed_measurements(40, 5, o.seed);
    auto m = make_loss_model(k, ds);
    auto v = verify_self_bounds(m, ds, 300, o.seed);
    out.push_back({"self_bound_props_" + to_string(k), v.worst() <= 1e-8, "worst = " + detail::num(v.worst())});
    double worst = -1e300;
    for (double eps : {1e-1, 1e-2, 1e-3}) {
      Vec w = realizability_witness(m, ds, eps);
      worst = std::max(worst, risk(k, ds.signed_features(), w) - eps);
    }
    out.push_back({"realizability_" + to_string(k), worst <= 1e-9, "max excess = " + detail::num(worst)});
  }
  return out;
}

inline std::vector<SuiteLine> suite_engine(const VerifyOptions& o) {
  std::vector<SuiteLine> out;
  // single-agent collapse
  double worst = 0;
  for (LossKind k : {LossKind::exponential, LossKind::logistic, LossKind::squared}) {
    auto pp = synthetic_problem(k, 20, 4, 1, 0.5, o.seed);
    const auto& pr = pp.problem;
    std::pair<Algo, Algo> pairs[] = {{Algo::dgd, Algo::central_gd},      {Algo::dgt, Algo::central_gd},
                                     {Algo::fdlr, Algo::central_ngd},    {Algo::fdlr_nesterov, Algo::central_ngd},
                                     {Algo::normalized_dgd, Algo::central_ngd}};
    for (auto [a, b] : pairs) {
      auto sa = init_state(a, pr, constant_step(0.05));
      auto sb = init_state(b, pr, constant_step(0.05));
      for (int t = 0; t < 100; ++t) {
        step(sa, pr);
        step(sb, pr);
        worst = std::max(worst, (sa.W - sb.W).cwiseAbs().maxCoeff());
      }
    }
  }
  out.push_back({"single_agent_collapse", worst <= 1e-12, "max diff = " + detail::num(worst)});
  // tracker conservation
  double cons = 0;
  auto pp = synthetic_problem(LossKind::logistic, 60, 6, 6, 0.5, o.seed);
  for (Algo a : {Algo::dgt, Algo::fdlr, Algo::fdlr_nesterov}) {
    auto s = init_state(a, pp.problem, constant_step(0.1, 0.5));
    for (int t = 0; t < 300; ++t) {
      step(s, pp.problem);
      double dev = (s.V.colwise().sum() - s.G.colwise().sum()).norm();
      cons = std::max(cons, dev / (1.0 + s.G.norm()));
    }
  }
  out.push_back({"tracker_conservation", cons <= 1e-9, "max rel deviation = " + detail::num(cons)});
  // determinism
  auto run = [&] {
    auto p2 = synthetic_problem(LossKind::exponential, 40, 5, 4, 0.5, o.seed, false, 100);
    return run_algorithm(p2.problem, Algo::fdlr, constant_step(0.3), RunOptions{200, 1, false}, &p2.holdout_x,
                         p2.train.w_mm);
  };
  std::ostringstream a, b;
  write_trajectory_csv(run(), a);
  write_trajectory_csv(run(), b);
  out.push_back({"determinism", a.str() == b.str(), "two identical runs"});
  return out;
}

inline std::vector<SuiteLine> suite_bounds(const VerifyOptions& o) {
  std::vector<SuiteLine> out;
  const double sc = o.eta_scale;
  {  // consensus recursion, logistic
    auto pp = synthetic_problem(LossKind::logistic, 60, 8, 6, 0.5, o.seed);
    const auto& pr = pp.problem;
    auto rules = compute_step_rules(pr.mixing, pr.model, pr.n_agents(), std::log(2.0));
    double eta = sc * rules.eta_max_consensus;
    auto tr = run_algorithm(pr, Algo::dgd, constant_step(eta), RunOptions{300, 1, true}, nullptr, pp.train.w_mm);
    std::vector<double> fbar = tr.field(&Record::train_loss_mean);
    auto rr = check_consensus_recursion(tr.states, fbar, pr.mixing, pr.model, eta);
    out.push_back({"consensus_recursion", rr.proof_form.passed(),
                   "violations = " + std::to_string(rr.proof_form.violations) +
                       (rr.proof_form.preconditions_met ? "" : " (precondition unmet)")});
  }
  {  // descent and sandwich, exponential
    auto pp = synthetic_problem(LossKind::exponential, 40, 5, 4, 0.6, o.seed, true);
    const auto& pr = pp.problem;
    auto rules = compute_step_rules(pr.mixing, pr.model, pr.n_agents(), 1.0);
    double eta = sc * 0.99 * rules.delta_exp;
    auto tr = run_algorithm(pr, Algo::dgd, constant_step(eta), RunOptions{300, 1, false}, nullptr, pp.train.w_mm);
    auto d = check_descent(tr);
    bool pre = eta < rules.delta_exp;
    out.push_back({"descent", pre && d.passed(),
                   "violations = " + std::to_string(d.violations) + (pre ? "" : " (precondition unmet)")});
    double g = sandwich_guard(pr.mixing.spec, rules.h_eff, pr.n_agents(), 1.0);
    auto tr2 = run_algorithm(pr, Algo::dgd, constant_step(sc * g), RunOptions{300, 1, false}, nullptr, pp.train.w_mm);
    auto s = check_sandwich(tr2, pr.mixing, rules.h_eff, pr.n_agents());
    out.push_back({"sandwich", s.passed(),
                   "violations = " + std::to_string(s.violations) +
                       (s.preconditions_met ? "" : " (precondition unmet)")});
  }
  {  // averaged train-loss bound, logistic
    auto pp = synthetic_problem(LossKind::logistic, 60, 8, 6, 0.5, o.seed);
    const auto& pr = pp.problem;
    auto rules = compute_step_rules(pr.mixing, pr.model, pr.n_agents(), std::log(2.0));
    double eta = sc * 0.99 * rules.eta_max_convex;
    auto tr = run_algorithm(pr, Algo::dgd, constant_step(eta), RunOptions{1000, 1, false}, nullptr, pp.train.w_mm);
    auto fb = tr.field(&Record::train_loss_mean);
    bool ok = true;
    std::string det;
    for (long T : {10L, 100L, 1000L}) {
      auto r = check_train_bound_convex(fb, pr.model, pp.train, eta, T, rules.eta_max_convex);
      ok = ok && r.passed();
      det += "T=" + std::to_string(T) + (r.preconditions_met ? "" : " (precondition unmet)") + " ";
    }
    out.push_back({"train_bound", ok, det});
  }
  {  // PL regime, squared loss
    auto pp = synthetic_problem(LossKind::squared, 15, 60, 3, 0.7, o.seed, true);
    const auto& pr = pp.problem;
    auto rules = compute_step_rules(pr.mixing, pr.model, pr.n_agents(), 1.0);
    double eta = sc * rules.eta_max_pl;
    auto tr = run_algorithm(pr, Algo::dgd, constant_step(eta), RunOptions{3000, 1, false}, nullptr, Vec());
    auto pl = check_pl_linear_convergence(tr, pr.mixing, pr.model, eta, rules.eta_max_pl);
    out.push_back({"pl_geometric", pl.train.passed() && pl.consensus.passed(),
                   "violations = " + std::to_string(pl.train.violations + pl.consensus.violations) +
                       (pl.train.preconditions_met ? "" : " (precondition unmet)")});
  }
  return out;
}

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> s{"mixing", "losses", "engine", "bounds", "all"};
  return s;
}

inline std::vector<SuiteLine> run_suite(const std::string& name, const VerifyOptions& o) {
  if (name == "mixing") return suite_mixing(o);
  if (name == "losses") return suite_losses(o);
  if (name == "engine") return suite_engine(o);
  if (name == "bounds") return suite_bounds(o);
  if (name == "all") {
    std::vector<SuiteLine> all;
    for (const char* s : {"mixing", "losses", "engine", "bounds"}) {
      auto part = run_suite(s, o);
      for (auto& l : part) l.name = std::string(s) + "." + l.name;
      all.insert(all.end(), part.begin(), part.end());
    }
    return all;
  }
  throw ConfigError("unknown suite: " + name);
}

}  // namespace csl

#endif  // CSL_VERIFY_HPP
