#include "csl/harness.hpp"
#include "csl/metrics.hpp"
#include "csl/verify.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace csl;

namespace {

StepOptions opts(double eta) {
  StepOptions so;
  so.schedule.c = eta;
  return so;
}

PreparedProblem small(LossKind k, long n, long d, int agents, double p, std::uint64_t seed, bool normalize = false,
                      long holdout = 0) {
  ExperimentConfig c;
  c.dataset.n = n;
  c.dataset.d = d;
  c.dataset.seed = seed;
  c.dataset.normalize = normalize;
  c.dataset.holdout_m = holdout;
  c.topology.n_agents = agents;
  c.topology.p_connect = p;
  c.topology.seed = seed;
  c.loss = k;
  return prepare(c);
}

Trajectory from_values(const std::vector<double>& v) {
  Trajectory tr;
  for (std::size_t i = 0; i < v.size(); ++i) {
    Record r;
    r.t = static_cast<long>(i) + 1;
    r.train_loss_mean = v[i];
    r.test_loss = v[i];
    tr.records.push_back(r);
  }
  return tr;
}

// Independent least squares via Eigen QR.
double qr_slope(const std::vector<double>& x, const std::vector<double>& y) {
  Mat a(static_cast<Eigen::Index>(x.size()), 2);
  Vec b(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    a(static_cast<Eigen::Index>(i), 0) = 1.0;
    a(static_cast<Eigen::Index>(i), 1) = x[i];
    b(static_cast<Eigen::Index>(i)) = y[i];
  }
  return a.colPivHouseholderQr().solve(b)(1);
}

}  // namespace

TEST(Consensus, Examples) {
  Mat w(3, 2);
  w << 1, 2, 1, 2, 1, 2;
  EXPECT_EQ(consensus_error(w), 0.0);
  Mat p(2, 2);
  p << 1, 0, -1, 0;
  EXPECT_EQ(consensus_error(p), 2.0);
  EXPECT_EQ(consensus_error_normalized(p), 1.0);
}

TEST(Consensus, NormIdentity) {
  auto rng = make_rng(1, 0);
  Gaussian g(rng);
  for (int k = 0; k < 50; ++k) {
    Mat w(7, 3);
    for (int i = 0; i < 7; ++i)
      for (int j = 0; j < 3; ++j) w(i, j) = 5.0 * g();
    Vec wbar = w.colwise().mean().transpose();
    double want = w.squaredNorm() - 7.0 * wbar.squaredNorm();
    EXPECT_NEAR(consensus_error(w), want, 1e-9 * std::max(1.0, w.squaredNorm()));
  }
}

TEST(Directional, Examples) {
  Vec w(3);
  w << 1.0, -2.0, 0.5;
  EXPECT_NEAR(directional_distance(3.0 * w, w), 0.0, 1e-15);
  EXPECT_NEAR(directional_distance(-w, w), 2.0, 1e-15);
  EXPECT_THROW(directional_distance(Vec::Zero(3), w), ConfigError);
}

TEST(Directional, AngleIdentityAndScaling) {
  auto rng = make_rng(2, 0);
  Gaussian g(rng);
  for (int k = 0; k < 50; ++k) {
    Vec a(4), b(4);
    for (int i = 0; i < 4; ++i) {
      a(i) = g();
      b(i) = g();
    }
    double cosv = a.dot(b) / (a.norm() * b.norm());
    double d = directional_distance(a, b);
    EXPECT_NEAR(d, std::sqrt(2.0 - 2.0 * cosv), 1e-12);
    EXPECT_NEAR(directional_distance(7.5 * a, 0.01 * b), d, 1e-12);
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 2.0);
  }
}

TEST(TestLoss, Examples) {
  auto pp = small(LossKind::exponential, 30, 4, 3, 0.6, 1, false, 50);
  EXPECT_EQ(estimate_test_loss(LossKind::exponential, Vec::Zero(4), pp.holdout_x).mean, 1.0);
  Vec w(4);
  w << 0.3, -0.1, 0.2, 0.5;
  auto self = estimate_test_loss(LossKind::exponential, w, pp.problem.x);
  EXPECT_NEAR(self.mean, risk(LossKind::exponential, pp.problem.x, w), 1e-12);
}

TEST(TestLoss, StandardError) {
  auto pp = small(LossKind::logistic, 20, 3, 2, 1.0, 2, false, 10000);
  Vec w(3);
  w << 1.0, 0.5, -0.3;
  auto tl = estimate_test_loss(LossKind::logistic, w, pp.holdout_x);
  double s = 0.0, s2 = 0.0;
  Vec z = pp.holdout_x * w;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    double f = loss_scalar(LossKind::logistic, z(i));
    s += f;
    s2 += f * f;
  }
  double m = s / 1e4, sd = std::sqrt((s2 - 1e4 * m * m) / (1e4 - 1));
  EXPECT_NEAR(tl.se, sd / 100.0, 1e-12);
}

TEST(Recursion, DgdRunNoViolations) {
  auto pp = small(LossKind::logistic, 60, 8, 6, 0.5, 3);
  const auto& pr = pp.problem;
  auto rules = compute_step_rules(pr.mixing, pr.model, pr.n_agents(), std::log(2.0));
  double eta = rules.eta_max_consensus;
  auto tr = run_algorithm(pr, Algo::dgd, opts(eta), RunOptions{200, 1, true}, nullptr, pp.train.w_mm);
  ASSERT_EQ(tr.states.size(), 200u);
  auto rr = check_consensus_recursion(tr.states, tr.field(&Record::train_loss_mean), pr.mixing, pr.model, eta);
  EXPECT_TRUE(rr.proof_form.preconditions_met);
  EXPECT_EQ(rr.proof_form.violations, 0);
  EXPECT_EQ(rr.statement_form.violations, 0);
  EXPECT_LT(rr.proof_form.max_slack, 0.0);
}

TEST(Recursion, FirstStepByHand) {
  auto pp = small(LossKind::logistic, 40, 5, 4, 0.7, 4);
  const auto& pr = pp.problem;
  auto rules = compute_step_rules(pr.mixing, pr.model, pr.n_agents(), std::log(2.0));
  double eta = rules.eta_max_consensus;
  auto s = init_state(Algo::dgd, pr, opts(eta));
  std::vector<Mat> states{s.W};
  std::vector<double> fbar{risk(pr.model.kind, pr.x, Vec::Zero(5))};
  step(s, pr);
  states.push_back(s.W);
  fbar.push_back(0.0);
  auto rr = check_consensus_recursion(states, fbar, pr.mixing, pr.model, eta);
  // consensual start: LHS = ||eta (G - Gbar)||^2, RHS = alpha2 N eta^2 L log 2
  const auto& sp = pr.mixing.spec;
  double lhs = consensus_error(s.W);
  double rhs = sp.alpha2 * 4.0 * eta * eta * pr.model.smoothness_L * std::log(2.0);
  EXPECT_LE(lhs, rhs);
  EXPECT_NEAR(rr.proof_form.max_slack, lhs - rhs, 1e-15);
}

TEST(Recursion, SingleAgentTrivial) {
  auto pp = small(LossKind::logistic, 20, 3, 1, 0.5, 5);
  const auto& pr = pp.problem;
  double eta = 0.9 * (1.0 - pr.mixing.spec.lambda) / (4.0 * pr.model.smoothness_L);
  auto tr = run_algorithm(pr, Algo::dgd, opts(eta), RunOptions{50, 1, true}, nullptr, Vec());
  auto rr = check_consensus_recursion(tr.states, tr.field(&Record::train_loss_mean), pr.mixing, pr.model, eta);
  EXPECT_EQ(rr.proof_form.violations, 0);
  for (const auto& w : tr.states) EXPECT_EQ(consensus_error(w), 0.0);
}

TEST(Recursion, LargeStepIsPrecondition) {
  auto pp = small(LossKind::logistic, 20, 3, 4, 0.5, 6);
  const auto& pr = pp.problem;
  double eta = 2.0 * (1.0 - pr.mixing.spec.lambda) / (4.0 * pr.model.smoothness_L);
  auto tr = run_algorithm(pr, Algo::dgd, opts(eta), RunOptions{10, 1, true}, nullptr, Vec());
  auto rr = check_consensus_recursion(tr.states, tr.field(&Record::train_loss_mean), pr.mixing, pr.model, eta);
  EXPECT_FALSE(rr.proof_form.preconditions_met);
  EXPECT_EQ(rr.proof_form.violations, 0);
  EXPECT_FALSE(rr.proof_form.passed());
}

TEST(TrainBound, SingleIteration) {
  auto pp = small(LossKind::logistic, 30, 4, 3, 0.6, 7);
  const auto& pr = pp.problem;
  auto rules = compute_step_rules(pr.mixing, pr.model, pr.n_agents(), std::log(2.0));
  double eta = 0.5 * rules.eta_max_convex;
  std::vector<double> fbar{std::log(2.0)};
  auto r = check_train_bound_convex(fbar, pr.model, pp.train, eta, 1, rules.eta_max_convex);
  // comparator is 0 at T = 1: log 2 <= 4 log 2
  EXPECT_TRUE(r.passed());
  EXPECT_NEAR(r.max_slack, -3.0 * std::log(2.0), 1e-12);
}

TEST(TrainBound, HoldsAlongRun) {
  auto pp = small(LossKind::logistic, 100, 25, 5, 0.5, 8);
  const auto& pr = pp.problem;
  auto rules = compute_step_rules(pr.mixing, pr.model, pr.n_agents(), std::log(2.0));
  double eta = 0.99 * rules.eta_max_convex;
  auto tr = run_algorithm(pr, Algo::dgd, opts(eta), RunOptions{500, 1, false}, nullptr, pp.train.w_mm);
  auto fb = tr.field(&Record::train_loss_mean);
  for (long T : {2L, 10L, 100L, 500L}) {
    auto r = check_train_bound_convex(fb, pr.model, pp.train, eta, T, rules.eta_max_convex);
    EXPECT_TRUE(r.passed()) << "T=" << T;
  }
  auto bad = check_train_bound_convex(fb, pr.model, pp.train, 2.0 * rules.eta_max_convex, 10, rules.eta_max_convex);
  EXPECT_FALSE(bad.preconditions_met);
  EXPECT_THROW(check_train_bound_convex(fb, pr.model, pp.train, eta, 501, rules.eta_max_convex), ConfigError);
}

TEST(Sandwich, GuardedRunHolds) {
  auto pp = small(LossKind::exponential, 40, 5, 4, 0.6, 9, true);
  const auto& pr = pp.problem;
  auto rules = compute_step_rules(pr.mixing, pr.model, pr.n_agents(), 1.0);
  double g = sandwich_guard(pr.mixing.spec, rules.h_eff, pr.n_agents(), 1.0);
  auto tr = run_algorithm(pr, Algo::dgd, opts(g), RunOptions{300, 1, false}, nullptr, pp.train.w_mm);
  auto r = check_sandwich(tr, pr.mixing, rules.h_eff, pr.n_agents());
  EXPECT_TRUE(r.preconditions_met);
  EXPECT_EQ(r.violations, 0);
  // t = 1 is consensual: F(W) = F(wbar)
  EXPECT_EQ(tr.records.front().train_loss_local, tr.records.front().train_loss_mean);
}

TEST(Sandwich, HugeStepViolates) {
  auto pp = small(LossKind::exponential, 40, 5, 4, 0.6, 9, true);
  const auto& pr = pp.problem;
  auto rules = compute_step_rules(pr.mixing, pr.model, pr.n_agents(), 1.0);
  auto tr = run_algorithm(pr, Algo::dgd, opts(50.0), RunOptions{20, 1, false}, nullptr, pp.train.w_mm);
  auto r = check_sandwich(tr, pr.mixing, rules.h_eff, pr.n_agents());
  EXPECT_FALSE(r.preconditions_met);
  // the inequality itself, without the guard
  CheckReport raw;
  for (const auto& rec : tr.records) raw.observe(rec.train_loss_local, 2.0 * rec.train_loss_mean, 1e-9);
  EXPECT_GT(raw.violations, 0);
}

TEST(Descent, Examples) {
  EXPECT_EQ(check_descent(from_values({3.0, 2.0, 2.0, 1.0})).violations, 0);
  EXPECT_EQ(check_descent(from_values({3.0})).violations, 0);
  EXPECT_EQ(check_descent(from_values({3.0, 2.0, 2.5, 1.0, 1.2})).violations, 2);
}

TEST(Descent, ExponentialRunUnderDelta) {
  auto pp = small(LossKind::exponential, 40, 5, 4, 0.6, 10, true);
  const auto& pr = pp.problem;
  auto rules = compute_step_rules(pr.mixing, pr.model, pr.n_agents(), 1.0);
  auto tr = run_algorithm(pr, Algo::dgd, opts(0.99 * rules.delta_exp), RunOptions{500, 1, false}, nullptr,
                          pp.train.w_mm);
  EXPECT_EQ(check_descent(tr).violations, 0);
}

TEST(Descent, LargeStepNegativeControl) {
  auto pp = small(LossKind::exponential, 40, 5, 4, 0.6, 10, true);
  auto tr = run_algorithm(pp.problem, Algo::dgd, opts(20.0), RunOptions{200, 1, false}, nullptr, pp.train.w_mm);
  EXPECT_GT(check_descent(tr).violations, 0);
}

TEST(FitRate, PlantedPowerLaw) {
  std::vector<double> t, v;
  for (int k = 1; k <= 1000; ++k) {
    t.push_back(k);
    v.push_back(5.0 / (double(k) * k));
  }
  auto f = fit_rate(t, v, 0.5);
  EXPECT_NEAR(f.exponent, -2.0, 1e-6);
  EXPECT_GT(f.r_squared, 0.999999);
  EXPECT_NEAR(std::exp(f.intercept), 5.0, 1e-6);
  for (double e : {-0.5, -1.0, -1.7, -3.0}) {
    std::vector<double> w;
    for (double x : t) w.push_back(2.0 * std::pow(x, e));
    EXPECT_NEAR(fit_rate(t, w, 0.5).exponent, e, 0.01);
  }
}

TEST(FitRate, LogCorrectedLaw) {
  std::vector<double> t, v, lx, ly;
  for (int k = 1000; k <= 10000; k += 10) {
    double x = k, y = 3.0 * std::log(x) * std::log(x) / x;
    t.push_back(x);
    v.push_back(y);
    lx.push_back(std::log(x));
    ly.push_back(std::log(y));
  }
  auto f = fit_rate(t, v, 1.0);
  EXPECT_NEAR(f.exponent, qr_slope(lx, ly), 1e-9);
  // local slope is -1 + 2/log t; frozen oracle value
  EXPECT_NEAR(f.exponent, -0.750, 0.01);
}

TEST(FitRate, ConstantAndErrors) {
  std::vector<double> t, v;
  for (int k = 1; k <= 50; ++k) {
    t.push_back(k);
    v.push_back(4.0);
  }
  EXPECT_NEAR(fit_rate(t, v, 0.5).exponent, 0.0, 1e-12);
  v[40] = 0.0;
  EXPECT_THROW(fit_rate(t, v, 0.5), ConfigError);
  std::vector<double> few_t{1, 2, 3}, few_v{1, 1, 1};
  EXPECT_THROW(fit_rate(few_t, few_v, 1.0), ConfigError);
}

TEST(PL, GeometricDecayAndConsensus) {
  auto pp = small(LossKind::squared, 15, 60, 3, 0.7, 11, true);
  const auto& pr = pp.problem;
  auto rules = compute_step_rules(pr.mixing, pr.model, pr.n_agents(), 1.0);
  auto tr = run_algorithm(pr, Algo::dgd, opts(rules.eta_max_pl), RunOptions{2000, 1, false}, nullptr, Vec());
  auto rep = check_pl_linear_convergence(tr, pr.mixing, pr.model, rules.eta_max_pl, rules.eta_max_pl);
  EXPECT_TRUE(rep.train.passed());
  EXPECT_TRUE(rep.consensus.passed());
  // t = 1 holds with equality
  EXPECT_EQ(tr.records.front().train_loss_mean, 1.0);
  EXPECT_LT(rep.log_linear.exponent, 0.0);
  EXPECT_LE(rep.log_linear.exponent, std::log(rep.zeta) + 1e-12);
}

TEST(PL, SingleSampleClosedForm) {
  // one agent, one sample: F(w) = (1 - x.w)^2 contracts by (1 - 2 eta |x|^2)^2 per step
  Problem pr;
  pr.model.kind = LossKind::squared;
  pr.mixing = build_mixing_matrix(generate_named_graph("complete", 1));
  pr.x = Mat(1, 2);
  pr.x << 0.6, 0.8;
  pr.shard_x = {pr.x};
  pr.model.smoothness_L = 2.0;
  pr.model.pl_mu = estimate_pl_constant(pr.x);
  double eta = 0.1;
  auto tr = run_algorithm(pr, Algo::dgd, opts(eta), RunOptions{100, 1, false}, nullptr, Vec());
  auto rep = check_pl_linear_convergence(tr, pr.mixing, pr.model, eta, 1.0);
  EXPECT_TRUE(rep.train.passed());
  EXPECT_NEAR(rep.log_linear.exponent, 2.0 * std::log(1.0 - 2.0 * eta), 1e-7);
}

TEST(PL, PreconditionFlag) {
  auto pp = small(LossKind::squared, 15, 60, 3, 0.7, 11, true);
  const auto& pr = pp.problem;
  auto rules = compute_step_rules(pr.mixing, pr.model, pr.n_agents(), 1.0);
  auto tr = run_algorithm(pr, Algo::dgd, opts(rules.eta_max_pl), RunOptions{20, 1, false}, nullptr, Vec());
  auto rep = check_pl_linear_convergence(tr, pr.mixing, pr.model, 2.0 * rules.eta_max_pl, rules.eta_max_pl);
  EXPECT_FALSE(rep.train.preconditions_met);
}

TEST(TestMinimum, Examples) {
  std::vector<double> t, dec, vee;
  for (int k = 1; k <= 50; ++k) {
    t.push_back(k);
    dec.push_back(1.0 / k);
    vee.push_back(std::abs(k - 20.0));
  }
  EXPECT_EQ(detect_test_loss_minimum(t, dec).first, 50.0);
  EXPECT_EQ(detect_test_loss_minimum(t, vee).first, 20.0);
  EXPECT_THROW(detect_test_loss_minimum({}, {}), ConfigError);
}

TEST(TestMinimum, SmoothingIgnoresSpike) {
  std::vector<double> t, v;
  for (int k = 1; k <= 40; ++k) {
    t.push_back(k);
    v.push_back(std::abs(k - 30.0));
  }
  v[9] = -5.0;  // isolated dip at t = 10
  EXPECT_EQ(detect_test_loss_minimum(t, v).first, 30.0);
}

TEST(TestMinimum, OverparameterizedLeastSquares) {
  auto pp = small(LossKind::squared, 50, 200, 5, 0.4, 1, false, 2000);
  const auto& pr = pp.problem;
  double eta = 0.5 / pr.model.smoothness_L;
  auto tr = run_algorithm(pr, Algo::dgd, opts(eta), RunOptions{2000, 1, false}, &pp.holdout_x, Vec());
  auto [tmin, v] = detect_test_loss_minimum(tr);
  EXPECT_LT(tmin, 1000.0);
  EXPECT_GT(tr.records.back().test_loss, v);
}

TEST(Report, JsonShape) {
  CheckReport r;
  r.check = "x";
  r.observe(1.0, 2.0, 0.0);
  r.observe(3.0, 2.0, 0.0, {{"t", 2}});
  auto j = to_json(r);
  EXPECT_EQ(j["violations"], 1);
  EXPECT_EQ(j["max_slack"], 1.0);
  EXPECT_EQ(j["details"].size(), 1u);
  EXPECT_TRUE(to_json(CheckReport{})["max_slack"].is_null());
}

TEST(StabilityBound, SingleIterationByHand) {
  StabilityBoundParams kp;
  kp.T = 1;
  kp.n_seeds = 1;
  auto r = check_stability_bound(kp);
  ASSERT_TRUE(r.report.preconditions_met);
  // w = 0 after one recorded state: every logistic loss is log 2
  EXPECT_NEAR(r.mean_lhs, std::log(2.0), 1e-12);
  EXPECT_GE(r.mean_rhs, 4.0 * std::log(2.0) - 1e-12);
  EXPECT_EQ(r.loo_distance.at(0), 0.0);
  EXPECT_TRUE(r.report.passed());
}

TEST(StabilityBound, LeaveOneOutGrowsSublinearly) {
  StabilityBoundParams kp;
  kp.n_seeds = 3;
  kp.holdout_m = 200;
  kp.T = 50;
  auto a = check_stability_bound(kp);
  kp.T = 200;
  auto b = check_stability_bound(kp);
  for (int s = 0; s < 3; ++s) {
    EXPECT_GT(a.loo_distance[s], 0.0);
    EXPECT_GT(b.loo_distance[s], a.loo_distance[s]);
    EXPECT_LT(b.loo_distance[s], 4.0 * a.loo_distance[s]);
  }
  EXPECT_TRUE(b.report.passed());
}
