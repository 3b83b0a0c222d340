#ifndef CSL_ENGINE_HPP
#define CSL_ENGINE_HPP

#include "csl/data.hpp"
#include "csl/losses.hpp"
#include "csl/topology.hpp"
#include "csl/types.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace csl {

enum class Algo { dgd, dgt, fdlr, fdlr_nesterov, normalized_dgd, central_gd, central_ngd };

inline std::string to_string(Algo a) {
  switch (a) {
    case Algo::dgd: return "dgd";
    case Algo::dgt: return "dgt";
    case Algo::fdlr: return "fdlr";
    case Algo::fdlr_nesterov: return "fdlr_nesterov";
    case Algo::normalized_dgd: return "normalized_dgd";
    case Algo::central_gd: return "central_gd";
    case Algo::central_ngd: return "central_ngd";
  }
  return "?";
}

inline Algo algo_from_string(const std::string& s) {
  for (Algo a : {Algo::dgd, Algo::dgt, Algo::fdlr, Algo::fdlr_nesterov, Algo::normalized_dgd,
                 Algo::central_gd, Algo::central_ngd})
    if (to_string(a) == s) return a;
  throw ConfigError("unknown algorithm: " + s);
}

inline bool is_central(Algo a) { return a == Algo::central_gd || a == Algo::central_ngd; }
inline bool uses_tracker(Algo a) { return a == Algo::dgt || a == Algo::fdlr || a == Algo::fdlr_nesterov; }

struct Schedule {
  enum Kind { constant, inverse_sqrt } kind = constant;
  double c = 0.1;

  double at(long t) const { return kind == constant ? c : c / std::sqrt(static_cast<double>(t)); }
};

/// Everything a run needs besides the evolving state.
struct Problem {
  LossModel model;
  MixingMatrix mixing;
  Mat x;                    // all signed samples
  std::vector<Mat> shard_x;  // per-agent signed samples

  int n_agents() const { return static_cast<int>(shard_x.size()); }
  Eigen::Index dim() const { return x.cols(); }
};

inline Problem make_problem(const Dataset& ds, const Partition& p, const MixingMatrix& mix,
                            const LossModel& model) {
  if (mix.n() != p.n_agents()) throw ConfigError("mixing matrix and partition disagree on N");
  Problem pr{model, mix, ds.signed_features(), {}};
  for (const auto& s : p.shards) {
    if (s.empty()) throw ConfigError("empty shard");
    pr.shard_x.push_back(gather_rows(pr.x, s));
  }
  return pr;
}

struct AlgoState {
  Algo algo = Algo::dgd;
  Mat W, V, Z;
  Mat G;        // local gradients at W
  Vec F_local;  // local risks at W
  long t = 1;
  Schedule schedule;
  double gamma_momentum = 0.0;
  bool recenter = false;
  double last_eta = 0.0;
};

struct StepOptions {
  Schedule schedule;
  double gamma_momentum = 0.0;
  // Re-project the tracker onto its conserved mean after each update.
  // Exact in real arithmetic; counters rounding drift under long constant-step runs.
  bool recenter = false;
};

namespace detail {

inline void check_finite(const Mat& m, const char* what) {
  if (!m.allFinite()) throw EngineAbort(std::string("non-finite ") + what);
}

inline Mat row_normalized(const Mat& v, const char* what) {
  Mat out(v.rows(), v.cols());
  for (Eigen::Index l = 0; l < v.rows(); ++l) {
    double nv = v.row(l).norm();
    if (!(nv >= 1e-15)) throw EngineAbort(std::string("vanishing ") + what);
    out.row(l) = v.row(l) / nv;
  }
  return out;
}

}  // namespace detail

/// Row l of G is grad F_l(w_l). Central algorithms use the full sample set.
inline void local_gradients(const Problem& pr, Algo algo, const Mat& w, Mat& g, Vec& f) {
  g.resize(w.rows(), w.cols());
  f.resize(w.rows());
  for (Eigen::Index l = 0; l < w.rows(); ++l) {
    const Mat& xs = is_central(algo) ? pr.x : pr.shard_x[static_cast<std::size_t>(l)];
    Vec gl;
    f(l) = risk_and_grad(pr.model.kind, xs, w.row(l).transpose(), &gl);
    g.row(l) = gl.transpose();
  }
  detail::check_finite(g, "gradient");
}

inline AlgoState init_state(Algo algo, const Problem& pr, const StepOptions& opt) {
  AlgoState s;
  s.algo = algo;
  s.schedule = opt.schedule;
  s.gamma_momentum = opt.gamma_momentum;
  s.recenter = opt.recenter;
  const Eigen::Index rows = is_central(algo) ? 1 : pr.n_agents();
  s.W = Mat::Zero(rows, pr.dim());
  local_gradients(pr, algo, s.W, s.G, s.F_local);
  if (uses_tracker(algo)) s.V = s.G;
  if (algo == Algo::fdlr_nesterov) s.Z = Mat::Zero(rows, pr.dim());
  return s;
}

namespace detail {

inline void tracker_update(const Problem& pr, AlgoState& s, const Mat& wn) {
  Mat gn;
  Vec fn;
  local_gradients(pr, s.algo, wn, gn, fn);
  const Mat& a = pr.mixing.weights;
  Mat vn = a * s.V + gn - s.G;
  if (s.recenter) {
    Eigen::RowVectorXd shift = vn.colwise().mean() - gn.colwise().mean();
    vn.rowwise() -= shift;
  }
  detail::check_finite(vn, "tracker");
  s.W = wn;
  s.V = std::move(vn);
  s.G = std::move(gn);
  s.F_local = std::move(fn);
}

inline void plain_update(const Problem& pr, AlgoState& s, Mat wn) {
  detail::check_finite(wn, "parameters");
  s.W = std::move(wn);
  local_gradients(pr, s.algo, s.W, s.G, s.F_local);
}

}  // namespace detail

inline void step_dgd(AlgoState& s, const Problem& pr) {
  double eta = s.schedule.at(s.t);
  detail::plain_update(pr, s, pr.mixing.weights * s.W - eta * s.G);
  s.last_eta = eta;
  ++s.t;
}

inline void step_dgt(AlgoState& s, const Problem& pr) {
  double eta = s.schedule.at(s.t);
  Mat wn = pr.mixing.weights * (s.W - eta * s.V);
  detail::check_finite(wn, "parameters");
  detail::tracker_update(pr, s, wn);
  s.last_eta = eta;
  ++s.t;
}

inline void step_fdlr(AlgoState& s, const Problem& pr) {
  double eta = s.schedule.at(s.t);
  Mat vt = detail::row_normalized(s.V, "tracker");
  Mat wn = pr.mixing.weights * (s.W - eta * vt);
  detail::check_finite(wn, "parameters");
  detail::tracker_update(pr, s, wn);
  s.last_eta = eta;
  ++s.t;
}

inline void step_fdlr_nesterov(AlgoState& s, const Problem& pr) {
  double eta = s.schedule.at(s.t);
  Mat vt = detail::row_normalized(s.V, "tracker");
  s.Z = s.gamma_momentum * (s.Z + vt);
  Mat wn = pr.mixing.weights * (s.W - eta * (s.Z + vt));
  detail::check_finite(wn, "parameters");
  detail::tracker_update(pr, s, wn);
  s.last_eta = eta;
  ++s.t;
}

inline void step_normalized_dgd(AlgoState& s, const Problem& pr) {
  double eta = s.schedule.at(s.t);
  Mat gt = detail::row_normalized(s.G, "local gradient");
  detail::plain_update(pr, s, pr.mixing.weights * s.W - eta * gt);
  s.last_eta = eta;
  ++s.t;
}

inline void step_centralized(AlgoState& s, const Problem& pr, bool normalized) {
  double eta = s.schedule.at(s.t);
  Mat dir = normalized ? detail::row_normalized(s.G, "gradient") : s.G;
  detail::plain_update(pr, s, s.W - eta * dir);
  s.last_eta = eta;
  ++s.t;
}

inline void step(AlgoState& s, const Problem& pr) {
  switch (s.algo) {
    case Algo::dgd: step_dgd(s, pr); break;
    case Algo::dgt: step_dgt(s, pr); break;
    case Algo::fdlr: step_fdlr(s, pr); break;
    case Algo::fdlr_nesterov: step_fdlr_nesterov(s, pr); break;
    case Algo::normalized_dgd: step_normalized_dgd(s, pr); break;
    case Algo::central_gd: step_centralized(s, pr, false); break;
    case Algo::central_ngd: step_centralized(s, pr, true); break;
  }
}

struct StepSizeRules {
  double eta_max_convex = 0.0;  // averaged train-loss rule, 0 when L is infinite
  double eta_max_pl = 0.0;      // PL rule, 0 without mu
  double delta_exp = 0.0;       // descent constant, 0 when tau = 0
  double eta_max_consensus = 0.0;  // (1 - lambda) / (4 L)
  double eta_exp = 0.0;         // min(delta / F1, (1 - lambda) / (4 h))
  double h_eff = 0.0;           // max(c, h), so that c = h holds
  std::vector<std::string> notes;
};

/// Descent constant of the exponential-tail analysis.
inline double descent_delta(double h, double tau, int n_agents, double beta1, double beta2) {
  double n = static_cast<double>(n_agents);
  double m = std::max({4.0 * h * h * h * n / (tau * tau), h * h, 6.0 * h * h * beta2 / (1.0 - beta1),
                       4.0 * h * h * std::sqrt(beta2) / (tau * (1.0 - beta1))});
  return 1.0 / m;
}

/// Largest step allowed by the sandwich bound at the current M_t.
inline double sandwich_guard(const SpectralConstants& s, double h, int n_agents, double m_t) {
  return (1.0 - s.lambda) * std::sqrt(1.0 - s.beta1) /
         (8.0 * h * h * static_cast<double>(n_agents) * m_t * std::sqrt(s.beta2));
}

inline StepSizeRules compute_step_rules(const MixingMatrix& mix, const LossModel& m, int n_agents,
                                        double f_at_init) {
  StepSizeRules r;
  const auto& s = mix.spec;
  const double L = m.smoothness_L;
  if (std::isfinite(L) && L > 0.0) {
    r.eta_max_convex = std::min(1.0 - s.alpha1, std::sqrt((1.0 - s.alpha1) / (2.0 * s.alpha2))) / L;
    r.eta_max_consensus = (1.0 - s.lambda) / (4.0 * L);
    if (m.pl_mu > 0.0) {
      r.eta_max_pl = std::min({(1.0 - s.alpha1) / m.pl_mu,
                               std::sqrt((1.0 - s.alpha1) * m.pl_mu / s.alpha2) / (2.0 * L * L), 1.0 / L});
    } else {
      r.notes.emplace_back("no PL constant: eta_max_pl unavailable");
    }
  } else {
    r.notes.emplace_back("loss not globally smooth: smooth-loss rules unavailable");
  }
  r.h_eff = std::max(m.selfbound_c, m.hessian_h);
  if (m.lower_tau > 0.0 && r.h_eff > 0.0) {
    r.delta_exp = descent_delta(r.h_eff, m.lower_tau, n_agents, s.beta1, s.beta2);
    r.eta_exp = std::min(r.delta_exp / f_at_init, (1.0 - s.lambda) / (4.0 * r.h_eff));
  } else {
    r.notes.emplace_back("tau = 0: descent constant unavailable");
  }
  return r;
}

}  // namespace csl

#endif  // CSL_ENGINE_HPP
