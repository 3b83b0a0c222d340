#ifndef CSL_FIGURES_HPP
#define CSL_FIGURES_HPP

#include "csl/harness.hpp"
#include "csl/plot.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace csl {

inline const std::vector<std::string>& figure_names() {
  static const std::vector<std::string> f{"fig1_left", "fig2", "fig3", "fig4", "fig5"};
  return f;
}

namespace detail {

inline AlgoSpec algo(const std::string& label, Algo a, double eta, double gamma = 0.0, bool recenter = false) {
  AlgoSpec s;
  s.label = label;
  s.algo = a;
  s.eta = eta;
  s.gamma = gamma;
  s.recenter = recenter;
  return s;
}

inline ExperimentConfig base_config(const std::string& name, long n, long d, int agents, double p, LossKind loss,
                                    long T) {
  ExperimentConfig c;
  c.name = name;
  c.dataset.n = n;
  c.dataset.d = d;
  c.dataset.seed = 1;
  c.topology.n_agents = agents;
  c.topology.p_connect = p;
  c.topology.seed = 1;
  c.loss = loss;
  c.T = T;
  return c;
}

}  // namespace detail

/// Paper-scale configurations behind each figure (one or more runs).
inline std::vector<ExperimentConfig> figure_configs(const std::string& fig) {
  using detail::algo;
  using detail::base_config;
  std::vector<ExperimentConfig> out;
  if (fig == "fig1_left") {
    auto c = base_config("fig1_left", 100, 25, 50, 0.3, LossKind::exponential, 1000);
    c.algos = {algo("dgd", Algo::dgd, 0.1), algo("dgt", Algo::dgt, 0.05),
               algo("fdlr", Algo::fdlr, 0.5, 0.0, true),
               algo("fdlr_nesterov", Algo::fdlr_nesterov, 0.2, 0.8, true)};
    out.push_back(c);
  } else if (fig == "fig2") {
    auto c = base_config("fig2", 800, 50, 50, 0.3, LossKind::exponential, 2000);
    c.algos = {algo("dgd", Algo::dgd, 0.01), algo("dgt", Algo::dgt, 0.01),
               algo("fdlr", Algo::fdlr, 0.4, 0.0, true),
               algo("fdlr_nesterov", Algo::fdlr_nesterov, 0.5, 0.5, true)};
    out.push_back(c);
  } else if (fig == "fig3") {
    auto a = base_config("fig3_ratio_0.05", 1000, 50, 10, 0.4, LossKind::exponential, 100000);
    a.algos = {algo("dgd", Algo::dgd, 0.1), algo("central_gd", Algo::central_gd, 0.1)};
    auto b = base_config("fig3_ratio_0.5", 1000, 500, 10, 0.4, LossKind::exponential, 100000);
    b.algos = {algo("dgd", Algo::dgd, 0.1)};
    out = {a, b};
  } else if (fig == "fig4") {
    auto c = base_config("fig4", 500, 2000, 5, 0.4, LossKind::squared, 20000);
    AlgoSpec s = algo("dgd", Algo::dgd, 0.5);
    s.eta_rule = "inv_L";
    c.algos = {s};
    c.checks = {"pl"};
    out.push_back(c);
  } else if (fig == "fig5") {
    auto c = base_config("fig5", 100, 50, 10, 0.4, LossKind::exponential, 1000);
    c.algos = {algo("dgd", Algo::dgd, 0.1), algo("fdlr", Algo::fdlr, 0.5, 0.0, true),
               algo("ndgd_0.5", Algo::normalized_dgd, 0.5), algo("ndgd_1", Algo::normalized_dgd, 1.0),
               algo("ndgd_2", Algo::normalized_dgd, 2.0), algo("ndgd_5", Algo::normalized_dgd, 5.0)};
    out.push_back(c);
  } else {
    throw ConfigError("unknown figure: " + fig);
  }
  return out;
}

struct ReproduceResult {
  std::vector<RunBundle> bundles;
  std::vector<std::string> files;

  bool any_aborted() const {
    for (const auto& b : bundles)
      if (b.any_aborted()) return true;
    return false;
  }
  bool all_aborted() const {
    for (const auto& b : bundles)
      if (!b.all_aborted()) return false;
    return true;
  }
};

namespace detail {

/// Series of one field from t >= t_from, skipping values a log axis cannot show.
inline PlotSeries series_of(const std::string& label, const Trajectory& tr, double Record::*f, bool positive,
                            long t_from = 1, double scale = 1.0) {
  PlotSeries s;
  s.label = label;
  for (const auto& r : tr.records) {
    double v = r.*f * scale;
    if (r.t < t_from || (positive && !(v > 0.0))) continue;
    s.x.push_back(static_cast<double>(r.t));
    s.y.push_back(v);
  }
  return s;
}

inline const AlgoRun* find_run(const RunBundle& b, const std::string& label) {
  for (const auto& r : b.runs)
    if (r.spec.label == label) return &r;
  return nullptr;
}

inline void add_guide(PlotSpec& p, double exponent, const std::string& label) {
  // anchor on the first series' last point, half a decade above
  for (const auto& s : p.series) {
    if (s.x.empty()) continue;
    p.guides.push_back({exponent, s.x.back(), s.y.back() * 3.0, label});
    return;
  }
}

inline std::vector<PlotSpec> figure_plots(const std::string& fig, const std::vector<RunBundle>& bundles) {
  std::vector<PlotSpec> plots;
  auto all_series = [&](const RunBundle& b, double Record::*f, bool pos, long from = 1) {
    std::vector<PlotSeries> out;
    for (const auto& r : b.runs) {
      auto s = series_of(r.spec.label, r.trajectory, f, pos, from);
      if (!s.x.empty()) out.push_back(std::move(s));
    }
    return out;
  };
  if (fig == "fig1_left" || fig == "fig5") {
    PlotSpec p;
    p.title = fig == "fig1_left" ? "Directional convergence" : "Normalized DGD ablation";
    p.ylabel = "||w_1/||w_1|| - w_mm/||w_mm|| ||";
    p.log_y = true;
    // agent 1 here, the CSV column is for wbar
    p.series = all_series(bundles.at(0), &Record::dir_dist_agent0, true);
    plots.push_back(p);
  } else if (fig == "fig2") {
    PlotSpec a;
    a.title = "Training misclassification";
    a.ylabel = "error";
    a.series = all_series(bundles.at(0), &Record::err_train, false);
    PlotSpec b = a;
    b.title = "Test misclassification";
    b.series = all_series(bundles.at(0), &Record::err_test, false);
    plots = {a, b};
  } else if (fig == "fig3") {
    PlotSpec cons, train, test;
    cons.title = "Consensus error";
    cons.ylabel = "(1/N) ||W - Wbar||_F^2";
    train.title = "Train loss";
    train.ylabel = "F(wbar)";
    test.title = "Test loss";
    test.ylabel = "F_test(wbar)";
    for (auto* p : {&cons, &train, &test}) p->log_x = p->log_y = true;
    for (const auto& b : bundles) {
      const AlgoRun* r = find_run(b, "dgd");
      if (!r) continue;
      double n_agents = static_cast<double>(b.config.topology.n_agents);
      char tag[32];
      std::snprintf(tag, sizeof tag, "d/n=%.3g",
                    static_cast<double>(b.config.dataset.d) / static_cast<double>(b.config.dataset.n));
      auto cs = series_of(tag, r->trajectory, &Record::consensus_sq, true, 2, 1.0 / n_agents);
      if (!cs.x.empty()) cons.series.push_back(cs);
      auto ts = series_of(tag, r->trajectory, &Record::train_loss_mean, true);
      if (!ts.x.empty()) train.series.push_back(ts);
    }
    const auto& first = bundles.at(0);
    for (const auto& r : first.runs) {
      auto s = series_of(r.spec.label, r.trajectory, &Record::test_loss, true);
      if (!s.x.empty()) test.series.push_back(s);
    }
    add_guide(cons, -2.0, "slope -2");
    add_guide(train, -1.0, "slope -1");
    plots = {cons, train, test};
  } else if (fig == "fig4") {
    PlotSpec a, b;
    a.title = "Train loss and consensus";
    a.ylabel = "value";
    a.log_y = true;
    const auto& r = bundles.at(0).runs.at(0);
    a.series.push_back(series_of("train loss", r.trajectory, &Record::train_loss_mean, true));
    a.series.push_back(series_of("consensus", r.trajectory, &Record::consensus_sq, true, 2));
    b.title = "Test loss";
    b.ylabel = "F_test(wbar)";
    b.log_y = true;
    b.series.push_back(series_of("dgd", r.trajectory, &Record::test_loss, true));
    plots = {a, b};
  }
  return plots;
}

inline std::vector<std::string> figure_plot_names(const std::string& fig) {
  if (fig == "fig1_left") return {"fig1_left_directional"};
  if (fig == "fig2") return {"fig2_train_error", "fig2_test_error"};
  if (fig == "fig3") return {"fig3_consensus", "fig3_train_loss", "fig3_test_loss"};
  if (fig == "fig4") return {"fig4_train_consensus", "fig4_test_loss"};
  if (fig == "fig5") return {"fig5_directional"};
  return {};
}

}  // namespace detail

/// Runs a canned figure, writes one directory of CSVs per run and one SVG per panel.
inline ReproduceResult reproduce(const std::string& fig, const std::string& scale,
                                 const std::filesystem::path& out_dir, std::uint64_t seed = 1) {
  ReproduceResult res;
  auto configs = figure_configs(fig);
  for (auto& c : configs) {
    c = apply_scale(c, scale);
    c.dataset.seed = seed;
    c.topology.seed = seed;
    res.bundles.push_back(run_experiment(c));
    auto files = write_bundle(res.bundles.back(), out_dir / fig / c.name);
    res.files.insert(res.files.end(), files.begin(), files.end());
  }
  auto plots = detail::figure_plots(fig, res.bundles);
  auto names = detail::figure_plot_names(fig);
  for (std::size_t i = 0; i < plots.size(); ++i) {
    if (plots[i].series.empty()) continue;
    auto p = out_dir / fig / (names[i] + ".svg");
    emit_plot(plots[i], p.string());
    res.files.push_back(p.string());
  }
  return res;
}

}  // namespace csl

#endif  // CSL_FIGURES_HPP
