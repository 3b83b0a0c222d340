// csl: run, sweep, reproduce, verify and fit-rate front end.
//
// Exit codes: 0 ok, 1 verification failed, 2 bad config or usage, 3 engine abort.

#include "csl/csl.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kVerifyFailed = 1, kUsage = 2, kAbort = 3 };

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string scale;
  bool quiet = false;
};

std::string out_root(const Globals& g) {
  if (!g.out.empty()) return g.out;
  if (const char* e = std::getenv("CSL_OUT_DIR"); e && *e) return e;
  return "out";
}

void say(const Globals& g, const std::string& s) {
  if (!g.quiet) std::cout << s << '\n';
}

void report_aborts(const csl::RunBundle& b) {
  for (const auto& r : b.runs)
    if (r.trajectory.aborted())
      std::cerr << "abort: " << r.spec.label << ": " << r.trajectory.abort_reason << '\n';
}

csl::ExperimentConfig load(const std::string& path, const Globals& g, const std::string& default_scale) {
  auto c = csl::load_config(path);
  c = csl::apply_scale(c, g.scale.empty() ? default_scale : g.scale);
  if (g.seed) {
    c.dataset.seed = *g.seed;
    c.topology.seed = *g.seed;
  }
  return c;
}

int cmd_run(const Globals& g, const std::string& config) {
  auto c = load(config, g, "paper");
  auto b = csl::run_experiment(c);
  fs::path dir = fs::path(out_root(g)) / c.name;
  auto files = csl::write_bundle(b, dir);
  say(g, "wrote " + std::to_string(files.size()) + " files to " + dir.string());
  for (const auto& r : b.reports)
    if (!g.quiet) std::cout << r.dump() << '\n';
  if (b.any_aborted()) {
    report_aborts(b);
    return kAbort;
  }
  return kOk;
}

int cmd_sweep(const Globals& g, const std::string& config, const std::string& param,
              const std::vector<double>& values) {
  auto c = load(config, g, "paper");
  auto entries = csl::sweep(c, param, values);
  fs::path dir = fs::path(out_root(g)) / (c.name + "_sweep_" + param);
  fs::create_directories(dir);
  bool aborted = false;
  for (const auto& e : entries) {
    if (!e.bundle) {
      std::cerr << "value " << csl::format_double(e.value) << ": " << e.error << '\n';
      continue;
    }
    csl::write_bundle(*e.bundle, dir / (param + "=" + csl::format_double(e.value)));
    if (e.bundle->any_aborted()) {
      aborted = true;
      report_aborts(*e.bundle);
    }
  }
  std::ofstream sum(dir / "summary.csv");
  csl::write_sweep_summary(entries, sum);
  if (!g.quiet) csl::write_sweep_summary(entries, std::cout);
  for (const auto& e : entries)
    if (!e.bundle) return kUsage;
  return aborted ? kAbort : kOk;
}

int cmd_reproduce(const Globals& g, const std::string& figure) {
  std::uint64_t seed = g.seed.value_or(1);
  auto res = csl::reproduce(figure, g.scale.empty() ? "desk" : g.scale, out_root(g), seed);
  for (const auto& f : res.files) say(g, f);
  for (const auto& b : res.bundles) report_aborts(b);
  // divergence at some step size is part of what a figure shows
  return res.all_aborted() ? kAbort : kOk;
}

int cmd_verify(const Globals& g, const std::string& suite, double eta_scale) {
  csl::VerifyOptions o;
  o.seed = g.seed.value_or(1);
  o.eta_scale = eta_scale;
  auto lines = csl::run_suite(suite, o);
  bool ok = true;
  std::size_t w = 4;
  for (const auto& l : lines) w = std::max(w, l.name.size());
  for (const auto& l : lines) {
    ok = ok && l.passed;
    if (!g.quiet || !l.passed)
      std::cout << (l.passed ? "pass  " : "FAIL  ") << l.name << std::string(w + 2 - l.name.size(), ' ')
                << l.detail << '\n';
  }
  return ok ? kOk : kVerifyFailed;
}

int cmd_fit_rate(const Globals& g, const std::string& csv, const std::string& field, double window) {
  auto cols = csl::read_csv_columns(csv);
  if (!cols.count("t")) throw csl::ConfigError(csv + ": no t column");
  if (!cols.count(field)) throw csl::ConfigError(csv + ": no column " + field);
  std::vector<double> t, v;
  const auto& tc = cols.at("t");
  const auto& vc = cols.at(field);
  for (std::size_t i = 0; i < tc.size(); ++i) {
    if (!(vc[i] > 0.0)) continue;  // log scale; NaN test columns included
    t.push_back(tc[i]);
    v.push_back(vc[i]);
  }
  auto f = csl::fit_rate(t, v, window);
  nlohmann::json j = {{"field", field},         {"exponent", f.exponent}, {"intercept", f.intercept},
                      {"r_squared", f.r_squared}, {"t_lo", f.t_lo},       {"t_hi", f.t_hi},
                      {"points", f.points}};
  (void)g;
  std::cout << j.dump(2) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized learning on separable data: simulator and checks"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Seed override for data and graph");
  app.add_option("--out", g.out, "Output root (default $CSL_OUT_DIR or ./out)");
  app.add_option("--scale", g.scale, "paper or desk")->check(CLI::IsMember({"paper", "desk"}));
  app.add_flag("--quiet,-q", g.quiet, "Print only failures and errors");
  app.fallthrough();

  std::string config, param, figure, suite = "all", csv, field = "train_loss_mean";
  std::vector<double> values;
  double window = 0.5, eta_scale = 1.0;

  auto* run = app.add_subcommand("run", "Run one experiment config");
  run->add_option("--config", config, "Config JSON")->required();

  auto* sw = app.add_subcommand("sweep", "Run a config across parameter values");
  sw->add_option("--config", config, "Config JSON")->required();
  sw->add_option("--param", param, "T, seed, n_agents, p_connect, eta, eta:<label>, gamma:<label>")->required();
  sw->add_option("--values", values, "Comma separated values")->required()->delimiter(',');

  auto* rep = app.add_subcommand("reproduce", "Regenerate a paper figure (desk scale by default)");
  rep->add_option("--figure", figure, "fig1_left, fig2, fig3, fig4 or fig5")->required();

  auto* ver = app.add_subcommand("verify", "Run an invariant suite");
  ver->add_option("--suite", suite, "mixing, losses, engine, bounds or all");
  ver->add_option("--eta-scale", eta_scale, "Multiply the step-size rules in the bounds suite");

  auto* fr = app.add_subcommand("fit-rate", "Fit a log-log slope to a trajectory CSV column");
  fr->add_option("--csv", csv, "Trajectory CSV")->required();
  fr->add_option("--field", field, "Column name");
  fr->add_option("--window", window, "Fraction of the t range to fit, from the end");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*run) return cmd_run(g, config);
    if (*sw) return cmd_sweep(g, config, param, values);
    if (*rep) return cmd_reproduce(g, figure);
    if (*ver) return cmd_verify(g, suite, eta_scale);
    if (*fr) return cmd_fit_rate(g, csv, field, window);
  } catch (const csl::EngineAbort& e) {
    std::cerr << "abort: " << e.what() << '\n';
    return kAbort;
  } catch (const csl::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
