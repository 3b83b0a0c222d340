#ifndef CSL_HARNESS_HPP
#define CSL_HARNESS_HPP

#include "csl/data.hpp"
#include "csl/engine.hpp"
#include "csl/losses.hpp"
#include "csl/metrics.hpp"
#include "csl/topology.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace csl {

using json = nlohmann::json;

struct DatasetSpec {
  std::string source = "synthetic";  // synthetic | csv
  std::string path;
  long n = 100;
  long d = 25;
  std::uint64_t seed = 1;
  long holdout_m = -1;  // -1: 10 n capped at 1e5
  bool normalize = false;
};

struct TopologySpec {
  std::string kind = "erdos_renyi";
  int n_agents = 10;
  double p_connect = 0.4;
  std::uint64_t seed = 1;
  std::string scheme = "metropolis";
};

/// Step size: a number, or a rule computed from the problem constants times a factor.
struct AlgoSpec {
  std::string label;
  Algo algo = Algo::dgd;
  std::string eta_rule = "const";  // const | train_bound | pl | consensus | descent | sandwich | inv_L
  double eta = 0.1;                 // the value for const, the factor otherwise
  std::string schedule = "constant";  // constant | inverse_sqrt
  double gamma = 0.0;
  bool recenter = false;
};

struct ExperimentConfig {
  std::string name = "experiment";
  DatasetSpec dataset;
  TopologySpec topology;
  std::optional<std::uint64_t> partition_seed;
  LossKind loss = LossKind::exponential;
  std::vector<AlgoSpec> algos;
  long T = 1000;
  long record_every = -1;  // -1: 1 for T <= 1000, else 10
  std::vector<std::string> checks;
  std::string output_dir;

  long effective_record_every() const {
    if (record_every > 0) return record_every;
    return T <= 1000 ? 1 : 10;
  }
  long effective_holdout() const {
    if (dataset.holdout_m >= 0) return dataset.holdout_m;
    return std::min<long>(10 * dataset.n, 100000);
  }
  std::uint64_t effective_partition_seed() const { return partition_seed.value_or(dataset.seed); }
};

namespace detail {

template <class T>
T get_or(const json& j, const char* key, T def) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return def;
  return it->get<T>();
}

inline void require_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError("unknown field '" + it.key() + "' in " + where);
  }
}

}  // namespace detail

inline const std::vector<std::string>& known_checks() {
  static const std::vector<std::string> k{"descent", "sandwich", "consensus_recursion", "train_bound", "pl"};
  return k;
}

inline ExperimentConfig config_from_json(const json& j) {
  try {
    detail::require_keys(j, {"name", "dataset", "topology", "partition_seed", "loss", "algos", "T",
                             "record_every", "checks", "output_dir"},
                         "config");
    ExperimentConfig c;
    c.name = detail::get_or<std::string>(j, "name", "experiment");
    const json& dj = j.at("dataset");
    detail::require_keys(dj, {"source", "path", "n", "d", "seed", "holdout_m", "normalize"}, "dataset");
    c.dataset.source = detail::get_or<std::string>(dj, "source", "synthetic");
    c.dataset.path = detail::get_or<std::string>(dj, "path", "");
    c.dataset.n = detail::get_or<long>(dj, "n", 100);
    c.dataset.d = detail::get_or<long>(dj, "d", 25);
    c.dataset.seed = detail::get_or<std::uint64_t>(dj, "seed", 1);
    c.dataset.holdout_m = detail::get_or<long>(dj, "holdout_m", -1);
    c.dataset.normalize = detail::get_or<bool>(dj, "normalize", false);
    if (c.dataset.source != "synthetic" && c.dataset.source != "csv")
      throw ConfigError("dataset.source must be synthetic or csv");
    if (c.dataset.source == "csv" && c.dataset.path.empty()) throw ConfigError("dataset.path required for csv");
    const json& tj = j.at("topology");
    detail::require_keys(tj, {"kind", "n_agents", "p_connect", "seed", "scheme"}, "topology");
    c.topology.kind = detail::get_or<std::string>(tj, "kind", "erdos_renyi");
    c.topology.n_agents = detail::get_or<int>(tj, "n_agents", 10);
    c.topology.p_connect = detail::get_or<double>(tj, "p_connect", 0.4);
    c.topology.seed = detail::get_or<std::uint64_t>(tj, "seed", 1);
    c.topology.scheme = detail::get_or<std::string>(tj, "scheme", "metropolis");
    if (j.contains("partition_seed") && !j.at("partition_seed").is_null())
      c.partition_seed = j.at("partition_seed").get<std::uint64_t>();
    c.loss = loss_kind_from_string(detail::get_or<std::string>(j, "loss", "exponential"));
    for (const auto& aj : j.at("algos")) {
      detail::require_keys(aj, {"label", "algo", "eta", "eta_rule", "schedule", "gamma", "recenter"}, "algos[]");
      AlgoSpec a;
      a.algo = algo_from_string(aj.at("algo").get<std::string>());
      a.label = detail::get_or<std::string>(aj, "label", to_string(a.algo));
      a.eta_rule = detail::get_or<std::string>(aj, "eta_rule", "const");
      a.eta = detail::get_or<double>(aj, "eta", 0.1);
      a.schedule = detail::get_or<std::string>(aj, "schedule", "constant");
      a.gamma = detail::get_or<double>(aj, "gamma", 0.0);
      a.recenter = detail::get_or<bool>(aj, "recenter", false);
      if (!(a.eta > 0.0)) throw ConfigError("eta must be positive for " + a.label);
      if (a.schedule != "constant" && a.schedule != "inverse_sqrt")
        throw ConfigError("schedule must be constant or inverse_sqrt");
      static const char* rules[] = {"const", "train_bound", "pl", "consensus", "descent", "sandwich", "inv_L"};
      bool ok = false;
      for (const char* r : rules) ok = ok || a.eta_rule == r;
      if (!ok) throw ConfigError("unknown eta_rule: " + a.eta_rule);
      c.algos.push_back(a);
    }
    for (std::size_t i = 0; i < c.algos.size(); ++i)
      for (std::size_t k = i + 1; k < c.algos.size(); ++k)
        if (c.algos[i].label == c.algos[k].label) throw ConfigError("duplicate algo label: " + c.algos[i].label);
    c.T = detail::get_or<long>(j, "T", 1000);
    c.record_every = detail::get_or<long>(j, "record_every", -1);
    c.checks = detail::get_or<std::vector<std::string>>(j, "checks", {});
    for (const auto& ch : c.checks) {
      bool ok = false;
      for (const auto& k : known_checks()) ok = ok || k == ch;
      if (!ok) throw ConfigError("unknown check: " + ch);
    }
    c.output_dir = detail::get_or<std::string>(j, "output_dir", "");
    if (c.T < 1) throw ConfigError("T must be >= 1");
    if (c.algos.empty()) throw ConfigError("at least one algorithm required");
    if (c.dataset.source == "synthetic" && (c.dataset.n < 1 || c.dataset.d < 1))
      throw ConfigError("n and d must be >= 1");
    if (c.topology.n_agents < 1) throw ConfigError("n_agents must be >= 1");
    if (c.dataset.source == "synthetic" && c.topology.n_agents > c.dataset.n)
      throw ConfigError("more agents than samples");
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

/// Fully resolved form; keys sorted, so it doubles as the canonical form.
inline json to_json(const ExperimentConfig& c) {
  json algos = json::array();
  for (const auto& a : c.algos)
    algos.push_back({{"label", a.label}, {"algo", to_string(a.algo)}, {"eta", a.eta}, {"eta_rule", a.eta_rule},
                     {"schedule", a.schedule}, {"gamma", a.gamma}, {"recenter", a.recenter}});
  json j = {{"name", c.name},
            {"dataset",
             {{"source", c.dataset.source},
              {"path", c.dataset.path},
              {"n", c.dataset.n},
              {"d", c.dataset.d},
              {"seed", c.dataset.seed},
              {"holdout_m", c.dataset.holdout_m},
              {"normalize", c.dataset.normalize}}},
            {"topology",
             {{"kind", c.topology.kind},
              {"n_agents", c.topology.n_agents},
              {"p_connect", c.topology.p_connect},
              {"seed", c.topology.seed},
              {"scheme", c.topology.scheme}}},
            {"partition_seed", c.partition_seed ? json(*c.partition_seed) : json(nullptr)},
            {"loss", to_string(c.loss)},
            {"algos", algos},
            {"T", c.T},
            {"record_every", c.record_every},
            {"checks", c.checks},
            {"output_dir", c.output_dir}};
  return j;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  auto c = config_from_json(j);
  // relative dataset paths are relative to the config file
  std::filesystem::path dp(c.dataset.path);
  if (c.dataset.source == "csv" && dp.is_relative())
    c.dataset.path = (std::filesystem::path(path).parent_path() / dp).lexically_normal().string();
  return c;
}

/// FNV-1a over the canonical JSON, output_dir and name excluded.
inline std::string config_hash(const ExperimentConfig& c) {
  json j = to_json(c);
  j.erase("output_dir");
  j.erase("name");
  std::string s = j.dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Desk scale: T, n and d shrink tenfold (d/n is what the figures vary);
/// n and d only while every agent keeps at least five samples.
inline ExperimentConfig apply_scale(ExperimentConfig c, const std::string& scale) {
  if (scale == "paper") return c;
  if (scale != "desk") throw ConfigError("scale must be paper or desk");
  c.T = std::max<long>(1, c.T / 10);
  if (c.dataset.source == "synthetic" && c.dataset.n / 10 >= 5L * c.topology.n_agents) {
    c.dataset.n /= 10;
    c.dataset.d = std::max<long>(1, c.dataset.d / 10);
  }
  return c;
}

struct PreparedProblem {
  Dataset train;
  Dataset holdout;
  Graph graph;
  Problem problem;
  Partition partition;
  Mat holdout_x;
};

inline PreparedProblem prepare(const ExperimentConfig& c) {
  PreparedProblem pp;
  if (c.dataset.source == "csv") {
    pp.train = load_csv_dataset(c.dataset.path);
    try {
      attach_max_margin(pp.train);
    } catch (const NotSeparable&) {
      pp.train.margin_gamma = 0.0;
    }
  } else {
    pp.train = generate_signed_measurements(c.dataset.n, c.dataset.d, c.dataset.seed);
    long m = c.effective_holdout();
    if (m > 0)
      pp.holdout = generate_signed_measurements(m, c.dataset.d, c.dataset.seed + 7919, &pp.train.w_star, false);
  }
  if (c.topology.n_agents > pp.train.n()) throw ConfigError("more agents than samples");
  if (c.dataset.normalize) {
    double r = pp.train.radius_r;
    normalize_radius(pp.train);
    if (pp.holdout.n() > 0 && r > 0.0) {
      pp.holdout.features /= r;
      pp.holdout.radius_r = max_row_norm(pp.holdout.features);
    }
  }
  if (c.topology.kind == "erdos_renyi")
    pp.graph = generate_erdos_renyi(c.topology.n_agents, c.topology.p_connect, c.topology.seed);
  else
    pp.graph = generate_named_graph(c.topology.kind, c.topology.n_agents);
  auto mix = build_mixing_matrix(pp.graph, c.topology.scheme);
  pp.partition = partition_dataset(pp.train, c.topology.n_agents, c.effective_partition_seed());
  auto model = make_loss_model(c.loss, pp.train);
  pp.problem = make_problem(pp.train, pp.partition, mix, model);
  pp.holdout_x = pp.holdout.n() > 0 ? pp.holdout.signed_features() : Mat(0, pp.train.d());
  return pp;
}

/// Resolves a step-size rule to a number for this problem.
inline double resolve_eta(const AlgoSpec& a, const Problem& pr) {
  if (a.eta_rule == "const") return a.eta;
  double f1 = risk(pr.model.kind, pr.x, Vec::Zero(pr.dim()));
  auto rules = compute_step_rules(pr.mixing, pr.model, pr.n_agents(), f1);
  double base = 0.0;
  if (a.eta_rule == "train_bound") base = rules.eta_max_convex;
  else if (a.eta_rule == "pl") base = rules.eta_max_pl;
  else if (a.eta_rule == "consensus") base = rules.eta_max_consensus;
  else if (a.eta_rule == "descent") base = rules.delta_exp / f1;
  else if (a.eta_rule == "sandwich") base = sandwich_guard(pr.mixing.spec, rules.h_eff, pr.n_agents(), f1);
  else if (a.eta_rule == "inv_L") base = std::isfinite(pr.model.smoothness_L) ? 1.0 / pr.model.smoothness_L : 0.0;
  if (!(base > 0.0)) throw ConfigError("eta_rule '" + a.eta_rule + "' unavailable for this loss");
  return a.eta * base;
}

struct RunOptions {
  long T = 1000;
  long record_every = 1;
  bool keep_states = false;
};

/// Runs one algorithm from zero initialisation. Engine failures end the run
/// early and are stored on the trajectory.
inline Trajectory run_algorithm(const Problem& pr, Algo algo, const StepOptions& so, const RunOptions& ro,
                                const Mat* holdout, const Vec& w_mm) {
  Trajectory tr;
  tr.algo = to_string(algo);
  AlgoState s;
  try {
    s = init_state(algo, pr, so);
  } catch (const EngineAbort& e) {
    tr.abort_reason = e.what();
    return tr;
  }
  for (long t = 1; t <= ro.T; ++t) {
    if (ro.keep_states) tr.states.push_back(s.W);
    if (t == 1 || t == ro.T || t % ro.record_every == 0) {
      Record r = measure(pr, s, holdout, w_mm);
      if (!std::isfinite(r.train_loss_mean) || !std::isfinite(r.train_loss_local)) {
        tr.abort_reason = "non-finite train loss at t=" + std::to_string(t);
        return tr;
      }
      tr.records.push_back(r);
    }
    if (t == ro.T) break;
    try {
      step(s, pr);
    } catch (const EngineAbort& e) {
      tr.abort_reason = std::string(e.what()) + " at t=" + std::to_string(t);
      return tr;
    }
  }
  return tr;
}

struct AlgoRun {
  AlgoSpec spec;
  double eta = 0.0;  // resolved
  Trajectory trajectory;
};

struct RunBundle {
  ExperimentConfig config;
  std::string hash;
  std::vector<AlgoRun> runs;
  json reports = json::array();
  json constants;
  double wall_time_s = 0.0;

  bool any_aborted() const {
    for (const auto& r : runs)
      if (r.trajectory.aborted()) return true;
    return false;
  }
  bool all_aborted() const {
    for (const auto& r : runs)
      if (!r.trajectory.aborted()) return false;
    return !runs.empty();
  }
};

inline bool wants(const ExperimentConfig& c, const std::string& check) {
  return std::find(c.checks.begin(), c.checks.end(), check) != c.checks.end();
}

inline RunBundle run_experiment(const ExperimentConfig& c) {
  auto t0 = std::chrono::steady_clock::now();
  RunBundle b;
  b.config = c;
  b.hash = config_hash(c);
  PreparedProblem pp = prepare(c);
  const Problem& pr = pp.problem;
  double f1 = risk(pr.model.kind, pr.x, Vec::Zero(pr.dim()));
  auto rules = compute_step_rules(pr.mixing, pr.model, pr.n_agents(), f1);
  b.constants = {{"loss", to_json(pr.model)},
                 {"dataset", dataset_meta(pp.train)},
                 {"graph", to_json(pp.graph)},
                 {"mixing", {{"lambda", pr.mixing.spec.lambda},
                             {"alpha1", pr.mixing.spec.alpha1},
                             {"alpha2", pr.mixing.spec.alpha2},
                             {"beta1", pr.mixing.spec.beta1},
                             {"beta2", pr.mixing.spec.beta2}}},
                 {"step_rules", {{"eta_max_convex", rules.eta_max_convex},
                                 {"eta_max_pl", rules.eta_max_pl},
                                 {"delta_exp", rules.delta_exp},
                                 {"eta_max_consensus", rules.eta_max_consensus},
                                 {"eta_exp", rules.eta_exp},
                                 {"h_eff", rules.h_eff},
                                 {"notes", rules.notes}}},
                 {"F_init", f1}};
  const bool keep = wants(c, "consensus_recursion");
  RunOptions ro{c.T, keep ? 1 : c.effective_record_every(), keep};
  for (const auto& a : c.algos) {
    AlgoRun run;
    run.spec = a;
    run.eta = resolve_eta(a, pr);
    StepOptions so;
    so.schedule.kind = a.schedule == "inverse_sqrt" ? Schedule::inverse_sqrt : Schedule::constant;
    so.schedule.c = run.eta;
    so.gamma_momentum = a.gamma;
    so.recenter = a.recenter;
    run.trajectory = run_algorithm(pr, a.algo, so, ro, pp.holdout_x.rows() ? &pp.holdout_x : nullptr, pp.train.w_mm);
    run.trajectory.algo = a.label;
    if (a.algo == Algo::dgd && !run.trajectory.aborted()) {
      const auto& tr = run.trajectory;
      auto tag = [&](json rep) {
        rep["algo"] = a.label;
        return rep;
      };
      if (wants(c, "descent")) b.reports.push_back(tag(to_json(check_descent(tr))));
      if (wants(c, "sandwich"))
        b.reports.push_back(tag(to_json(check_sandwich(tr, pr.mixing, rules.h_eff, pr.n_agents()))));
      if (keep) {
        std::vector<double> fbar;
        for (const auto& w : tr.states) fbar.push_back(risk(pr.model.kind, pr.x, w.colwise().mean().transpose()));
        auto rr = check_consensus_recursion(tr.states, fbar, pr.mixing, pr.model, run.eta);
        b.reports.push_back(tag(to_json(rr.proof_form)));
        b.reports.push_back(tag(to_json(rr.statement_form)));
      }
      if (wants(c, "train_bound")) {
        if (pp.train.margin_gamma > 0.0 && pr.model.kind != LossKind::squared && ro.record_every == 1) {
          auto fb = tr.field(&Record::train_loss_mean);
          for (long T = 10; T <= static_cast<long>(fb.size()); T *= 10)
            b.reports.push_back(tag(to_json(check_train_bound_convex(fb, pr.model, pp.train, run.eta, T,
                                                                     rules.eta_max_convex))));
        } else {
          CheckReport r;
          r.check = "train_bound_convex";
          r.preconditions_met = false;
          r.details.push_back("needs a separable exponential-tail run recorded every step");
          b.reports.push_back(tag(to_json(r)));
        }
      }
      if (wants(c, "pl")) {
        auto pl = check_pl_linear_convergence(tr, pr.mixing, pr.model, run.eta, rules.eta_max_pl);
        auto jt = tag(to_json(pl.train));
        jt["zeta"] = pl.zeta;
        jt["log_linear_slope"] = pl.log_linear.exponent;
        jt["log_zeta"] = std::log(pl.zeta);
        jt["r_squared"] = pl.log_linear.r_squared;
        b.reports.push_back(jt);
        b.reports.push_back(tag(to_json(pl.consensus)));
      }
    }
    b.runs.push_back(std::move(run));
  }
  b.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return b;
}

// ---- persistence ----

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline const char* csv_header() {
  return "t,eta,train_loss_mean,train_loss_local,consensus_sq,test_loss,dir_dist,grad_norm,err_train,err_test";
}

inline void write_trajectory_csv(const Trajectory& tr, std::ostream& out) {
  out << csv_header() << '\n';
  for (const auto& r : tr.records) {
    out << r.t << ',' << format_double(r.eta) << ',' << format_double(r.train_loss_mean) << ','
        << format_double(r.train_loss_local) << ',' << format_double(r.consensus_sq) << ','
        << format_double(r.test_loss) << ',' << format_double(r.dir_dist) << ','
        << format_double(r.grad_norm) << ',' << format_double(r.err_train) << ','
        << format_double(r.err_test) << '\n';
  }
}

/// Columns of a trajectory CSV by header name.
inline std::map<std::string, std::vector<double>> read_csv_columns(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open csv: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty csv: " + path);
  auto names = detail::split_csv(line);
  std::map<std::string, std::vector<double>> cols;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = detail::split_csv(line);
    if (cells.size() != names.size()) throw ConfigError("ragged csv: " + path);
    for (std::size_t i = 0; i < cells.size(); ++i) cols[names[i]].push_back(std::strtod(cells[i].c_str(), nullptr));
  }
  return cols;
}

/// Writes <dir>/<label>.csv per algorithm plus <dir>/metadata.json.
/// Wall time stays out of the metadata so reruns are byte-identical.
inline std::vector<std::string> write_bundle(const RunBundle& b, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> files;
  json runs = json::array();
  for (const auto& r : b.runs) {
    auto p = dir / (r.spec.label + ".csv");
    std::ofstream out(p);
    write_trajectory_csv(r.trajectory, out);
    files.push_back(p.string());
    runs.push_back({{"label", r.spec.label},
                    {"algo", to_string(r.spec.algo)},
                    {"eta", r.eta},
                    {"records", r.trajectory.records.size()},
                    {"aborted", r.trajectory.aborted()},
                    {"abort_reason", r.trajectory.abort_reason}});
  }
  json meta = {{"config", to_json(b.config)}, {"config_hash", b.hash}, {"constants", b.constants},
               {"runs", runs}, {"reports", b.reports}};
  auto mp = dir / "metadata.json";
  std::ofstream(mp) << meta.dump(2) << '\n';
  files.push_back(mp.string());
  return files;
}

// ---- sweeps ----

/// Applies `parameter = value` to a copy of the config. Parameters:
/// T, seed, n_agents, p_connect, eta (all algos), eta:<label>, gamma:<label>.
inline ExperimentConfig with_parameter(ExperimentConfig c, const std::string& parameter, double value) {
  auto label_of = [&](const std::string& prefix) -> AlgoSpec& {
    std::string lab = parameter.substr(prefix.size());
    for (auto& a : c.algos)
      if (a.label == lab) return a;
    throw ConfigError("no algorithm labelled " + lab);
  };
  if (parameter == "T") c.T = static_cast<long>(value);
  else if (parameter == "seed") {
    c.dataset.seed = static_cast<std::uint64_t>(value);
    c.topology.seed = static_cast<std::uint64_t>(value);
  } else if (parameter == "n_agents") c.topology.n_agents = static_cast<int>(value);
  else if (parameter == "p_connect") c.topology.p_connect = value;
  else if (parameter == "eta") {
    for (auto& a : c.algos) a.eta = value;
  } else if (parameter.rfind("eta:", 0) == 0) label_of("eta:").eta = value;
  else if (parameter.rfind("gamma:", 0) == 0) label_of("gamma:").gamma = value;
  else throw ConfigError("unknown sweep parameter: " + parameter);
  return config_from_json(to_json(c));  // revalidate
}

struct SweepEntry {
  double value = 0.0;
  std::optional<RunBundle> bundle;
  std::string error;
};

inline std::vector<SweepEntry> sweep(const ExperimentConfig& c, const std::string& parameter,
                                     const std::vector<double>& values) {
  std::vector<SweepEntry> out;
  for (double v : values) {
    SweepEntry e;
    e.value = v;
    try {
      e.bundle = run_experiment(with_parameter(c, parameter, v));
    } catch (const Error& err) {
      e.error = err.what();
    }
    out.push_back(std::move(e));
  }
  return out;
}

/// value,label,final_t,train_loss_mean,dir_dist,aborted
inline void write_sweep_summary(const std::vector<SweepEntry>& entries, std::ostream& out) {
  out << "value,label,final_t,train_loss_mean,dir_dist,status\n";
  for (const auto& e : entries) {
    if (!e.bundle) {
      out << format_double(e.value) << ",,,,,error\n";
      continue;
    }
    for (const auto& r : e.bundle->runs) {
      const auto& recs = r.trajectory.records;
      out << format_double(e.value) << ',' << r.spec.label << ',';
      if (recs.empty()) {
        out << ",,,";
      } else {
        out << recs.back().t << ',' << format_double(recs.back().train_loss_mean) << ','
            << format_double(recs.back().dir_dist) << ',';
      }
      out << (r.trajectory.aborted() ? "aborted" : "ok") << '\n';
    }
  }
}

}  // namespace csl

#endif  // CSL_HARNESS_HPP
