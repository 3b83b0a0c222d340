#include "csl/figures.hpp"
#include "csl/harness.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace csl;
namespace fs = std::filesystem;

namespace {

json small_json() {
  return json::parse(R"({
    "name": "small",
    "dataset": {"n": 40, "d": 5, "seed": 3, "holdout_m": 100},
    "topology": {"n_agents": 4, "p_connect": 0.5, "seed": 3},
    "loss": "logistic",
    "algos": [
      {"label": "dgd", "algo": "dgd", "eta": 0.1},
      {"label": "fdlr", "algo": "fdlr", "eta": 0.2, "recenter": true}
    ],
    "T": 50
  })");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("csl_harness_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Config, ParsesAndDefaults) {
  auto c = config_from_json(small_json());
  EXPECT_EQ(c.dataset.n, 40);
  EXPECT_EQ(c.algos.size(), 2u);
  EXPECT_TRUE(c.algos[1].recenter);
  EXPECT_EQ(c.effective_record_every(), 1);
  c.T = 5000;
  EXPECT_EQ(c.effective_record_every(), 10);
  c.dataset.holdout_m = -1;
  EXPECT_EQ(c.effective_holdout(), 400);
  c.dataset.n = 50000;
  EXPECT_EQ(c.effective_holdout(), 100000);
}

TEST(Config, Rejections) {
  auto bad = [](auto edit) {
    json j = small_json();
    edit(j);
    EXPECT_THROW(config_from_json(j), ConfigError) << j.dump();
  };
  bad([](json& j) { j["bogus"] = 1; });
  bad([](json& j) { j["dataset"]["colour"] = "red"; });
  bad([](json& j) { j["T"] = 0; });
  bad([](json& j) { j["algos"][0]["eta"] = -0.1; });
  bad([](json& j) { j["algos"][0]["eta"] = 0.0; });
  bad([](json& j) { j["algos"][0]["algo"] = "adam"; });
  bad([](json& j) { j["algos"][1]["label"] = "dgd"; });
  bad([](json& j) { j["algos"] = json::array(); });
  bad([](json& j) { j["topology"]["n_agents"] = 41; });
  bad([](json& j) { j["loss"] = "hinge"; });
  bad([](json& j) { j["checks"] = {"everything"}; });
  bad([](json& j) { j["algos"][0]["schedule"] = "cosine"; });
  bad([](json& j) { j["algos"][0]["eta_rule"] = "magic"; });
  bad([](json& j) { j["T"] = "many"; });
}

TEST(Config, HashStableUnderReordering) {
  json a = small_json();
  std::string text = R"({"T": 50, "loss": "logistic",
    "algos": [{"eta": 0.1, "algo": "dgd", "label": "dgd"},
              {"recenter": true, "eta": 0.2, "label": "fdlr", "algo": "fdlr"}],
    "topology": {"seed": 3, "p_connect": 0.5, "n_agents": 4},
    "dataset": {"holdout_m": 100, "seed": 3, "d": 5, "n": 40}, "name": "small"})";
  EXPECT_EQ(config_hash(config_from_json(a)), config_hash(config_from_json(json::parse(text))));
}

TEST(Config, HashTracksSemanticFields) {
  auto base = config_from_json(small_json());
  auto h = config_hash(base);
  auto c = base;
  c.output_dir = "/elsewhere";
  c.name = "renamed";
  EXPECT_EQ(config_hash(c), h);
  // defaults spelled out give the same hash
  json j = small_json();
  j["algos"][0]["gamma"] = 0.0;
  j["topology"]["scheme"] = "metropolis";
  EXPECT_EQ(config_hash(config_from_json(j)), h);
  std::vector<std::function<void(ExperimentConfig&)>> edits{
      [](ExperimentConfig& x) { x.T = 51; },
      [](ExperimentConfig& x) { x.dataset.seed = 4; },
      [](ExperimentConfig& x) { x.topology.p_connect = 0.6; },
      [](ExperimentConfig& x) { x.algos[0].eta = 0.11; },
      [](ExperimentConfig& x) { x.algos[1].recenter = false; },
      [](ExperimentConfig& x) { x.loss = LossKind::exponential; },
      [](ExperimentConfig& x) { x.record_every = 5; },
  };
  for (auto& e : edits) {
    auto x = base;
    e(x);
    EXPECT_NE(config_hash(x), h);
  }
}

TEST(Config, JsonRoundTrip) {
  auto c = config_from_json(small_json());
  auto back = config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
}

TEST(Config, LoadFromFile) {
  auto dir = scratch("load");
  fs::create_directories(dir / "cfg");
  {
    std::ofstream(dir / "data.csv") << "1,0,1\n-1,0,-1\n0.5,1,1\n-0.5,-1,-1\n";
    json j = small_json();
    j["dataset"] = {{"source", "csv"}, {"path", "../data.csv"}, {"holdout_m", 0}};
    j["topology"]["n_agents"] = 2;
    std::ofstream(dir / "cfg" / "c.json") << j.dump();
  }
  auto c = load_config((dir / "cfg" / "c.json").string());
  EXPECT_EQ(fs::path(c.dataset.path), (dir / "data.csv").lexically_normal());
  auto b = run_experiment(c);
  EXPECT_EQ(b.runs.size(), 2u);
  EXPECT_THROW(load_config((dir / "nope.json").string()), ConfigError);
  std::ofstream(dir / "broken.json") << "{ not json";
  EXPECT_THROW(load_config((dir / "broken.json").string()), ConfigError);
}

TEST(Config, MissingDatasetFailsBeforeRunning) {
  json j = small_json();
  j["dataset"] = {{"source", "csv"}, {"path", "/nonexistent/data.csv"}};
  auto c = config_from_json(j);
  EXPECT_THROW(run_experiment(c), ConfigError);
  j["dataset"] = {{"source", "csv"}};
  EXPECT_THROW(config_from_json(j), ConfigError);
}

TEST(Run, RecordsEndpointsAndCadence) {
  json j = small_json();
  j["T"] = 47;
  j["record_every"] = 10;
  auto b = run_experiment(config_from_json(j));
  ASSERT_EQ(b.runs.size(), 2u);
  std::vector<long> ts;
  for (const auto& r : b.runs[0].trajectory.records) ts.push_back(r.t);
  EXPECT_EQ(ts, (std::vector<long>{1, 10, 20, 30, 40, 47}));
  EXPECT_EQ(b.runs[1].trajectory.records.size(), 6u);
  EXPECT_FALSE(b.any_aborted());
}

TEST(Run, SingleAgentMatchesCentralized) {
  json j = small_json();
  j["topology"]["n_agents"] = 1;
  j["algos"] = json::parse(R"([{"label": "d", "algo": "dgd", "eta": 0.3},
                              {"label": "c", "algo": "central_gd", "eta": 0.3},
                              {"label": "n", "algo": "normalized_dgd", "eta": 0.3},
                              {"label": "cn", "algo": "central_ngd", "eta": 0.3}])");
  auto b = run_experiment(config_from_json(j));
  for (std::size_t pair : {0u, 2u}) {
    const auto& a = b.runs[pair].trajectory.records;
    const auto& c = b.runs[pair + 1].trajectory.records;
    ASSERT_EQ(a.size(), c.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_NEAR(a[i].train_loss_mean, c[i].train_loss_mean, 1e-13 * std::max(1.0, c[i].train_loss_mean));
      EXPECT_NEAR(a[i].dir_dist, c[i].dir_dist, 1e-12);
      EXPECT_EQ(a[i].consensus_sq, 0.0);
    }
  }
}

TEST(Run, AbortDoesNotTouchSiblings) {
  json j = small_json();
  j["loss"] = "exponential";
  j["algos"] = json::parse(R"([{"label": "ok", "algo": "dgd", "eta": 0.1},
                              {"label": "boom", "algo": "dgd", "eta": 1e6},
                              {"label": "ok2", "algo": "fdlr", "eta": 0.2}])");
  auto mixed = run_experiment(config_from_json(j));
  EXPECT_TRUE(mixed.any_aborted());
  EXPECT_FALSE(mixed.all_aborted());
  EXPECT_FALSE(mixed.runs[1].trajectory.abort_reason.empty());
  j["algos"].erase(1);
  auto clean = run_experiment(config_from_json(j));
  for (auto [m, c] : {std::pair{0, 0}, std::pair{2, 1}}) {
    std::ostringstream a, b;
    write_trajectory_csv(mixed.runs[m].trajectory, a);
    write_trajectory_csv(clean.runs[c].trajectory, b);
    EXPECT_EQ(a.str(), b.str());
  }
}

TEST(Run, ChecksAttachReports) {
  json j = small_json();
  j["algos"] = json::parse(R"([{"label": "dgd", "algo": "dgd", "eta_rule": "consensus", "eta": 1.0}])");
  j["checks"] = {"descent", "consensus_recursion", "train_bound"};
  j["T"] = 100;
  auto b = run_experiment(config_from_json(j));
  ASSERT_GE(b.reports.size(), 4u);
  for (const auto& r : b.reports) {
    EXPECT_EQ(r["algo"], "dgd");
    if (r["check"] != "descent") {
      EXPECT_EQ(r["violations"], 0) << r.dump();
    }
  }
  EXPECT_NEAR(b.runs[0].eta, b.constants["step_rules"]["eta_max_consensus"].get<double>(), 1e-15);
}

TEST(Run, EtaRuleUnavailableForLoss) {
  json j = small_json();
  j["loss"] = "exponential";
  j["algos"] = json::parse(R"([{"label": "x", "algo": "dgd", "eta_rule": "train_bound", "eta": 0.5}])");
  EXPECT_THROW(run_experiment(config_from_json(j)), ConfigError);
}

TEST(Persist, CsvBytesDeterministic) {
  auto c = config_from_json(small_json());
  auto d1 = scratch("det1"), d2 = scratch("det2");
  write_bundle(run_experiment(c), d1);
  write_bundle(run_experiment(c), d2);
  for (const char* f : {"dgd.csv", "fdlr.csv", "metadata.json"}) EXPECT_EQ(slurp(d1 / f), slurp(d2 / f)) << f;
  auto text = slurp(d1 / "dgd.csv");
  EXPECT_EQ(text.substr(0, text.find('\n')), csv_header());
  auto cols = read_csv_columns((d1 / "dgd.csv").string());
  EXPECT_EQ(cols.size(), 10u);
  EXPECT_EQ(cols["t"].size(), 50u);
  auto meta = json::parse(slurp(d1 / "metadata.json"));
  EXPECT_EQ(meta["config_hash"], config_hash(c));
  EXPECT_FALSE(meta.contains("wall_time_s"));
}

TEST(Persist, CsvHeaderExact) {
  EXPECT_STREQ(csv_header(),
               "t,eta,train_loss_mean,train_loss_local,consensus_sq,test_loss,dir_dist,grad_norm,err_train,err_test");
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(format_double(std::nan("")), "nan");
}

TEST(Sweep, EtaValues) {
  auto c = config_from_json(small_json());
  auto s = sweep(c, "eta:dgd", {0.5, 1.0, 2.0, 5.0});
  ASSERT_EQ(s.size(), 4u);
  for (std::size_t i = 0; i < s.size(); ++i) {
    ASSERT_TRUE(s[i].bundle);
    EXPECT_EQ(s[i].bundle->runs[0].eta, s[i].value);
    EXPECT_EQ(s[i].bundle->runs[1].eta, 0.2);
  }
  // seeds held fixed: fdlr identical across the sweep
  EXPECT_EQ(s[0].bundle->runs[1].trajectory.records.back().train_loss_mean,
            s[3].bundle->runs[1].trajectory.records.back().train_loss_mean);
  std::ostringstream out;
  write_sweep_summary(s, out);
  auto text = out.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 9);
}

TEST(Sweep, EmptyAndT) {
  auto c = config_from_json(small_json());
  EXPECT_TRUE(sweep(c, "eta", {}).empty());
  auto s = sweep(c, "T", {1, 5, 20});
  for (const auto& e : s) EXPECT_EQ(e.bundle->runs[0].trajectory.records.back().t, static_cast<long>(e.value));
  EXPECT_EQ(s[0].bundle->runs[0].trajectory.records.size(), 1u);
}

TEST(Sweep, FailuresIsolated) {
  auto c = config_from_json(small_json());
  auto s = sweep(c, "eta", {0.1, -1.0, 0.2});
  EXPECT_TRUE(s[0].bundle);
  EXPECT_FALSE(s[1].bundle);
  EXPECT_FALSE(s[1].error.empty());
  EXPECT_TRUE(s[2].bundle);
  EXPECT_THROW(with_parameter(c, "nonsense", 1.0), ConfigError);
  EXPECT_THROW(with_parameter(c, "eta:missing", 1.0), ConfigError);
}

TEST(Scale, DeskDivides) {
  auto c = config_from_json(small_json());
  c.T = 1000;
  c.dataset.n = 1000;
  c.dataset.d = 50;
  c.topology.n_agents = 10;
  auto d = apply_scale(c, "desk");
  EXPECT_EQ(d.T, 100);
  EXPECT_EQ(d.dataset.n, 100);
  EXPECT_EQ(d.dataset.d, 5);
  // too few samples per agent: only T shrinks
  c.topology.n_agents = 50;
  auto e = apply_scale(c, "desk");
  EXPECT_EQ(e.dataset.n, 1000);
  EXPECT_EQ(e.T, 100);
  EXPECT_EQ(to_json(apply_scale(c, "paper")), to_json(c));
  EXPECT_THROW(apply_scale(c, "huge"), ConfigError);
}

TEST(Figures, CannedConfigsValid) {
  for (const auto& f : figure_names()) {
    auto cs = figure_configs(f);
    ASSERT_FALSE(cs.empty()) << f;
    for (const auto& c : cs) {
      EXPECT_NO_THROW(config_from_json(to_json(c))) << f;
      EXPECT_NO_THROW(config_from_json(to_json(apply_scale(c, "desk")))) << f;
    }
  }
  auto f2 = figure_configs("fig2").front();
  EXPECT_EQ(f2.algos[2].eta, 0.4);
  EXPECT_EQ(f2.algos[3].gamma, 0.5);
}

TEST(Figures, ReproduceFig4Desk) {
  auto dir = scratch("fig4");
  auto r = reproduce("fig4", "desk", dir);
  ASSERT_EQ(r.bundles.size(), 1u);
  EXPECT_TRUE(fs::exists(dir / "fig4" / "fig4_test_loss.svg"));
  const auto& tr = r.bundles[0].runs[0].trajectory;
  auto [tmin, v] = detect_test_loss_minimum(tr);
  EXPECT_LT(tmin, r.bundles[0].config.T / 2.0);
}
