#ifndef CSL_DATA_HPP
#define CSL_DATA_HPP

#include "csl/types.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace csl {

struct Dataset {
  Mat features;  // n x d, rows a_i
  Vec labels;    // +-1
  double radius_r = 0.0;
  double margin_gamma = 0.0;  // 0 = unknown or not separable
  Vec w_mm;                   // max-margin solution when margin_gamma > 0
  Vec w_star;                 // generating direction, synthetic data only
  std::optional<std::uint64_t> generator_seed;

  Eigen::Index n() const { return features.rows(); }
  Eigen::Index d() const { return features.cols(); }

  /// Signed samples x_i = y_i a_i as rows.
  Mat signed_features() const { return labels.asDiagonal() * features; }
};

inline double max_row_norm(const Mat& x) {
  return x.rows() == 0 ? 0.0 : x.rowwise().norm().maxCoeff();
}

struct MaxMarginSolution {
  Vec w_mm;
  double margin = 0.0;  // 1 / ||w_mm||
  std::vector<Eigen::Index> active_set;
  bool one_class = false;
  int sweeps = 0;
};

namespace detail {

inline bool try_polish(const Mat& x, const Vec& alpha, Vec& w) {
  std::vector<Eigen::Index> s;
  for (Eigen::Index i = 0; i < alpha.size(); ++i)
    if (alpha(i) > 0.0) s.push_back(i);
  if (s.empty()) return false;
  const auto k = static_cast<Eigen::Index>(s.size());
  Mat xs(k, x.cols());
  for (Eigen::Index r = 0; r < k; ++r) xs.row(r) = x.row(s[static_cast<std::size_t>(r)]);
  Mat gram = xs * xs.transpose();
  Vec a = gram.completeOrthogonalDecomposition().solve(Vec::Ones(k));
  if (a.minCoeff() < -1e-12) return false;
  Vec cand = xs.transpose() * a;
  Vec m = x * cand;
  if (m.minCoeff() < 1.0 - 1e-9) return false;
  if (((xs * cand).array() - 1.0).abs().maxCoeff() > 1e-8) return false;
  w = cand;
  return true;
}

}  // namespace detail

/// Hard-margin SVM: argmin ||w|| s.t. x_i^T w >= 1, on signed samples x = y a.
/// Dual coordinate ascent with periodic active-set polishing.
inline MaxMarginSolution solve_max_margin_signed(const Mat& x, int max_sweeps = 200000) {
  const auto n = x.rows();
  if (n == 0) throw ConfigError("empty dataset");
  Vec sq = x.rowwise().squaredNorm();
  for (Eigen::Index i = 0; i < n; ++i)
    if (sq(i) == 0.0) throw NotSeparable();
  Vec alpha = Vec::Zero(n);
  Vec w = Vec::Zero(x.cols());
  MaxMarginSolution sol;
  bool done = false;
  int sweep = 0;
  for (; sweep < max_sweeps && !done; ++sweep) {
    double kkt = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double gi = 1.0 - x.row(i).dot(w);
      double na = std::max(0.0, alpha(i) + gi / sq(i));
      double step = na - alpha(i);
      if (step != 0.0) {
        w.noalias() += step * x.row(i).transpose();
        alpha(i) = na;
      }
      double viol = alpha(i) > 0.0 ? std::abs(gi) : std::max(0.0, gi);
      kkt = std::max(kkt, viol);
    }
    if (alpha.sum() > 1e12 || !w.allFinite()) throw NotSeparable();
    if (kkt < 1e-12) done = true;
    if (!done && (sweep % 50 == 49)) {
      Vec polished;
      if (detail::try_polish(x, alpha, polished)) {
        w = polished;
        done = true;
      }
    }
  }
  Vec m = x * w;
  double mmin = m.minCoeff();
  if (!(mmin > 0.0)) throw NotSeparable();
  w /= mmin;  // min constraint exactly 1
  sol.w_mm = w;
  sol.margin = 1.0 / w.norm();
  sol.sweeps = sweep;
  m = x * w;
  for (Eigen::Index i = 0; i < n; ++i)
    if (m(i) <= 1.0 + 1e-6) sol.active_set.push_back(i);
  return sol;
}

inline MaxMarginSolution solve_max_margin(const Dataset& ds) {
  auto sol = solve_max_margin_signed(ds.signed_features());
  sol.one_class = ds.labels.size() > 0 && (ds.labels.array() == ds.labels(0)).all();
  return sol;
}

/// Fills margin_gamma and w_mm.
inline void attach_max_margin(Dataset& ds) {
  auto sol = solve_max_margin(ds);
  ds.w_mm = sol.w_mm;
  ds.margin_gamma = sol.margin;
}

/// Gaussian features, labels sign(a^T w*). w* comes from its own stream so a
/// holdout drawn with another seed can reuse it.
inline Dataset generate_signed_measurements(Eigen::Index n, Eigen::Index d, std::uint64_t seed,
                                            const Vec* w_star = nullptr, bool solve_margin = true) {
  if (n < 1 || d < 1) throw ConfigError("n and d must be >= 1");
  Dataset ds;
  if (w_star) {
    if (w_star->size() != d) throw ConfigError("w_star dimension mismatch");
    ds.w_star = *w_star;
  } else {
    auto wr = make_rng(seed, 0x57ull);
    Gaussian g(wr);
    ds.w_star = Vec(d);
    for (Eigen::Index k = 0; k < d; ++k) ds.w_star(k) = g();
    ds.w_star.normalize();
  }
  auto rng = make_rng(seed, 0x41ull);
  Gaussian g(rng);
  ds.features = Mat(n, d);
  ds.labels = Vec(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double dot = 0.0;
    do {
      for (Eigen::Index k = 0; k < d; ++k) ds.features(i, k) = g();
      dot = ds.features.row(i).dot(ds.w_star);
    } while (dot == 0.0);
    ds.labels(i) = dot > 0.0 ? 1.0 : -1.0;
  }
  ds.radius_r = max_row_norm(ds.features);
  ds.generator_seed = seed;
  if (solve_margin) attach_max_margin(ds);
  return ds;
}

/// Rescales features so that max_i ||a_i|| = 1. Margin and w_mm follow.
inline void normalize_radius(Dataset& ds) {
  double r = ds.radius_r;
  if (r <= 0.0) return;
  ds.features /= r;
  ds.radius_r = max_row_norm(ds.features);
  if (ds.margin_gamma > 0.0) {
    ds.margin_gamma /= r;
    ds.w_mm *= r;
  }
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline bool parse_number(const std::string& s, double& v) {
  if (s.empty()) return false;
  std::size_t pos = 0;
  try {
    v = std::stod(s, &pos);
  } catch (...) {
    return false;
  }
  return pos == s.size() && std::isfinite(v);
}

}  // namespace detail

/// Parses numeric CSV rows; label in the last column, {-1,+1} or {0,1}.
/// A first line that fails to parse is treated as a header.
inline Dataset load_csv_dataset_from_stream(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv(line);
    std::vector<double> vals;
    bool ok = true;
    for (auto& c : cells) {
      double v;
      if (!detail::parse_number(detail::trim(c), v)) {
        ok = false;
        break;
      }
      vals.push_back(v);
    }
    if (!ok) {
      if (rows.empty() && lineno == 1) continue;  // header
      throw ConfigError("csv parse error at row " + std::to_string(lineno) + ": non-numeric cell");
    }
    if (vals.size() < 2)
      throw ConfigError("csv parse error at row " + std::to_string(lineno) + ": need features and label");
    if (width == 0) width = vals.size();
    if (vals.size() != width)
      throw ConfigError("csv parse error at row " + std::to_string(lineno) + ": inconsistent column count");
    double y = vals.back();
    if (y == 0.0) y = -1.0;
    if (y != 1.0 && y != -1.0)
      throw ConfigError("csv parse error at row " + std::to_string(lineno) + ": label must be +-1 or 0/1");
    vals.back() = y;
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw ConfigError("csv parse error: no samples");
  Dataset ds;
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(width - 1);
  ds.features = Mat(n, d);
  ds.labels = Vec(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    for (Eigen::Index k = 0; k < d; ++k) ds.features(i, k) = r[static_cast<std::size_t>(k)];
    ds.labels(i) = r.back();
  }
  ds.radius_r = max_row_norm(ds.features);
  return ds;
}

inline Dataset load_csv_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset file: " + path);
  return load_csv_dataset_from_stream(in);
}

inline void write_csv_dataset(const Dataset& ds, std::ostream& out) {
  out.precision(17);
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    for (Eigen::Index k = 0; k < ds.d(); ++k) out << ds.features(i, k) << ',';
    out << (ds.labels(i) > 0 ? "1" : "-1") << '\n';
  }
}

inline nlohmann::json dataset_meta(const Dataset& ds) {
  auto vec = [](const Vec& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  nlohmann::json j = {{"n", ds.n()}, {"d", ds.d()}, {"radius_r", ds.radius_r},
                      {"margin_gamma", ds.margin_gamma}};
  if (ds.generator_seed) j["seed"] = *ds.generator_seed;
  if (ds.w_star.size()) j["w_star"] = vec(ds.w_star);
  if (ds.w_mm.size()) j["w_mm"] = vec(ds.w_mm);
  return j;
}

struct Partition {
  std::vector<std::vector<Eigen::Index>> shards;
  int n_agents() const { return static_cast<int>(shards.size()); }
};

/// Seeded shuffle, then contiguous split with sizes differing by at most one.
inline Partition partition_dataset(Eigen::Index n, int n_agents, std::uint64_t seed) {
  if (n_agents < 1) throw ConfigError("n_agents must be >= 1");
  if (n_agents > n) throw ConfigError("more agents than samples");
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  auto rng = make_rng(seed, 0x5041ull);
  shuffle(idx.begin(), idx.end(), rng);
  Partition p;
  p.shards.resize(static_cast<std::size_t>(n_agents));
  Eigen::Index base = n / n_agents, extra = n % n_agents, pos = 0;
  for (int l = 0; l < n_agents; ++l) {
    Eigen::Index sz = base + (l < extra ? 1 : 0);
    auto& s = p.shards[static_cast<std::size_t>(l)];
    s.assign(idx.begin() + pos, idx.begin() + pos + sz);
    pos += sz;
  }
  return p;
}

inline Partition partition_dataset(const Dataset& ds, int n_agents, std::uint64_t seed) {
  return partition_dataset(ds.n(), n_agents, seed);
}

inline double empirical_margin(const Dataset& ds, const Vec& w) {
  double nw = w.norm();
  if (nw == 0.0) throw ConfigError("empirical_margin: zero vector");
  return (ds.signed_features() * w).minCoeff() / nw;
}

}  // namespace csl

#endif  // CSL_DATA_HPP
