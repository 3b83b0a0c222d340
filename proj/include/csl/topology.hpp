#ifndef CSL_TOPOLOGY_HPP
#define CSL_TOPOLOGY_HPP

#include "csl/types.hpp"

#include <json.hpp>

#include <algorithm>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace csl {

/// Undirected graph on agents [0, n). Self-loops are implicit.
struct Graph {
  int n = 0;
  std::vector<std::pair<int, int>> edges;  // i < j, sorted, unique

  std::vector<int> degrees() const {
    std::vector<int> deg(static_cast<std::size_t>(n), 0);
    for (auto [i, j] : edges) {
      ++deg[static_cast<std::size_t>(i)];
      ++deg[static_cast<std::size_t>(j)];
    }
    return deg;
  }

  /// Component label per node, labels ordered by smallest member.
  std::vector<int> components() const {
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
    for (auto [i, j] : edges) {
      adj[static_cast<std::size_t>(i)].push_back(j);
      adj[static_cast<std::size_t>(j)].push_back(i);
    }
    std::vector<int> label(static_cast<std::size_t>(n), -1);
    int next = 0;
    for (int s = 0; s < n; ++s) {
      if (label[static_cast<std::size_t>(s)] >= 0) continue;
      std::vector<int> queue{s};
      label[static_cast<std::size_t>(s)] = next;
      for (std::size_t q = 0; q < queue.size(); ++q) {
        for (int v : adj[static_cast<std::size_t>(queue[q])]) {
          if (label[static_cast<std::size_t>(v)] < 0) {
            label[static_cast<std::size_t>(v)] = next;
            queue.push_back(v);
          }
        }
      }
      ++next;
    }
    return label;
  }

  bool connected() const {
    if (n <= 1) return n == 1;
    auto lab = components();
    return std::all_of(lab.begin(), lab.end(), [](int l) { return l == 0; });
  }
};

inline Graph make_graph(int n, std::vector<std::pair<int, int>> edges) {
  if (n < 1) throw ConfigError("graph needs at least one agent");
  for (auto& [i, j] : edges) {
    if (i < 0 || j < 0 || i >= n || j >= n) throw ConfigError("edge index out of range");
    if (i == j) throw ConfigError("explicit self-loop edge");
    if (i > j) std::swap(i, j);
  }
  std::sort(edges.begin(), edges.end());
  if (std::adjacent_find(edges.begin(), edges.end()) != edges.end())
    throw ConfigError("duplicate edge");
  return Graph{n, std::move(edges)};
}

/// G(N, p) with bounded resampling, then deterministic bridging of leftovers.
inline Graph generate_erdos_renyi(int n_agents, double p_connect, std::uint64_t seed,
                                  int max_retries = 16) {
  if (n_agents < 1) throw ConfigError("n_agents must be >= 1");
  if (!(p_connect > 0.0 && p_connect <= 1.0)) throw ConfigError("p_connect must be in (0,1]");
  Graph g;
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    auto rng = make_rng(seed, 0x4552000ull + static_cast<std::uint64_t>(attempt));
    g = Graph{n_agents, {}};
    for (int i = 0; i < n_agents; ++i)
      for (int j = i + 1; j < n_agents; ++j)
        if (uniform01(rng) < p_connect) g.edges.emplace_back(i, j);
    if (g.connected()) return g;
  }
  // Join component k to component k-1 through their smallest members.
  auto lab = g.components();
  std::vector<int> rep;
  for (int v = 0; v < n_agents; ++v)
    if (lab[static_cast<std::size_t>(v)] == static_cast<int>(rep.size())) rep.push_back(v);
  for (std::size_t k = 1; k < rep.size(); ++k) g.edges.emplace_back(rep[k - 1], rep[k]);
  std::sort(g.edges.begin(), g.edges.end());
  return g;
}

inline Graph generate_named_graph(const std::string& kind, int n_agents) {
  if (n_agents < 1) throw ConfigError("n_agents must be >= 1");
  std::vector<std::pair<int, int>> e;
  if (kind == "ring") {
    if (n_agents < 3) throw ConfigError("ring needs at least 3 agents");
    for (int i = 0; i < n_agents; ++i) e.emplace_back(i, (i + 1) % n_agents);
  } else if (kind == "path") {
    for (int i = 0; i + 1 < n_agents; ++i) e.emplace_back(i, i + 1);
  } else if (kind == "complete") {
    for (int i = 0; i < n_agents; ++i)
      for (int j = i + 1; j < n_agents; ++j) e.emplace_back(i, j);
  } else if (kind == "star") {
    for (int i = 1; i < n_agents; ++i) e.emplace_back(0, i);
  } else {
    throw ConfigError("unknown graph kind: " + kind);
  }
  return make_graph(n_agents, std::move(e));
}

struct SpectralConstants {
  double lambda = 0.0;  // max(|l2|, |lN|)^2
  double alpha1 = 0.75;
  double alpha2 = 4.0;
  double beta1 = 0.75;
  double beta2 = 2.0;
  double lambda2 = 0.0;  // second largest eigenvalue, signed
  double lambdaN = 0.0;  // smallest eigenvalue, signed
};

struct MixingMatrix {
  Mat weights;
  SpectralConstants spec;

  int n() const { return static_cast<int>(weights.rows()); }
  double lambda() const { return spec.lambda; }
};

inline SpectralConstants constants_from_lambda(double lambda) {
  SpectralConstants s;
  s.lambda = lambda;
  s.alpha1 = (3.0 + lambda) / 4.0;
  s.alpha2 = 4.0 * (2.0 / (1.0 - lambda) - 1.0);
  s.beta1 = (3.0 + lambda) / 4.0;
  s.beta2 = 4.0 / (1.0 - lambda) - 2.0;
  return s;
}

inline SpectralConstants spectral_constants(const Mat& a) {
  const auto n = a.rows();
  if (n == 1) return constants_from_lambda(0.0);
  Eigen::SelfAdjointEigenSolver<Mat> es(a, Eigen::EigenvaluesOnly);
  const Vec& ev = es.eigenvalues();  // ascending
  double top = ev(n - 1);
  double l2 = ev(n - 2);
  double ln = ev(0);
  constexpr double tol = 1e-10;
  if (l2 >= 1.0 - tol || std::abs(ln) >= 1.0 - tol || top > 1.0 + tol) throw DegenerateSpectrum();
  double m = std::max(std::abs(l2), std::abs(ln));
  auto s = constants_from_lambda(m * m);
  s.lambda2 = l2;
  s.lambdaN = ln;
  return s;
}

inline MixingMatrix build_mixing_matrix(const Graph& g, const std::string& scheme = "metropolis") {
  if (!g.connected()) throw ConfigError("mixing matrix needs a connected graph");
  const int n = g.n;
  auto deg = g.degrees();
  Mat a = Mat::Zero(n, n);
  if (scheme == "metropolis" || scheme == "lazy_metropolis") {
    for (auto [i, j] : g.edges) {
      double w = 1.0 / (1.0 + std::max(deg[static_cast<std::size_t>(i)],
                                       deg[static_cast<std::size_t>(j)]));
      a(i, j) = w;
      a(j, i) = w;
    }
  } else if (scheme == "max_degree") {
    int dmax = n > 0 ? *std::max_element(deg.begin(), deg.end()) : 0;
    double w = 1.0 / (1.0 + dmax);
    for (auto [i, j] : g.edges) {
      a(i, j) = w;
      a(j, i) = w;
    }
  } else {
    throw ConfigError("unknown mixing scheme: " + scheme);
  }
  // Diagonal takes the remainder. Summing off-diagonals in index order keeps
  // the row sum exact up to one rounding.
  for (int i = 0; i < n; ++i) {
    double off = 0.0;
    for (int j = 0; j < n; ++j)
      if (j != i) off += a(i, j);
    a(i, i) = 1.0 - off;
  }
  if (scheme == "lazy_metropolis") {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = 0.5 * a(i, j) + (i == j ? 0.5 : 0.0);
  }
  return MixingMatrix{a, spectral_constants(a)};
}

/// Wraps an explicit weight matrix, validating it.
inline MixingMatrix mixing_from_weights(const Mat& a) {
  if (a.rows() != a.cols() || a.rows() < 1) throw ConfigError("mixing matrix must be square");
  if ((a - a.transpose()).cwiseAbs().maxCoeff() != 0.0) throw ConfigError("mixing matrix not symmetric");
  if ((a.rowwise().sum().array() - 1.0).abs().maxCoeff() > 1e-12)
    throw ConfigError("mixing matrix not stochastic");
  if (a.minCoeff() < 0.0) throw ConfigError("negative mixing weight");
  return MixingMatrix{a, spectral_constants(a)};
}

inline nlohmann::json to_json(const Graph& g) {
  nlohmann::json e = nlohmann::json::array();
  for (auto [i, j] : g.edges) e.push_back({i, j});
  return {{"n", g.n}, {"edges", e}};
}

inline Graph graph_from_json(const nlohmann::json& j) {
  std::vector<std::pair<int, int>> e;
  for (const auto& p : j.at("edges")) e.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
  return make_graph(j.at("n").get<int>(), std::move(e));
}

inline nlohmann::json to_json(const MixingMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.n(); ++i) {
    nlohmann::json r = nlohmann::json::array();
    for (int j = 0; j < m.n(); ++j) r.push_back(m.weights(i, j));
    rows.push_back(r);
  }
  return {{"weights", rows}, {"lambda", m.spec.lambda}};
}

inline MixingMatrix mixing_from_json(const nlohmann::json& j) {
  const auto& rows = j.at("weights");
  const auto n = static_cast<Eigen::Index>(rows.size());
  Mat a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < n; ++k)
      a(i, k) = rows.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(k)).get<double>();
  return mixing_from_weights(a);
}

}  // namespace csl

#endif  // CSL_TOPOLOGY_HPP
