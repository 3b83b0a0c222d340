#ifndef CSL_TYPES_HPP
#define CSL_TYPES_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace csl {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Base for every error thrown by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid input or configuration (CLI exit code 2).
struct ConfigError : Error {
  using Error::Error;
};

/// Numerical failure inside an iteration (CLI exit code 3).
struct EngineAbort : Error {
  using Error::Error;
};

struct NotSeparable : Error {
  NotSeparable() : Error("not separable") {}
};

struct DegenerateSpectrum : Error {
  DegenerateSpectrum() : Error("degenerate spectrum: lambda >= 1") {}
};

/// Independent random stream for (seed, stream); distinct streams never alias.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x6373u};
  return std::mt19937_64(seq);
}

/// Standard normal draws via Box-Muller so results do not depend on the
/// standard library's distribution implementation.
class Gaussian {
 public:
  explicit Gaussian(std::mt19937_64& rng) : rng_(rng) {}

  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    double rad = std::sqrt(-2.0 * std::log(u1));
    double th = 2.0 * 3.14159265358979323846 * u2;
    spare_ = rad * std::sin(th);
    has_spare_ = true;
    return rad * std::cos(th);
  }

  // in (0, 1]
  double uniform() { return (static_cast<double>(rng_() >> 11) + 1.0) * 0x1.0p-53; }

 private:
  std::mt19937_64& rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

/// Fisher-Yates with our own index draw (std::shuffle is implementation-defined).
template <class It>
void shuffle(It first, It last, std::mt19937_64& rng) {
  auto n = static_cast<std::size_t>(last - first);
  for (std::size_t i = n; i > 1; --i) {
    std::size_t j = uniform_index(rng, i);
    std::swap(first[i - 1], first[j]);
  }
}

}  // namespace csl

#endif  // CSL_TYPES_HPP
