#pragma once

#include <Eigen/Core>
#include <Eigen/Sparse>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace mpmtopo {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using SparseMat = Eigen::SparseMatrix<double>;

// Error raised by configuration parsing/validation (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Error raised when the nonlinear solve cannot proceed (CLI exit code 3).
class SolveError : public std::runtime_error {
public:
  explicit SolveError(const std::string& msg) : std::runtime_error(msg) {}
};

// A particle reached det(F) <= 0; carries the offending determinant so the
// caller can report which state inverted.
class InvertedStateError : public SolveError {
public:
  InvertedStateError(const std::string& msg, double det_f, std::ptrdiff_t particle = -1)
      : SolveError(msg), det_f(det_f), particle(particle) {}
  double det_f;
  std::ptrdiff_t particle;
};

class DegenerateDesignError : public std::runtime_error {
public:
  explicit DegenerateDesignError(const std::string& msg) : std::runtime_error(msg) {}
};

// Verification (gradient check / acceptance) failure, CLI exit code 4.
class VerificationError : public std::runtime_error {
public:
  explicit VerificationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Deterministic RNG. std::mt19937_64 has a pinned algorithm, but the
// distributions in <random> are implementation-defined, so normal variates
// are produced with an explicit Box-Muller transform to keep outputs
// byte-identical across standard libraries.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed == 0 ? 0x9e3779b97f4a7c15ull : seed) {}

  // splitmix64
  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // standard normal via Box-Muller (one value per call; pair cached)
  double next_normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = next_double();
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
  }

private:
  std::uint64_t state_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

// FNV-1a 64-bit, used for config hashes in dump manifests.
inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// Data-parallel map over [0, n). Work is split into fixed contiguous chunks
// so results depend only on the index, never on the thread count; callers
// combine per-index outputs in index order to keep reductions deterministic.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t, std::size_t)>& body) {
  if (threads <= 1 || n < 2048) {
    body(0, n);
    return;
  }
  const std::size_t nt = std::min<std::size_t>(threads, (n + 2047) / 2048);
  std::vector<std::thread> pool;
  pool.reserve(nt);
  const std::size_t chunk = (n + nt - 1) / nt;
  for (std::size_t t = 0; t < nt; ++t) {
    const std::size_t lo = t * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&body, lo, hi] { body(lo, hi); });
  }
  for (auto& th : pool) th.join();
}

inline int default_threads() {
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : int(std::min(hw, 8u));
}

}  // namespace mpmtopo
