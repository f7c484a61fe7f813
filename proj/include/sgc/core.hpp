#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace sgc {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Index = std::int64_t;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Error thrown by all library operations on precondition or I/O failure.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

[[noreturn]] inline void fail(const std::string& what) { throw Error(what); }

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(what);
}

// --------------------------------------------------------------------------
// Deterministic RNG. All randomness in the library flows through this
// generator so results are reproducible across platforms and standard
// library implementations (std::*_distribution is implementation-defined).
// xoshiro256++ seeded through splitmix64.
// --------------------------------------------------------------------------
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& s : state_) s = splitmix64(x);
  }

  /// Independent stream keyed on (seed, stream id) pairs.
  static Rng derive(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t x = seed;
    std::uint64_t a = splitmix64(x);
    return Rng(a ^ (stream * 0x9e3779b97f4a7c15ULL + 0x7f4a7c15ULL));
  }
  static Rng derive(std::uint64_t seed, std::uint64_t s1, std::uint64_t s2) {
    Rng r = derive(seed, s1);
    std::uint64_t x = r.next_u64() ^ (s2 * 0xbf58476d1ce4e5b9ULL + 0x94d049bbULL);
    return Rng(x);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1).
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) {
    // Rejection-free would bias for huge n; rejection keeps it exact.
    const std::uint64_t limit = ~std::uint64_t(0) - ~std::uint64_t(0) % n;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  /// Standard normal via Box-Muller. One spare value cached per object.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    spare_ = mag * std::sin(2.0 * M_PI * u2);
    has_spare_ = true;
    return mag * std::cos(2.0 * M_PI * u2);
  }

  Vec3 gaussian3(double sigma = 1.0) {
    return Vec3(gaussian() * sigma, gaussian() * sigma, gaussian() * sigma);
  }

  /// Uniformly distributed rotation (Shoemake quaternion method).
  Mat3 random_rotation() {
    const double u1 = uniform(), u2 = uniform(), u3 = uniform();
    const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
    Eigen::Quaterniond q(a * std::sin(2.0 * M_PI * u2), a * std::cos(2.0 * M_PI * u2),
                         b * std::sin(2.0 * M_PI * u3), b * std::cos(2.0 * M_PI * u3));
    return q.normalized().toRotationMatrix();
  }

  /// Unit vector uniform on the sphere.
  Vec3 random_direction() {
    const double z = uniform(-1.0, 1.0);
    const double phi = uniform(0.0, 2.0 * M_PI);
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    return Vec3(s * std::cos(phi), s * std::sin(phi), z);
  }

  /// Fisher-Yates draw of k distinct values from [0, n).
  std::vector<Index> sample_without_replacement(Index n, Index k) {
    std::vector<Index> pool(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
    const Index m = std::min(n, k);
    for (Index i = 0; i < m; ++i) {
      const Index j = i + static_cast<Index>(uniform_index(std::uint64_t(n - i)));
      std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    }
    pool.resize(static_cast<std::size_t>(m));
    return pool;
  }

 private:
  static std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  static std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

  std::uint64_t state_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// --------------------------------------------------------------------------
// Minimal data-parallel helper. Work items write disjoint slots, so results
// are identical for any thread count.
// --------------------------------------------------------------------------

/// Worker count: explicit argument > SGC_THREADS env var > hardware count.
int resolve_thread_count(int requested = 0);

/// Runs fn(i) for i in [0, n) over `threads` workers in contiguous chunks.
void parallel_for(Index n, const std::function<void(Index)>& fn, int threads = 0);

}  // namespace sgc
