// Counter-keyed random streams.  Every consumer derives its own stream from
// (master seed, stream ids...) so replicas and kernel rows are reproducible
// independently of scheduling order.
#pragma once

#include <cstdint>
#include <cmath>
#include <initializer_list>

#include "rwre/lattice.hpp"

namespace rwre {

inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

class Rng {
 public:
  Rng() : Rng(0x853c49e6748fea9bull) {}
  explicit Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (int i = 0; i < 4; ++i) s_[i] = splitmix64(x);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // uniform in [0,1) with 53 random bits
  double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  // integer in [0, n)
  std::uint64_t below(std::uint64_t n) {
    // Lemire rejection-free-ish bounded draw
    __uint128_t m = (__uint128_t)next_u64() * n;
    return (std::uint64_t)(m >> 64);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4];
  double cached_ = 0;
  bool have_cached_ = false;
};

// Derive a stream from a master seed and a list of ids (experiment id,
// replica index, purpose tag, time, site hash, ...).
inline Rng make_stream(std::uint64_t master, std::initializer_list<std::uint64_t> ids) {
  std::uint64_t x = master ^ 0xa0761d6478bd642full;
  splitmix64(x);
  for (std::uint64_t id : ids) {
    x ^= splitmix64(x) + id;
    splitmix64(x);
  }
  return Rng(x);
}

inline std::uint64_t site_key(const IVec& v) {
  IVecHash h;
  return (std::uint64_t)h(v);
}

// purpose tags for stream derivation (documented splitting rule)
namespace stream_purpose {
constexpr std::uint64_t kKernelRow = 1;
constexpr std::uint64_t kWalker = 2;
constexpr std::uint64_t kInitialState = 3;
constexpr std::uint64_t kEstimator = 4;
}  // namespace stream_purpose

// Sampler over a finite pmf: cumulative table + binary search (linear scan
// for tiny supports).
class DiscreteSampler {
 public:
  DiscreteSampler() = default;
  explicit DiscreteSampler(const std::vector<double>& probs) { reset(probs); }

  void reset(const std::vector<double>& probs) {
    cdf_.resize(probs.size());
    double acc = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      cdf_[i] = acc;
    }
    if (!cdf_.empty()) cdf_.back() = 1.0;  // guard against fp drift
  }

  std::size_t sample(Rng& rng) const {
    double u = rng.uniform();
    if (cdf_.size() <= 8) {
      for (std::size_t i = 0; i < cdf_.size(); ++i)
        if (u < cdf_[i]) return i;
      return cdf_.size() - 1;
    }
    std::size_t lo = 0, hi = cdf_.size() - 1;
    while (lo < hi) {
      std::size_t mid = (lo + hi) / 2;
      if (u < cdf_[mid])
        hi = mid;
      else
        lo = mid + 1;
    }
    return lo;
  }

  bool empty() const { return cdf_.empty(); }

 private:
  std::vector<double> cdf_;
};

}  // namespace rwre
