// Integer-lattice primitives shared by all modules: sites, offsets, pmfs,
// multi-indices, sublattice bases.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace rwre {

constexpr int kMaxDim = 3;

using IVec = std::array<int, kMaxDim>;  // coordinates past d are always 0
using DVec = std::array<double, kMaxDim>;
using MIdx = std::array<int, kMaxDim>;  // multi-index (nonnegative exponents)

inline IVec izero() { return {0, 0, 0}; }
inline DVec dzero() { return {0.0, 0.0, 0.0}; }

inline IVec iadd(const IVec& a, const IVec& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}
inline IVec isub(const IVec& a, const IVec& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}
inline IVec ineg(const IVec& a) { return {-a[0], -a[1], -a[2]}; }
inline IVec iscale(const IVec& a, int c) { return {c * a[0], c * a[1], c * a[2]}; }

inline long long idot(const IVec& a, const IVec& b) {
  return (long long)a[0] * b[0] + (long long)a[1] * b[1] + (long long)a[2] * b[2];
}
inline double ddot(const DVec& a, const DVec& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
inline double ddot(const DVec& a, const IVec& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
inline DVec dadd(const DVec& a, const DVec& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}
inline DVec dsub(const DVec& a, const DVec& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}
inline DVec dscale(const DVec& a, double c) { return {c * a[0], c * a[1], c * a[2]}; }
inline DVec to_dvec(const IVec& a) { return {(double)a[0], (double)a[1], (double)a[2]}; }

inline int inorm_inf(const IVec& a) {
  return std::max({std::abs(a[0]), std::abs(a[1]), std::abs(a[2])});
}
inline long long inorm2_sq(const IVec& a) { return idot(a, a); }
inline double dnorm2(const DVec& a) { return std::sqrt(ddot(a, a)); }

struct IVecHash {
  std::size_t operator()(const IVec& v) const {
    // pack coords into 64 bits with a bias, then mix
    std::uint64_t h = 0;
    for (int i = 0; i < kMaxDim; ++i) {
      h = h * 0x9e3779b97f4a7c15ull + (std::uint64_t)(std::uint32_t)(v[i] + (1 << 20));
    }
    h ^= h >> 33;
    h *= 0xff51afd7ed558ccdull;
    h ^= h >> 33;
    return (std::size_t)h;
  }
};

template <class T>
using SiteMap = std::unordered_map<IVec, T, IVecHash>;

inline std::string ivec_str(const IVec& v, int d) {
  std::string s = "(";
  for (int i = 0; i < d; ++i) s += std::to_string(v[i]) + (i + 1 < d ? "," : "");
  return s + ")";
}

// ---------------------------------------------------------------------------
// Finite pmf over integer offsets.
struct OffsetPmf {
  std::vector<IVec> support;
  std::vector<double> prob;

  std::size_t size() const { return support.size(); }
  double total_mass() const {
    double s = 0;
    for (double p : prob) s += p;
    return s;
  }
  void normalize() {
    double s = total_mass();
    if (s <= 0) throw std::runtime_error("OffsetPmf: nonpositive total mass");
    for (double& p : prob) p /= s;
  }
  // merge duplicate support points and drop zero entries
  void compress(double drop_below = 0.0) {
    SiteMap<double> acc;
    for (std::size_t i = 0; i < support.size(); ++i) acc[support[i]] += prob[i];
    support.clear();
    prob.clear();
    for (auto& [k, v] : acc) {
      if (std::abs(v) > drop_below) {
        support.push_back(k);
        prob.push_back(v);
      }
    }
    sort_support();
  }
  void sort_support() {
    std::vector<std::size_t> idx(support.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return support[a] < support[b];
    });
    std::vector<IVec> s2(support.size());
    std::vector<double> p2(prob.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      s2[i] = support[idx[i]];
      p2[i] = prob[idx[i]];
    }
    support.swap(s2);
    prob.swap(p2);
  }
  double at(const IVec& v) const {
    for (std::size_t i = 0; i < support.size(); ++i)
      if (support[i] == v) return prob[i];
    return 0.0;
  }
  DVec mean() const {
    DVec m = dzero();
    for (std::size_t i = 0; i < support.size(); ++i)
      m = dadd(m, dscale(to_dvec(support[i]), prob[i]));
    return m;
  }
  // covariance entry about the mean
  double cov(int i, int j) const {
    DVec m = mean();
    double s = 0;
    for (std::size_t k = 0; k < support.size(); ++k)
      s += prob[k] * (support[k][i] - m[i]) * (support[k][j] - m[j]);
    return s;
  }
  int max_inf_radius() const {
    int r = 0;
    for (auto& v : support) r = std::max(r, inorm_inf(v));
    return r;
  }
  double max_two_norm() const {
    double r = 0;
    for (auto& v : support) r = std::max(r, std::sqrt((double)inorm2_sq(v)));
    return r;
  }
};

// w1 * w2 convolution of pmfs
OffsetPmf convolve(const OffsetPmf& a, const OffsetPmf& b);
// law of X - Y for independent X~a, Y~b
OffsetPmf difference_law(const OffsetPmf& a, const OffsetPmf& b);

// ---------------------------------------------------------------------------
// Finite joint pmf over pairs of offsets (two-walker step law).
struct PairPmf {
  std::vector<std::array<IVec, 2>> support;
  std::vector<double> prob;

  std::size_t size() const { return support.size(); }
  double total_mass() const {
    double s = 0;
    for (double p : prob) s += p;
    return s;
  }
  void compress(double drop_below = 0.0);
  OffsetPmf marginal(int which) const;
  OffsetPmf difference() const;  // law of a1 - a2
};

PairPmf tensor(const OffsetPmf& a, const OffsetPmf& b);

// ---------------------------------------------------------------------------
// Multi-index helpers.
inline int midx_degree(const MIdx& r) { return r[0] + r[1] + r[2]; }
inline double midx_factorial(const MIdx& r) {
  auto f = [](int n) {
    double x = 1;
    for (int i = 2; i <= n; ++i) x *= i;
    return x;
  };
  return f(r[0]) * f(r[1]) * f(r[2]);
}
inline double dpow_midx(const DVec& x, const MIdx& r) {
  double v = 1;
  for (int i = 0; i < kMaxDim; ++i)
    for (int k = 0; k < r[i]; ++k) v *= x[i];
  return v;
}
inline double ipow_midx(const IVec& x, const MIdx& r) {
  double v = 1;
  for (int i = 0; i < kMaxDim; ++i)
    for (int k = 0; k < r[i]; ++k) v *= x[i];
  return v;
}
// all multi-indices in dimension d with given total degree
std::vector<MIdx> multi_indices(int d, int degree);

// ---------------------------------------------------------------------------
// Integer sublattice of Z^d described by a basis (columns) obtained from a
// generating set via Hermite normal form.  Used for difference lattices.
struct LatticeBasis {
  int d = 1;
  int rank = 0;
  std::array<IVec, kMaxDim> cols{};  // basis vectors (first `rank` are valid)
  long long covolume = 1;            // |det| within the spanned subspace

  bool full_rank() const { return rank == d; }
};

LatticeBasis lattice_basis_from(const std::vector<IVec>& gens, int d);
// do two generating sets generate the same subgroup of Z^d?
bool same_sublattice(const LatticeBasis& a, const LatticeBasis& b);
// is v a member of the sublattice?
bool lattice_contains(const LatticeBasis& L, const IVec& v);

}  // namespace rwre
