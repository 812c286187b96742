#include "rwre/lattice.hpp"

#include <numeric>

namespace rwre {

OffsetPmf convolve(const OffsetPmf& a, const OffsetPmf& b) {
  OffsetPmf out;
  out.support.reserve(a.size() * b.size());
  out.prob.reserve(a.size() * b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) {
      out.support.push_back(iadd(a.support[i], b.support[j]));
      out.prob.push_back(a.prob[i] * b.prob[j]);
    }
  out.compress(0.0);
  return out;
}

OffsetPmf difference_law(const OffsetPmf& a, const OffsetPmf& b) {
  OffsetPmf nb = b;
  for (auto& v : nb.support) v = ineg(v);
  return convolve(a, nb);
}

void PairPmf::compress(double drop_below) {
  struct PairHash {
    std::size_t operator()(const std::array<IVec, 2>& p) const {
      IVecHash h;
      return h(p[0]) * 0x9e3779b97f4a7c15ull + h(p[1]);
    }
  };
  std::unordered_map<std::array<IVec, 2>, double, PairHash> acc;
  for (std::size_t i = 0; i < support.size(); ++i) acc[support[i]] += prob[i];
  support.clear();
  prob.clear();
  for (auto& [k, v] : acc) {
    if (std::abs(v) > drop_below) {
      support.push_back(k);
      prob.push_back(v);
    }
  }
  std::vector<std::size_t> idx(support.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) {
    return support[x] < support[y];
  });
  std::vector<std::array<IVec, 2>> s2(support.size());
  std::vector<double> p2(prob.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    s2[i] = support[idx[i]];
    p2[i] = prob[idx[i]];
  }
  support.swap(s2);
  prob.swap(p2);
}

OffsetPmf PairPmf::marginal(int which) const {
  OffsetPmf out;
  for (std::size_t i = 0; i < support.size(); ++i) {
    out.support.push_back(support[i][which]);
    out.prob.push_back(prob[i]);
  }
  out.compress(0.0);
  return out;
}

OffsetPmf PairPmf::difference() const {
  OffsetPmf out;
  for (std::size_t i = 0; i < support.size(); ++i) {
    out.support.push_back(isub(support[i][0], support[i][1]));
    out.prob.push_back(prob[i]);
  }
  out.compress(0.0);
  return out;
}

PairPmf tensor(const OffsetPmf& a, const OffsetPmf& b) {
  PairPmf out;
  out.support.reserve(a.size() * b.size());
  out.prob.reserve(a.size() * b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) {
      out.support.push_back({a.support[i], b.support[j]});
      out.prob.push_back(a.prob[i] * b.prob[j]);
    }
  out.compress(0.0);
  return out;
}

std::vector<MIdx> multi_indices(int d, int degree) {
  std::vector<MIdx> out;
  if (d == 1) {
    out.push_back({degree, 0, 0});
    return out;
  }
  if (d == 2) {
    for (int i = 0; i <= degree; ++i) out.push_back({i, degree - i, 0});
    return out;
  }
  for (int i = 0; i <= degree; ++i)
    for (int j = 0; j + i <= degree; ++j) out.push_back({i, j, degree - i - j});
  return out;
}

namespace {

// column-style Hermite normal form for an integer matrix with rows = d,
// columns = generators; reduces in place, returns rank
int hnf_reduce(std::vector<IVec>& cols, int d) {
  int rank = 0;
  for (int row = 0; row < d && rank < (int)cols.size(); ++row) {
    // find a pivot column with nonzero entry in `row` at or after `rank`
    int piv = -1;
    for (std::size_t c = rank; c < cols.size(); ++c)
      if (cols[c][row] != 0 && (piv < 0 || std::abs(cols[c][row]) < std::abs(cols[piv][row])))
        piv = (int)c;
    if (piv < 0) continue;
    std::swap(cols[rank], cols[piv]);
    // eliminate the row entry from all later columns by gcd steps
    bool again = true;
    while (again) {
      again = false;
      for (std::size_t c = rank + 1; c < cols.size(); ++c) {
        while (cols[c][row] != 0) {
          int q = cols[c][row] / cols[rank][row];
          cols[c] = isub(cols[c], iscale(cols[rank], q));
          if (cols[c][row] != 0) {
            std::swap(cols[rank], cols[c]);
            again = true;
          }
        }
      }
    }
    if (cols[rank][row] < 0) cols[rank] = ineg(cols[rank]);
    ++rank;
  }
  cols.resize(rank);
  return rank;
}

long long det3(const std::array<IVec, kMaxDim>& c, int rank) {
  if (rank == 1) {
    long long g = 0;
    for (int i = 0; i < kMaxDim; ++i) g = std::max(g, (long long)std::abs(c[0][i]));
    // for rank 1 the covolume along the line is the gcd-normalized length;
    // use gcd of entries
    long long gg = 0;
    for (int i = 0; i < kMaxDim; ++i) gg = std::gcd(gg, (long long)std::abs(c[0][i]));
    return gg == 0 ? 1 : gg;
  }
  if (rank == 2) {
    // covolume of 2d sublattice embedded in <=3 dims: sqrt(gram det) is not
    // integer in general; when the lattice lies in a coordinate plane the
    // 2x2 determinant works.  We return the gram-determinant square root
    // rounded, valid for all our (axis-aligned or checkerboard) cases.
    long long g11 = idot(c[0], c[0]), g12 = idot(c[0], c[1]), g22 = idot(c[1], c[1]);
    double dv = std::sqrt((double)(g11 * g22 - g12 * g12));
    return (long long)std::llround(dv);
  }
  long long d0 = (long long)c[0][0] * ((long long)c[1][1] * c[2][2] - (long long)c[1][2] * c[2][1]) -
                 (long long)c[0][1] * ((long long)c[1][0] * c[2][2] - (long long)c[1][2] * c[2][0]) +
                 (long long)c[0][2] * ((long long)c[1][0] * c[2][1] - (long long)c[1][1] * c[2][0]);
  return std::abs(d0);
}

}  // namespace

LatticeBasis lattice_basis_from(const std::vector<IVec>& gens, int d) {
  std::vector<IVec> cols;
  for (auto& g : gens)
    if (g != izero()) cols.push_back(g);
  LatticeBasis L;
  L.d = d;
  if (cols.empty()) {
    L.rank = 0;
    L.covolume = 1;
    return L;
  }
  L.rank = hnf_reduce(cols, kMaxDim);
  for (int i = 0; i < L.rank; ++i) L.cols[i] = cols[i];
  L.covolume = det3(L.cols, L.rank);
  return L;
}

bool lattice_contains(const LatticeBasis& L, const IVec& v) {
  if (v == izero()) return true;
  // solve integer combination by forward substitution over the HNF columns
  IVec r = v;
  for (int i = 0; i < L.rank; ++i) {
    // pivot row of column i = first nonzero row
    int prow = -1;
    for (int row = 0; row < kMaxDim; ++row)
      if (L.cols[i][row] != 0) {
        prow = row;
        break;
      }
    if (prow < 0) continue;
    if (r[prow] % L.cols[i][prow] != 0) return false;
    int q = r[prow] / L.cols[i][prow];
    r = isub(r, iscale(L.cols[i], q));
  }
  return r == izero();
}

bool same_sublattice(const LatticeBasis& a, const LatticeBasis& b) {
  if (a.rank != b.rank) return false;
  for (int i = 0; i < a.rank; ++i)
    if (!lattice_contains(b, a.cols[i])) return false;
  for (int i = 0; i < b.rank; ++i)
    if (!lattice_contains(a, b.cols[i])) return false;
  return true;
}

}  // namespace rwre
