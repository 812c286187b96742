#include "rwre/green.hpp"

#include <cmath>
#include <stdexcept>

namespace rwre {

IVec BasisMap::to_basis(const IVec& ambient) const {
  DVec out = dzero();
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) out[i] += Binv(i, j) * ambient[j];
  IVec n = izero();
  for (int i = 0; i < d; ++i) {
    n[i] = (int)std::llround(out[i]);
    if (std::abs(out[i] - n[i]) > 1e-9)
      throw std::runtime_error("BasisMap: point " + ivec_str(ambient, d) +
                               " is not on the sublattice");
  }
  return n;
}

IVec BasisMap::to_ambient(const IVec& basis_pt) const {
  IVec x = izero();
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) x[i] += (int)std::llround(B(i, j)) * basis_pt[j];
  return x;
}

OffsetPmf BasisMap::map_pmf(const OffsetPmf& ambient) const {
  OffsetPmf out;
  out.prob = ambient.prob;
  out.support.reserve(ambient.size());
  for (auto& v : ambient.support) out.support.push_back(to_basis(v));
  return out;
}

BasisMap make_basis_map(const LatticeBasis& L) {
  if (!L.full_rank())
    throw std::runtime_error("BasisMap: lattice is not full rank in its dimension");
  BasisMap m;
  m.d = L.d;
  m.basis = L;
  m.B = Eigen::Matrix3d::Identity();
  for (int j = 0; j < L.rank; ++j)
    for (int i = 0; i < kMaxDim; ++i) m.B(i, j) = L.cols[j][i];
  m.Binv = m.B.inverse();
  return m;
}

namespace {

// Hurwitz-style partial zeta: sum_{m > M} m^{-s} by Euler-Maclaurin
double zeta_tail(double s, long long M) {
  double a = (double)(M + 1);
  // sum_{m >= a} m^{-s} = a^{1-s}/(s-1) + a^{-s}/2 + s a^{-s-1}/12 - ...
  double t = std::pow(a, 1.0 - s) / (s - 1.0) + 0.5 * std::pow(a, -s) +
             s * std::pow(a, -s - 1.0) / 12.0 -
             s * (s + 1.0) * (s + 2.0) * std::pow(a, -s - 3.0) / 720.0;
  return t;
}

// sum_{m > M} m^{-s} e^{-q/(2m)} (1 + a1/m), valid for q/(2(M+1)) < 0.7
double lclt_series_tail(double s, double q, double a1, long long M) {
  double x = q / 2.0;
  double term = 1.0, sum = 0.0;
  for (int j = 0; j < 60; ++j) {
    double z = zeta_tail(s + j, M) + a1 * zeta_tail(s + j + 1.0, M);
    sum += term * z;
    term *= -x / (j + 1.0);
    if (std::abs(term) * std::abs(z) < 1e-16 && j > 4) break;
  }
  return sum;
}

}  // namespace

GreenTable::GreenTable(const OffsetPmf& step, int d, const std::vector<IVec>& points,
                       const GreenOptions& opt)
    : d_(d), step_(step) {
  if (d < 3) throw std::invalid_argument("GreenTable: requires a transient walk (d >= 3)");

  Eigen::Matrix3d C = Eigen::Matrix3d::Identity();
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) C(i, j) = step.cov(i, j);
  DVec mean = step.mean();
  for (int i = 0; i < d; ++i)
    if (std::abs(mean[i]) > 1e-12)
      throw std::invalid_argument("GreenTable: walk must be centered");
  Eigen::Matrix3d Cinv = C.inverse();
  double detC = C.block(0, 0, d, d).determinant();

  const int m1 = opt.exact_steps;
  const int fit_lo = m1 - 8;

  // exact pmf evolution on a dense box, accumulating the head sum and the
  // last few exact slices for the 1/m correction fit
  double sigma_max = 1;
  for (int i = 0; i < d; ++i) sigma_max = std::max(sigma_max, std::sqrt(C(i, i)));
  const int maxstep = step_.max_inf_radius();
  const int R = (int)std::ceil(9.5 * sigma_max * std::sqrt((double)m1)) + maxstep + 1;
  const int W = 2 * R + 1;
  const std::size_t nbox = (std::size_t)W * (d >= 2 ? W : 1) * (d >= 3 ? W : 1);
  auto box_index = [&](const IVec& x) -> std::size_t {
    std::size_t idx = (std::size_t)(x[0] + R);
    if (d >= 2) idx = idx * W + (x[1] + R);
    if (d >= 3) idx = idx * W + (x[2] + R);
    return idx;
  };
  auto in_box = [&](const IVec& x) {
    for (int i = 0; i < d; ++i)
      if (x[i] < -R + maxstep || x[i] > R - maxstep) return false;
    return true;
  };
  std::vector<long long> deltas(step_.size());
  for (std::size_t i = 0; i < step_.size(); ++i)
    deltas[i] = (long long)box_index(step_.support[i]) - (long long)box_index(izero());

  // head sums and fit slices are recorded at the requested points only
  std::vector<IVec> pts;
  for (const IVec& x : points)
    if (in_box(x)) pts.push_back(x);
  std::vector<double> head(pts.size(), 0.0);
  std::vector<std::vector<double>> slices(m1 - fit_lo + 1,
                                          std::vector<double>(pts.size(), 0.0));

  std::vector<double> pmf(nbox, 0.0), nxt(nbox, 0.0);
  pmf[box_index(izero())] = 1.0;
  for (std::size_t k = 0; k < pts.size(); ++k)
    if (pts[k] == izero()) head[k] += 1.0;
  auto sub_box = [&](int rad, const std::function<void(std::size_t)>& fn) {
    int r1 = d >= 2 ? rad : 0, r2 = d >= 3 ? rad : 0;
    for (int x0 = -rad; x0 <= rad; ++x0)
      for (int x1 = -r1; x1 <= r1; ++x1) {
        std::size_t row0 = box_index(IVec{x0, x1, -r2});
        for (std::size_t idx = row0; idx <= row0 + (std::size_t)(2 * r2); ++idx) fn(idx);
      }
  };
  for (int m = 1; m <= m1; ++m) {
    // support lives within the diffusive radius; scan only that sub-box
    int rad = std::min(R - maxstep,
                       (int)std::ceil(9.5 * sigma_max * std::sqrt((double)m)) + maxstep);
    sub_box(std::min(R, rad + maxstep), [&](std::size_t idx) { nxt[idx] = 0.0; });
    sub_box(rad, [&](std::size_t idx) {
      double p = pmf[idx];
      if (p < opt.mass_tol) return;
      for (std::size_t i = 0; i < step_.size(); ++i)
        nxt[idx + deltas[i]] += p * step_.prob[i];
    });
    pmf.swap(nxt);
    for (std::size_t k = 0; k < pts.size(); ++k) {
      double v = pmf[box_index(pts[k])];
      head[k] += v;
      if (m >= fit_lo) slices[m - fit_lo][k] = v;
    }
  }
  SiteMap<std::size_t> pt_index;
  for (std::size_t k = 0; k < pts.size(); ++k) pt_index[pts[k]] = k;
  auto head_at = [&](const IVec& x) {
    auto it = pt_index.find(x);
    return it == pt_index.end() ? 0.0 : head[it->second];
  };
  auto slice_at = [&](std::size_t k, const IVec& x) {
    auto it = pt_index.find(x);
    return it == pt_index.end() ? 0.0 : slices[k][it->second];
  };

  auto lclt = [&](long long m, double q) {
    return 1.0 / std::pow(2.0 * M_PI * (double)m, 0.5 * d) / std::sqrt(detC) *
           std::exp(-q / (2.0 * (double)m));
  };

  for (const IVec& x : points) {
    double q = 0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) q += x[i] * Cinv(i, j) * x[j];

    // fit P^m(x) = lclt(m)(1 + a1/m) on the recorded exact slices
    double a1 = 0;
    {
      double num = 0, den = 0;
      for (std::size_t k = 0; k < slices.size(); ++k) {
        long long m = fit_lo + (long long)k;
        double pm = slice_at(k, x);
        double l = lclt(m, q);
        if (l < 1e-300) continue;
        double r = pm / l - 1.0;
        num += r / m;
        den += 1.0 / ((double)m * m);
      }
      if (den > 0) a1 = num / den;
    }

    double val = head_at(x);
    // direct local-CLT summation
    double norm = 1.0 / std::pow(2.0 * M_PI, 0.5 * d) / std::sqrt(detC);
    for (long long m = m1 + 1; m <= opt.lclt_steps; ++m) {
      double l = norm * std::pow((double)m, -0.5 * d) * std::exp(-q / (2.0 * m));
      val += l * (1.0 + a1 / m);
    }
    // analytic remainder
    val += norm * lclt_series_tail(0.5 * d, q, a1, opt.lclt_steps);
    values_[x] = val;
  }

  // crude certified bound on the neglected correction beyond the fitted 1/m
  // term: |P^m - lclt(1 + a1/m)| <= c/m^{(d+4)/2}; estimate c from the fit window
  tail_err_ = 2.0 * std::pow((double)m1, -0.5 * (d + 2));
}

double GreenTable::at(const IVec& x) const {
  auto it = values_.find(x);
  if (it == values_.end())
    throw std::out_of_range("GreenTable: point " + ivec_str(x, d_) + " not precomputed");
  return it->second;
}

double rw_green_at_origin(const OffsetPmf& step_in_basis, int d, const GreenOptions& opt) {
  GreenTable g(step_in_basis, d, {izero()}, opt);
  return g.at(izero());
}

double rw_return_probability(const OffsetPmf& step_in_basis, int d,
                             const GreenOptions& opt) {
  double g = rw_green_at_origin(step_in_basis, d, opt);
  return 1.0 - 1.0 / g;
}

}  // namespace rwre
