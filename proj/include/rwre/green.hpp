// Lattice Green's functions of symmetric transient random walks: truncated
// series by exact pmf evolution plus a local-CLT tail with a fitted 1/m
// correction.  Drives the d >= 3 invariant-measure formula and the return
// probability oracles.
#pragma once

#include <Eigen/Dense>

#include "rwre/lattice.hpp"

namespace rwre {

// integer change of coordinates onto the sublattice generated by a step set
struct BasisMap {
  int d = 1;
  LatticeBasis basis;
  Eigen::Matrix3d B = Eigen::Matrix3d::Identity();     // columns = basis vectors
  Eigen::Matrix3d Binv = Eigen::Matrix3d::Identity();  // rational inverse

  IVec to_basis(const IVec& ambient) const;    // throws if not on the lattice
  IVec to_ambient(const IVec& basis_pt) const;
  OffsetPmf map_pmf(const OffsetPmf& ambient) const;
};

BasisMap make_basis_map(const LatticeBasis& L);

struct GreenOptions {
  int exact_steps = 20;          // exact pmf evolution horizon m1
  long long lclt_steps = 20000;  // direct local-CLT summation horizon
  double mass_tol = 1e-16;       // pmf truncation during evolution
  double tail_tol = 1e-6;        // requested absolute tail accuracy (reported)
};

class GreenTable {
 public:
  // step pmf must be given in basis coordinates (generates Z^d), symmetric,
  // aperiodic, with d >= 3 (transient)
  GreenTable(const OffsetPmf& step, int d, const std::vector<IVec>& points,
             const GreenOptions& opt = {});

  double at(const IVec& x) const;
  bool has(const IVec& x) const { return values_.count(x) > 0; }
  double tail_error_bound() const { return tail_err_; }
  const OffsetPmf& step() const { return step_; }
  int dim() const { return d_; }

 private:
  int d_;
  OffsetPmf step_;
  SiteMap<double> values_;
  double tail_err_ = 0;
};

// expected visits to 0 from 0 (includes time 0) for the pure walk
double rw_green_at_origin(const OffsetPmf& step_in_basis, int d,
                          const GreenOptions& opt = {});
// return probability q = 1 - 1/G(0)
double rw_return_probability(const OffsetPmf& step_in_basis, int d,
                             const GreenOptions& opt = {});

}  // namespace rwre
