// Quenched and annealed k-point motions, exponentially tilted two-point
// chains, and the pair functions built from the exact two-point tables.
#pragma once

#include <functional>

#include "rwre/env_models.hpp"
#include "rwre/stats.hpp"

namespace rwre {

struct KPointState {
  std::vector<IVec> positions;
  long long time = 0;  // composite time index
};

// all k walkers driven by the same sampled kernel rows per (time, site)
std::vector<KPointState> simulate_quenched_kpoint(const EnvironmentSpec& spec, int k,
                                                  const std::vector<IVec>& starts,
                                                  long long horizon,
                                                  std::uint64_t master_seed,
                                                  std::uint64_t env_id);

// exact difference-chain row y -> p_dif(y, .), falling back to mu * mu-check
OffsetPmf difference_kernel(const TwoPointTables& tables, const IVec& separation);

// ---------------------------------------------------------------------------
// Tilting

struct Tilt {
  DVec varsigma = dzero();
  bool is_zero() const {
    return varsigma[0] == 0 && varsigma[1] == 0 && varsigma[2] == 0;
  }
};

// Exact tilted two-point chain q^(2)_vs: reweighted pair tables within the
// interaction window, two independent tilted walker steps outside.
class TiltedPairChain {
 public:
  TiltedPairChain(const TwoPointTables& tables, const Tilt& tilt);

  const TwoPointTables& tables() const { return *tables_; }
  const Tilt& tilt() const { return tilt_; }
  double log_M() const { return logM_; }
  double admissible_radius() const { return radius_; }

  // one joint step of (x1, x2)
  void step(IVec& x1, IVec& x2, Rng& rng) const;
  // one step of the separation chain (Markov for k=2)
  IVec step_difference(const IVec& sep, Rng& rng) const;

  OffsetPmf tilted_walker_step() const { return far_walker_; }  // mu^vs
  OffsetPmf tilted_diff_row(const IVec& sep) const;             // exact row
  const OffsetPmf& far_diff() const { return far_diff_; }       // law of a1 - a2 far out
  bool has_interaction() const { return !in_range_.empty(); }
  double u_at(const IVec& sep) const;         // cumulant gap u_vs(sep), 0 beyond range
  double vartheta_at(const IVec& sep) const;  // e^u - 1
  double max_abs_u() const;
  DVec tilted_mean() const;  // mean of mu^vs (lattice units)

 private:
  const TwoPointTables* tables_;
  Tilt tilt_;
  double logM_ = 0, radius_ = 0;
  OffsetPmf far_walker_;
  DiscreteSampler far_sampler_;
  OffsetPmf far_diff_;
  DiscreteSampler far_diff_sampler_;
  struct SepEntry {
    PairPmf pmf;
    DiscreteSampler sampler;
    OffsetPmf diff;
    DiscreteSampler diff_sampler;
    double u = 0;
  };
  SiteMap<SepEntry> in_range_;
};

// ---------------------------------------------------------------------------
// Pair functions (eta, zeta, u, vartheta)

// eta_{r1,r2}(sep) = int (a1)^{r1} (a2)^{r2} rho(sep, d a1 d a2); offsets are
// mapped through `coords` first (identity = lattice units, mu.norm = macroscopic)
double eta_value(const TwoPointTables& t, const MIdx& r1, const MIdx& r2,
                 const IVec& sep, const Eigen::Matrix3d* coords = nullptr);
// zeta_v(sep) = int prod_j (v . a_j)^p / p!  rho(sep, .)
double zeta_value(const TwoPointTables& t, int p, const DVec& v, const IVec& sep,
                  const Eigen::Matrix3d* coords = nullptr);
// u_vs(sep) = log int e^{vs.(a1+a2)} p2(sep,.) - 2 log M(vs)  (lattice tilt)
double u_value(const TwoPointTables& t, const DVec& varsigma, const IVec& sep);
double vartheta_value(const TwoPointTables& t, const DVec& varsigma, const IVec& sep);

struct PairFunctionTable {
  int d = 1, p = 1;
  DVec direction = dzero();  // v for zeta
  DVec varsigma = dzero();   // tilt for u / vartheta
  std::vector<IVec> seps;    // interaction window (value 0 implied outside)
  SiteMap<double> zeta, u, vartheta;
  std::vector<std::pair<MIdx, MIdx>> eta_indices;
  std::vector<SiteMap<double>> eta;
};

PairFunctionTable pair_functions(const TwoPointTables& t, int p, const DVec& v,
                                 const DVec& varsigma,
                                 const Eigen::Matrix3d* coords = nullptr);

// cumulant gap K(x, (vs..vs); k): exact for k=2, Monte Carlo for k >= 3
double cumulant_gap_two(const TwoPointTables& t, const DVec& varsigma, const IVec& sep);
EstimateWithCI cumulant_gap_mc(const EnvironmentSpec& spec, const DVec& varsigma, int k,
                               const std::vector<IVec>& positions, std::uint64_t replicas,
                               std::uint64_t seed);

// ---------------------------------------------------------------------------
// Tilting identity: E_untilted[prod C . f] = E_tilted[e^{sum K} f]

using PairObservable = std::function<double(const IVec&, const IVec&)>;

// exact transfer-matrix evaluation at small horizon; returns |lhs - rhs|
double tilting_identity_residual_exact(const TwoPointTables& t, const Tilt& tilt,
                                       long long horizon, const PairObservable& f,
                                       const IVec& start1, const IVec& start2);
// paired Monte Carlo with common random numbers; returns (residual, stderr)
std::pair<EstimateWithCI, EstimateWithCI> tilting_identity_mc(
    const TwoPointTables& t, const Tilt& tilt, long long horizon,
    const PairObservable& f, const IVec& start1, const IVec& start2,
    std::uint64_t replicas, std::uint64_t seed);

}  // namespace rwre
