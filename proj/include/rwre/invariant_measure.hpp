// Invariant measure of the two-walker difference chain, its unit
// normalization, and the noise coefficients built from it.
#pragma once

#include "rwre/green.hpp"
#include "rwre/kpoint.hpp"

namespace rwre {

// A difference chain: exact rows within the interaction window, a convolution
// row outside, living on a sublattice of Z^d.  `walker_norm` is the
// Sigma^{-1/2} map of the walker law, the metric used by the potential u.
struct DiffChain {
  int d = 1;
  OffsetPmf far;               // far-field row offsets (ambient coords)
  SiteMap<OffsetPmf> special;  // exact rows keyed by separation (ambient)
  LatticeBasis lattice;        // difference sublattice
  Eigen::Matrix3d walker_norm = Eigen::Matrix3d::Identity();
  int range_inf = 0;

  const OffsetPmf& row(const IVec& sep) const {
    auto it = special.find(sep);
    return it == special.end() ? far : it->second;
  }
  DVec to_macroscopic(const IVec& x) const {
    DVec out = dzero();
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) out[i] += walker_norm(i, j) * x[j];
    return out;
  }
};

DiffChain make_diff_chain(const TwoPointTables& t);
DiffChain make_tilted_diff_chain(const TwoPointTables& t, const Tilt& tilt);
// independent walkers sharing no environment (trivial environment reference)
DiffChain make_independent_diff_chain(const OffsetPmf& walker_mu, int d);

struct InvariantMeasure {
  enum class Norm { raw, unit };
  int d = 1;
  LatticeBasis lattice;
  SiteMap<double> weights;  // window weights keyed by ambient separation
  double c_far = 1.0;       // weight per lattice point outside the window
  int window_radius_basis = 0;
  Norm tag = Norm::raw;
  double stationarity_residual = 0.0;
  double boundary_flatness = 0.0;  // max relative deviation of the boundary ring
  double unit_integral = 0.0;      // int f dpi at the raw scale (set by unit_normalize)

  double at(const IVec& sep) const {
    auto it = weights.find(sep);
    return it == weights.end() ? c_far : it->second;
  }
  // integral of a finitely supported table against the measure
  double integrate(const SiteMap<double>& table) const {
    double s = 0;
    for (auto& [x, v] : table) s += v * at(x);
    return s;
  }
};

struct InvariantSolveOptions {
  int window_radius_basis = 0;  // 0 = automatic (4x range + margin)
  double far_field_tail_radius_scale = 1.0;
  GreenOptions green;  // d >= 3
};

// d <= 2: stationarity linear system on the window with far-field boundary
// condition; d >= 3: truncated Neumann/Green series with a certified tail.
InvariantMeasure solve_invariant_measure(const DiffChain& chain,
                                         const InvariantSolveOptions& opt = {});

// rescale so that int (P_dif - Id)u dpi = 1 with the dimension-specific u
InvariantMeasure unit_normalize(const DiffChain& chain, const InvariantMeasure& raw);

// potential u and its increment f = (P_dif - Id)u in the normalized metric
double potential_u(const DiffChain& chain, const IVec& sep);
double potential_f(const DiffChain& chain, const IVec& sep);
// int f dpi for a measure that equals c_far times counting outside the window
double unit_integral(const DiffChain& chain, const InvariantMeasure& pi);

// long-run occupation-ratio oracle pi(0)/pi(ref) for recurrent chains (d <= 2)
EstimateWithCI occupation_ratio_oracle(const DiffChain& chain, long long horizon,
                                       std::uint64_t replicas, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Noise coefficients

enum class GammaConvention {
  UnitMacroscopic,  // normalized coordinates, unit-normalized pi (paper form)
  LatticeCounting,  // lattice coordinates, pi scaled to counting at infinity
};

double gamma_ext_sq(const TwoPointTables& t, int p, const DVec& v,
                    const InvariantMeasure& pi_unit, GammaConvention conv);

struct NoiseCoefficients {
  int p = 1;
  double gamma_ext_sq_unit = 0.0;      // paper convention
  double gamma_ext_sq_counting = 0.0;  // finite-range comparison convention
  std::vector<std::pair<MIdx, MIdx>> ap_indices;
  std::vector<double> ap;              // A_p[(r1,r2)] table (macroscopic coords)
  Eigen::Matrix3d gamma_bulk_sq = Eigen::Matrix3d::Zero();  // p = 1 only
};

NoiseCoefficients bulk_coefficients(const TwoPointTables& t, int p,
                                    const InvariantMeasure& pi_unit);

// ---------------------------------------------------------------------------
// Exponential-functional coefficients (d >= 3)

struct ThetaEffOptions {
  std::uint64_t replicas = 20000;
  std::uint64_t seed = 1;
  int exit_radius_mult = 2;   // certify truncation after leaving this multiple
  long long max_steps = 50000;
  bool series_form = false;   // false = resummed exponential functional
};

struct ThetaEffResult {
  EstimateWithCI value;       // Theta_eff^2(f; v)
  double truncation_bound = 0.0;  // certified systematic error bar
  double diverging_fraction = 0.0;
};

// f given as a finite table over separations (ambient coords)
ThetaEffResult theta_eff(const TwoPointTables& t, const Tilt& tilt,
                         const SiteMap<double>& f_table,
                         const InvariantMeasure& pi_tilted_unit,
                         const ThetaEffOptions& opt = {});

// nu_eff^2(v) = |v|^{-2p} Theta_eff^2(vartheta_v; v), macroscopic |v|
ThetaEffResult nu_eff_sq(const TwoPointTables& t, int p, const Tilt& tilt,
                         const InvariantMeasure& pi_tilted_unit,
                         const ThetaEffOptions& opt = {});

}  // namespace rwre
