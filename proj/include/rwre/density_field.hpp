// Quenched density evolution, the macroscopic field, martingale increments
// with exact predictable quadratic variation, and the quadratic-variation
// field estimators.
#pragma once

#include "rwre/invariant_measure.hpp"
#include "rwre/scaling.hpp"

namespace rwre {

class DensityEvolver {
 public:
  DensityEvolver(const EnvironmentSpec& spec, std::uint64_t master_seed,
                 std::uint64_t env_id, const InitialProfile& nu,
                 double support_cap_mass = 0.0);
  // tilted variant: evolves Y_r(z) = e^{vs.z - r logM - log nu-hat} P^w(r,z)
  DensityEvolver(const EnvironmentSpec& spec, std::uint64_t master_seed,
                 std::uint64_t env_id, const InitialProfile& nu, const DVec& varsigma,
                 double support_cap_mass = 0.0);

  void step();  // one composite kernel step
  long long time() const { return r_; }
  double total_mass() const;
  double lost_mass() const { return lost_; }
  double mass_at(const IVec& z) const;
  double annealed_at(const IVec& z) const;
  void for_each(const std::function<void(const IVec&, double)>& fn) const;
  void for_each_annealed(const std::function<void(const IVec&, double)>& fn) const;
  // realized composite row from z for the step r -> r+1 (rebuilt from the
  // deterministic environment streams)
  OffsetPmf realized_composite_row(long long r, const IVec& z) const;
  const EnvironmentSampler& env() const { return env_; }

 private:
  void elementary_step(long long etime);
  EnvironmentSpec spec_;
  EnvironmentSampler env_;
  DVec varsigma_ = dzero();
  double logM_elem_ = 0;
  std::vector<double> tilt_factor_;
  OffsetPmf mu_elem_, mu_tilted_;
  int cs_ = 1;
  long long r_ = 0;
  double lost_ = 0;
  double cap_;
  bool dense_ = false;
  // dense 1-d representation
  std::vector<double> line_, line_next_, annealed_line_, annealed_next_;
  long long lo_ = 0, alo_ = 0;
  // generic representation
  SiteMap<double> mass_, annealed_;
  std::vector<double> rowbuf_;
};

// per-(time, test function) field observables
struct FieldSample {
  double t = 0;
  double h_field = 0;      // H^N(t, phi)
  double mean_field = 0;   // E H^N(t, phi) (annealed oracle)
  double f_field = 0;      // B_N (h - mean)
  double qv_ledger = 0;    // exact predictable <M^N(phi)>_t
  double qv_leading = 0;   // regime branch leading Q-term
  double qv_err1 = 0;      // V^1 / E^1 per regime
  double qv_err2 = 0;      // V^2 / E^2 per regime
  double martingale_sum = 0;  // sum of realized increments
  double heat_identity_residual = 0;  // sup over steps of the operator identity
  double lost_mass = 0;
  double total_mass = 0;
};

struct FieldOptions {
  bool collect_qv = true;      // exact predictable QV ledger + decomposition
  bool track_identity = true;  // per-step heat-operator identity residual
  double support_cap = 0.0;
};

// evolve one environment to horizon N*t and collect the field observables
FieldSample field_and_martingale(const EnvironmentSpec& spec, const ScalingParams& sp,
                                 const InitialProfile& nu, const TestFunction& phi,
                                 double t, std::uint64_t master_seed,
                                 std::uint64_t env_id, const FieldOptions& fopt = {});

// reconstruction residual |ledger - (leading + errors)| (exact by construction)
double qv_decomposition_residual(const FieldSample& fs);

// ---------------------------------------------------------------------------
// Quadratic variation field estimators (two-point Monte Carlo)

enum class QvfMode { QuenchedEnv, AnnealedPair, TiltedImportance };

struct QvfOptions {
  QvfMode mode = QvfMode::AnnealedPair;
  std::uint64_t replicas = 10000;
  std::uint64_t seed = 1;
  double min_ess_fraction = 0.01;  // importance-mode guard
};

struct QvfEstimate {
  EstimateWithCI value;
  double ess_fraction = 1.0;
};

// f is a finite table over separations; starts sampled from nu1 (x) nu2
QvfEstimate estimate_qvf(const EnvironmentSpec& spec, const ScalingParams& sp,
                         const SiteMap<double>& f_table, const TestFunction& phi,
                         double t, const InitialProfile& nu1, const InitialProfile& nu2,
                         const QvfOptions& opt);

// fixed deterministic starts (extended QVF)
QvfEstimate estimate_qvf_at(const EnvironmentSpec& spec, const ScalingParams& sp,
                            const SiteMap<double>& f_table, const TestFunction& phi,
                            double t, const IVec& a1, const IVec& a2,
                            const QvfOptions& opt);

}  // namespace rwre
