// Catalog of discrete random-environment models: annealed laws, exact moment
// oracles, exact two-point kernels, and quenched row sampling.
#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "rwre/lattice.hpp"
#include "rwre/rng.hpp"
#include "rwre/weight_laws.hpp"

namespace rwre {

struct EnvironmentSpec {
  enum class Model { NearestNeighborIID, SymmetricLazy, RandomLandscape };

  Model model = Model::NearestNeighborIID;
  int d = 1;
  int composite_steps = 0;  // 0 = model default (2 for NearestNeighborIID, else 1)
  WeightLaw weights;
  // RandomLandscape: support function b over offsets (b > 0 on listed offsets)
  std::vector<IVec> landscape_support;
  std::vector<double> landscape_b;

  int effective_composite_steps() const {
    if (composite_steps > 0) return composite_steps;
    return model == Model::NearestNeighborIID ? 2 : 1;
  }
  std::string model_name() const;
  void check_shape() const;  // throws on malformed spec
};

struct StepDistribution {
  int d = 1;
  OffsetPmf pmf;  // composite annealed step law
  DVec mean_vec = dzero();
  Eigen::Matrix3d cov = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d norm = Eigen::Matrix3d::Identity();  // Sigma^{-1/2} on the d-block

  DVec to_macroscopic(const IVec& x) const {  // normalized coordinates
    DVec out = dzero();
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) out[i] += norm(i, j) * x[j];
    return out;
  }
  DVec to_macroscopic(const DVec& x) const {
    DVec out = dzero();
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) out[i] += norm(i, j) * x[j];
    return out;
  }
};

struct KernelRow {
  IVec site = izero();
  long long time = 0;
  OffsetPmf pmf;
};

// exact finite-sum views of the annealed moment generating function
class MgfOracle {
 public:
  MgfOracle() = default;
  MgfOracle(const OffsetPmf& mu, int d);

  double admissible_radius() const { return z0_; }
  double M(const DVec& v) const;
  double logM(const DVec& v) const;
  DVec grad_logM(const DVec& v) const;
  Eigen::Matrix3d hessian_logM(const DVec& v) const;

 private:
  void check(const DVec& v) const;
  OffsetPmf mu_;
  int d_ = 1;
  double z0_ = 0;
};

struct TwoPointKernel {
  IVec separation = izero();
  PairPmf joint;           // exact p^(2)((y,0), .)
  PairPmf rho;             // centered remainder p^(2) - mu (x) mu (signed)
  bool beyond_range = false;
  // attached standard errors when Monte Carlo fallback was used (empty = exact)
  std::vector<double> joint_stderr;
};

// Exact two-point machinery for the composite kernel of a model.  All limit
// formulas with k=2 are driven from these tables.
struct TwoPointTables {
  int d = 1;
  int composite_steps = 1;
  StepDistribution mu;      // composite annealed law with normalization
  OffsetPmf mu_elementary;  // one elementary annealed step
  PairPmf indep;            // mu (x) mu
  OffsetPmf diff_far;       // law of a1 - a2 under mu (x) mu
  int range_inf = 0;        // |sep|_inf beyond which joint == indep exactly
  LatticeBasis walker_lattice;  // subgroup generated by composite steps
  LatticeBasis diff_lattice;    // subgroup generated by difference steps
  std::vector<IVec> corr_seps;  // separations where rho != 0
  SiteMap<PairPmf> joint;       // exact joint tables on corr_seps

  bool in_range(const IVec& sep) const { return joint.count(sep) > 0; }
  const PairPmf& joint_at(const IVec& sep) const {
    auto it = joint.find(sep);
    return it == joint.end() ? indep : it->second;
  }
  PairPmf rho_at(const IVec& sep) const;       // signed, empty if beyond range
  OffsetPmf diff_step(const IVec& sep) const;  // difference-chain row
};

// ---------------------------------------------------------------------------
// Operations

StepDistribution build_step_distribution(const EnvironmentSpec& spec);
MgfOracle mgf_oracle(const StepDistribution& mu);
TwoPointTables build_two_point_tables(const EnvironmentSpec& spec);
TwoPointKernel two_point_kernel(const EnvironmentSpec& spec, const IVec& separation);
// Monte Carlo fallback estimate of the two-point kernel (attaches stderr)
TwoPointKernel two_point_kernel_mc(const EnvironmentSpec& spec, const IVec& separation,
                                   std::uint64_t samples, std::uint64_t seed);

// smallest total degree at which a row moment is non-deterministic
int symmetry_order(const EnvironmentSpec& spec);

struct AxiomCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};
struct DiagnosticReport {
  std::vector<AxiomCheck> checks;
  bool all_pass() const {
    for (auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};
DiagnosticReport validate_assumptions(const EnvironmentSpec& spec);

// ---------------------------------------------------------------------------
// Quenched environment: deterministic per (seed, env id, time, site).
// Rows are elementary; composite evolution takes effective_composite_steps()
// elementary sub-steps per kernel step.
class EnvironmentSampler {
 public:
  EnvironmentSampler(const EnvironmentSpec& spec, std::uint64_t master_seed,
                     std::uint64_t env_id);

  KernelRow row(long long elementary_time, const IVec& site) const;
  // allocation-free variant: probabilities over directions() into out
  void row_probs(long long elementary_time, const IVec& site,
                 std::vector<double>& out) const;
  const std::vector<IVec>& directions() const { return dirs_; }
  const EnvironmentSpec& spec() const { return spec_; }
  int elementary_range() const;  // |x1-x2|_inf beyond which rows independent

 private:
  double log_weight(long long time, const IVec& site) const;  // landscape omega
  EnvironmentSpec spec_;
  std::uint64_t master_ = 0, env_id_ = 0;
  std::vector<IVec> dirs_;  // elementary step directions
};

// convenience wrapper matching the spec operation name
KernelRow sample_kernel_row(const EnvironmentSpec& spec, std::uint64_t master_seed,
                            std::uint64_t env_id, long long elementary_time,
                            const IVec& site);

}  // namespace rwre
