// Statistical estimators and hypothesis tests for the collision / local-time
// limit theorems, runnable on environment-induced two-point chains and on
// reference chains.
#pragma once

#include "rwre/density_field.hpp"

namespace rwre {

// A two-point chain handle: exact tables + tilt + drift metadata.
struct SRIChainHandle {
  TwoPointTables tables;
  Tilt tilt;
  DVec drift = dzero();  // per-step walker mean under the tilt (lattice units)
  std::string label;
};

SRIChainHandle environment_chain(const EnvironmentSpec& spec, const Tilt& tilt = {});
// independent walkers with step law mu (trivial environment)
SRIChainHandle independent_walk_chain(const OffsetPmf& walker_mu, int d,
                                      const Tilt& tilt = {},
                                      const std::string& label = "independent");
// classical references
OffsetPmf simple_walk_mu(int d);   // uniform on the 2d unit directions
OffsetPmf lazy_pm1_mu();           // {-1: 1/4, 0: 1/2, +1: 1/4}
OffsetPmf two_step_pm1_mu();       // {-2: 1/4, 0: 1/2, +2: 1/4}

// collision functional V(f; r) = sum_{s<r} f(diff_s) sampled per replica
struct CollisionRecord {
  std::vector<double> checkpoints;  // V at requested times
  IVec terminal_diff = izero();
};

struct EstimatorOptions {
  std::uint64_t replicas = 2000;
  std::uint64_t seed = 1;
};

// d=2 Erdos-Taylor: (log N)^{-1} sum_{r<=N} f(diff); KS against the
// exponential law with rate 2/pi_f and mean comparison against pi_f/2
struct ErdosTaylorReport {
  TestReport mean_check;
  TestReport ks;
  double tail_sum_median = 0;  // sum over [N eps, N t], must degenerate to 0
};
ErdosTaylorReport erdos_taylor_test(const SRIChainHandle& chain,
                                    const SiteMap<double>& f, long long N,
                                    const IVec& start_sep, double pi_f,
                                    const EstimatorOptions& opt);

// d>=3 total collision count vs Geometric(1 - q_return)
struct GeometricReport {
  TestReport chi2;
  TestReport mean_check;
  double truncation_tail = 0;
};
GeometricReport total_collision_test_d3(const SRIChainHandle& chain, long long horizon,
                                        double q_return, const EstimatorOptions& opt);

// d=1 local time: N^{-1/2} sum_{r<=Nt} f(diff) against pi_f * c1 * int G(2s,0)
struct LocalTimeReport {
  std::vector<double> t_grid;
  std::vector<EstimateWithCI> means;
  std::vector<double> targets;
  SlopeFit sqrt_t_slope;  // log mean vs log t, expect 1/2
};
LocalTimeReport local_time_test_d1(const SRIChainHandle& chain, const SiteMap<double>& f,
                                   long long N, const std::vector<double>& t_grid,
                                   double pi_f, double c1, const EstimatorOptions& opt);

// invariance principle: covariance of N^{-1/2}(R_{Nt} - drift Nt) vs t Id in
// macroscopic coordinates, plus cross-covariance of distant walkers
struct InvarianceReport {
  double max_cov_dev_sigmas = 0;  // worst |empirical - target| / stderr
  double cross_cov_sigmas = 0;
  double moment_ratio = 0;  // sup_r E|X|^4 / r^2 (diffusive bound)
  bool pass = false;
};
InvarianceReport invariance_principle_test(const SRIChainHandle& chain, long long N,
                                           const IVec& start_sep,
                                           const EstimatorOptions& opt);

// anti-concentration: r^{d/2} max_y P(|diff_r - y| <= 1) across an r-grid
struct AntiConcentrationReport {
  std::vector<long long> r_grid;
  std::vector<double> plateau;  // r^{d/2} * max-hit frequency
  TestReport trend;             // Mann-Kendall, upward trend must be absent
  bool pass = false;
};
AntiConcentrationReport anti_concentration_scan(const SRIChainHandle& chain,
                                                const std::vector<long long>& r_grid,
                                                const EstimatorOptions& opt);

// expectation limit: N^{(d-2)/2} sum_r E[phi(N^{-1/2}(R^1 - drift r)) f(diff)]
EstimateWithCI expectation_limit_statistic(const SRIChainHandle& chain,
                                           const SiteMap<double>& f,
                                           const TestFunction& phi, double t, long long N,
                                           const IVec& a1, const IVec& a2,
                                           const EstimatorOptions& opt);
// (log N)^{-1} normalized variant for bounded separation in d=2
EstimateWithCI expectation_limit_log_statistic(const SRIChainHandle& chain,
                                               const SiteMap<double>& f, long long N,
                                               const IVec& start_sep,
                                               const EstimatorOptions& opt);

// backward propagation: second moment of the normalized discrepancy sum
struct BackpropReport {
  std::vector<long long> n_grid;
  std::vector<double> second_moments;
  std::vector<double> stderrors;
  bool decreasing = false;
};
BackpropReport backward_propagation_test(const SRIChainHandle& chain,
                                         const SiteMap<double>& f,
                                         const TestFunction& phi,
                                         const std::vector<long long>& n_grid, double t,
                                         const IVec& start_sep,
                                         const EstimatorOptions& opt);

// generic distribution checks of a sample set
struct StatsSuiteReport {
  EstimateWithCI mean;
  TestReport ks_exp;
  TestReport chi2_geom;
  TestReport normality;
};
StatsSuiteReport stats_suite(const std::vector<double>& samples, double exp_rate = -1,
                             const std::vector<std::uint64_t>& counts = {},
                             double geom_q = 0);

}  // namespace rwre
