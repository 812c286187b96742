// Scaling schedule: location-strength sequences, derived constants, and the
// deterministic rescaling prefactor.
#pragma once

#include "rwre/env_models.hpp"
#include "rwre/quadrature.hpp"

namespace rwre {

struct ScalingParams {
  long long N = 1;
  int p = 1;
  int d = 1;
  Regime regime = Regime::A;
  DVec v_macro = dzero();        // direction/strength parameter of the regime
  DVec varsigma_macro = dzero(); // macroscopic tilt vs_N
  DVec varsigma = dzero();       // lattice-dual tilt (Sigma^{-1/2} v)
  DVec d_N = dzero();            // location vector, lattice units
  double psi_N = 0;
  double omega_N = 0;
  double B_N = 0;        // scaling constant for the regime's branch
  double B_N_other = 0;  // the other branch, logged near the crossover
  double logM = 0;
  double log_nu_tilt = 0;  // log int e^{vs.a} nu(da), set by the initial profile
};

double psi_table(int p, int d, long long N);
double omega_table(int p, int d, long long N);

ScalingParams scaling_schedule(const StepDistribution& mu, int p, Regime regime,
                               long long N, const DVec& v_macro);

// log C_{N,t,x,nu} in the official macroscopic form (t in N^{-1} Z, x macro)
double rescale_constant_log(const ScalingParams& sp, double t, const DVec& x_macro);
// exact per-path form: log C along a walker at integer site z, time r
double rescale_constant_log_path(const ScalingParams& sp, long long r, const IVec& z);

// initial profiles on the walker lattice
struct InitialProfile {
  OffsetPmf nu;            // lattice pmf
  bool dirac = true;
  double macro_width = 1;  // for the Gaussian profile
  double log_nu_tilt = 0;  // log int e^{vs.a} nu(da) under the schedule tilt
};

InitialProfile dirac_profile();
// lattice-discretized Gaussian of macroscopic width w (mass 1)
InitialProfile gaussian_profile(const StepDistribution& mu, long long N, double width,
                                double cutoff_sigmas = 7.0);

// goodness diagnostic of Def.-style smoothed pairings: returns the fitted
// constant sup_a (m_N, G_t(a-.)) * t^{1-eps} over a t-grid
struct GoodnessReport {
  double fitted_c = 0;
  double eps_ic = 0;
  bool pass = false;
};
GoodnessReport goodness_check(const StepDistribution& mu, const ScalingParams& sp,
                              const InitialProfile& nu, double eps_ic);

}  // namespace rwre
