// Independent numerical evaluation of the limiting formulas: heat kernels,
// QVF limit integrals, Duhamel variances, regime coefficients.
#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>

#include "rwre/rng.hpp"
#include "rwre/stats.hpp"
#include "rwre/testfuncs.hpp"

namespace rwre {

// anisotropic heat kernel for (1/2) div(H grad); H diagonal (axis-aligned)
struct HeatKernelSpec {
  int d = 1;
  DVec h_diag = {1.0, 1.0, 1.0};

  double value(double t, const DVec& x) const;
  static HeatKernelSpec standard(int d) {
    HeatKernelSpec k;
    k.d = d;
    return k;
  }
};

// dimension constants of the limit formulas: the stated values and the
// convention fitted from the classical local-time oracles (they differ in
// d = 1 and d >= 3; see the decisions log of the repo author)
double c_d_stated(int d);
double c_d_fitted(int d);

struct LimitIntegral {
  double value = 0.0;
  double abs_error = 0.0;
  std::string tag;
};

// macroscopic initial profile: Dirac (d=1 only in limit formulas) or a
// centered Gaussian of width w
struct InitialProfileSpec {
  bool dirac = false;
  double width = 1.0;
};

// int_0^t int G^(v)(2s, a1-a2) G^(v)(2s, y) phi((y+a1+a2)/2) dy ds
LimitIntegral qvf_limit_integral(double t, const TestFunction& phi, const DVec& a1,
                                 const DVec& a2, int d, const HeatKernelSpec& H,
                                 double tol = 1e-9);
// Monte Carlo cross-check of the same integral
EstimateWithCI qvf_limit_integral_mc(double t, const TestFunction& phi, const DVec& a1,
                                     const DVec& a2, int d, const HeatKernelSpec& H,
                                     std::uint64_t points, std::uint64_t seed);

// int_0^t int (G_s^(v) * h0)^2(a) phi(a) da ds
LimitIntegral general_ic_limit(double t, const TestFunction& phi,
                               const InitialProfileSpec& h0, int d,
                               const HeatKernelSpec& H, double tol = 1e-9);

enum class Regime { A, B, C, D };

// extra noise factor per regime: B -> 1, C -> 1/(1 - gamma^2/2), D -> pass
// through Theta_eff / pi(f)
double regime_coefficient(Regime regime, double gamma_ext_sq, double theta_over_pi,
                          int d);

// Duhamel variance of the limiting field paired with phi.
// extremal: coef * int (G_{t-s}*phi)^2 (G_s*h0)^2; bulk: the A_p-contracted
// derivative form (ap table over multi-index pairs with 1/(r1! r2!) weights).
struct BulkContraction {
  std::vector<std::pair<MIdx, MIdx>> indices;
  std::vector<double> ap;
};
LimitIntegral limiting_field_variance_extremal(double t, const TestFunction& phi,
                                               const InitialProfileSpec& h0, int d,
                                               const HeatKernelSpec& H,
                                               double gamma_ext_sq, double regime_coef,
                                               double c_d, double tol = 1e-9);
LimitIntegral limiting_field_variance_bulk(double t, const TestFunction& phi,
                                           const InitialProfileSpec& h0, int d,
                                           const HeatKernelSpec& H,
                                           const BulkContraction& ap, double c_d,
                                           double tol = 1e-9);
// p = 1 cross-check route: |Gamma grad(G_{t-s} * phi)|^2 divergence form
LimitIntegral limiting_field_variance_bulk_divergence(double t, const TestFunction& phi,
                                                      const InitialProfileSpec& h0, int d,
                                                      const HeatKernelSpec& H,
                                                      const Eigen::Matrix3d& gamma_bulk_sq,
                                                      double c_d, double tol = 1e-9);

// adaptive Simpson on [0,T] with the s = u^2 endpoint substitution
double integrate_time_singular(const std::function<double(double)>& f, double T,
                               double tol, double* err_out = nullptr);

}  // namespace rwre
