#include "rwre/quadrature.hpp"

#include <cmath>
#include <stdexcept>

namespace rwre {

double HeatKernelSpec::value(double t, const DVec& x) const {
  double v = 1;
  for (int i = 0; i < d; ++i) {
    double s2 = t * h_diag[i];
    v *= std::exp(-x[i] * x[i] / (2.0 * s2)) / std::sqrt(2.0 * M_PI * s2);
  }
  return v;
}

double c_d_stated(int d) {
  if (d == 1) return 1.0;
  if (d == 2) return 2.0 * M_PI;
  return d * (d - 2.0) / std::tgamma(1.0 + 0.5 * d);
}

double c_d_fitted(int d) {
  // the constant appearing in sum_{m>M} P^m ~ c int G(2s, .): equals the
  // distributional Laplacian mass of the potential u, i.e. 2, 2pi, and
  // (d-2) |S^{d-1}| respectively
  if (d == 1) return 2.0;
  if (d == 2) return 2.0 * M_PI;
  return (d - 2.0) * 2.0 * std::pow(M_PI, 0.5 * d) / std::tgamma(0.5 * d);
}

namespace {

double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double fa, double fm, double fb, double tol, int depth,
                        double& err) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    err += std::abs(delta) / 15.0;
    return left + right + delta / 15.0;
  }
  return adaptive_simpson(f, a, m, fa, flm, fm, 0.5 * tol, depth - 1, err) +
         adaptive_simpson(f, m, b, fm, frm, fb, 0.5 * tol, depth - 1, err);
}

}  // namespace

double integrate_time_singular(const std::function<double(double)>& f, double T,
                               double tol, double* err_out) {
  if (T <= 0) {
    if (err_out) *err_out = 0;
    return 0;
  }
  // s = u^2 tames the s^{-d/2} endpoint singularity for d <= 3
  auto g = [&](double u) { return 2.0 * u * f(u * u); };
  double b = std::sqrt(T);
  double err = 0;
  double fa = g(1e-300), fm = g(0.5 * b), fb = g(b);
  double val = adaptive_simpson(g, 0.0, b, fa, fm, fb, tol, 28, err);
  if (err_out) *err_out = err;
  return val;
}

LimitIntegral qvf_limit_integral(double t, const TestFunction& phi, const DVec& a1,
                                 const DVec& a2, int d, const HeatKernelSpec& H,
                                 double tol) {
  DVec sep = dsub(a1, a2);
  bool together = dnorm2(sep) == 0.0;
  if (d >= 2 && together)
    throw std::invalid_argument("qvf_limit_integral: starts must be separated in d >= 2");
  std::vector<GaussPoly1D> axes;
  if (!phi.is_one())
    for (int i = 0; i < d; ++i) axes.push_back(phi.axis_factor(i));

  auto integrand = [&](double s) {
    double v = H.value(2.0 * s, sep);
    if (!phi.is_one())
      for (int i = 0; i < d; ++i)
        v *= axes[i].gauss_expect(0.5 * (a1[i] + a2[i]), 0.5 * s * H.h_diag[i]);
    return v;
  };
  LimitIntegral out;
  out.tag = "qvf_limit";
  out.value = integrate_time_singular(integrand, t, tol, &out.abs_error);
  return out;
}

EstimateWithCI qvf_limit_integral_mc(double t, const TestFunction& phi, const DVec& a1,
                                     const DVec& a2, int d, const HeatKernelSpec& H,
                                     std::uint64_t points, std::uint64_t seed) {
  DVec sep = dsub(a1, a2);
  Rng rng(seed);
  double sum = 0, sumsq = 0;
  for (std::uint64_t i = 0; i < points; ++i) {
    double s = t * rng.uniform();
    DVec y = dzero();
    for (int k = 0; k < d; ++k) y[k] = rng.normal() * std::sqrt(2.0 * s * H.h_diag[k]);
    DVec arg = dscale(dadd(y, dadd(a1, a2)), 0.5);
    double v = t * H.value(2.0 * s, sep) * phi.value(arg);
    sum += v;
    sumsq += v * v;
  }
  EstimateWithCI e;
  e.replicas = points;
  e.seed = seed;
  e.value = sum / points;
  e.stderror = std::sqrt(std::max(0.0, sumsq / points - e.value * e.value) / points);
  return e;
}

LimitIntegral general_ic_limit(double t, const TestFunction& phi,
                               const InitialProfileSpec& h0, int d,
                               const HeatKernelSpec& H, double tol) {
  if (h0.dirac && d >= 2)
    throw std::invalid_argument(
        "general_ic_limit: Dirac initial profile is not a good sequence in d >= 2");
  std::vector<GaussPoly1D> axes;
  if (!phi.is_one())
    for (int i = 0; i < d; ++i) axes.push_back(phi.axis_factor(i));

  auto integrand = [&](double s) {
    double v = 1;
    for (int i = 0; i < d; ++i) {
      double var = s * H.h_diag[i] + (h0.dirac ? 0.0 : h0.width * h0.width);
      double sigma = std::sqrt(var);
      // int N(a;0,var)^2 g(a) da = (2 sqrt(pi) sigma)^{-1} E[g(U)], U~N(0,var/2)
      double factor = 1.0 / (2.0 * std::sqrt(M_PI) * sigma);
      if (!phi.is_one()) factor *= axes[i].gauss_expect(0.0, 0.5 * var);
      v *= factor;
    }
    return v;
  };
  LimitIntegral out;
  out.tag = "general_ic";
  out.value = integrate_time_singular(integrand, t, tol, &out.abs_error);
  return out;
}

double regime_coefficient(Regime regime, double gamma_ext_sq, double theta_over_pi,
                          int d) {
  switch (regime) {
    case Regime::A:
    case Regime::B:
      return 1.0;
    case Regime::C: {
      if (d != 2) throw std::invalid_argument("regime C requires d = 2");
      if (gamma_ext_sq >= 2.0)
        throw std::domain_error("regime C: at or beyond the critical coefficient (gamma^2 >= 2)");
      return 1.0 / (1.0 - 0.5 * gamma_ext_sq);
    }
    case Regime::D: {
      if (d < 3) throw std::invalid_argument("regime D requires d >= 3");
      return theta_over_pi;
    }
  }
  return 1.0;
}

namespace {

// one axis of int (d^{r1} psi)(d^{r2} psi)(x) N(x;0,var)^2 dx with
// psi = phi_axis * G_{tau h}
double axis_pair_integral(const GaussPoly1D& phi_axis, int r1, int r2, double tau_h,
                          double var) {
  GaussPoly1D psi = phi_axis.convolve_gaussian(tau_h);
  GaussPoly1D d1 = psi, d2 = psi;
  for (int k = 0; k < r1; ++k) d1 = d1.derivative();
  for (int k = 0; k < r2; ++k) d2 = d2.derivative();
  GaussPoly1D dens;  // N(x;0,var)^2
  dens.a = 2.0 / var;
  dens.c = 0.0;
  dens.coef = {1.0 / (2.0 * M_PI * var)};
  return d1.times(d2).times(dens).integral();
}

double one_axis_density_sq_mass(double var) { return 1.0 / (2.0 * std::sqrt(M_PI * var)); }

}  // namespace

LimitIntegral limiting_field_variance_extremal(double t, const TestFunction& phi,
                                               const InitialProfileSpec& h0, int d,
                                               const HeatKernelSpec& H,
                                               double gamma_ext_sq, double regime_coef,
                                               double c_d, double tol) {
  if (h0.dirac && d >= 2)
    throw std::invalid_argument("limiting_field_variance: Dirac profile needs d = 1");
  std::vector<GaussPoly1D> axes;
  if (!phi.is_one())
    for (int i = 0; i < d; ++i) axes.push_back(phi.axis_factor(i));

  auto integrand = [&](double s) {
    double v = 1;
    for (int i = 0; i < d; ++i) {
      double var = s * H.h_diag[i] + (h0.dirac ? 0.0 : h0.width * h0.width);
      if (phi.is_one())
        v *= one_axis_density_sq_mass(var);
      else
        v *= axis_pair_integral(axes[i], 0, 0, (t - s) * H.h_diag[i], var);
    }
    return v;
  };
  LimitIntegral out;
  out.tag = "field_variance_extremal";
  out.value = gamma_ext_sq * regime_coef * c_d *
              integrate_time_singular(integrand, t, tol, &out.abs_error);
  out.abs_error *= gamma_ext_sq * regime_coef * c_d;
  return out;
}

LimitIntegral limiting_field_variance_bulk(double t, const TestFunction& phi,
                                           const InitialProfileSpec& h0, int d,
                                           const HeatKernelSpec& H,
                                           const BulkContraction& ap, double c_d,
                                           double tol) {
  if (h0.dirac && d >= 2)
    throw std::invalid_argument("limiting_field_variance: Dirac profile needs d = 1");
  if (phi.is_one())
    throw std::invalid_argument("bulk variance requires a decaying test function");
  std::vector<GaussPoly1D> axes;
  for (int i = 0; i < d; ++i) axes.push_back(phi.axis_factor(i));

  auto integrand = [&](double s) {
    double total = 0;
    for (std::size_t k = 0; k < ap.indices.size(); ++k) {
      const MIdx& r1 = ap.indices[k].first;
      const MIdx& r2 = ap.indices[k].second;
      double term = ap.ap[k] / (midx_factorial(r1) * midx_factorial(r2));
      for (int i = 0; i < d; ++i) {
        double var = s * H.h_diag[i] + (h0.dirac ? 0.0 : h0.width * h0.width);
        term *= axis_pair_integral(axes[i], r1[i], r2[i], (t - s) * H.h_diag[i], var);
      }
      total += term;
    }
    return total;
  };
  LimitIntegral out;
  out.tag = "field_variance_bulk";
  out.value = c_d * integrate_time_singular(integrand, t, tol, &out.abs_error);
  out.abs_error *= c_d;
  return out;
}

LimitIntegral limiting_field_variance_bulk_divergence(double t, const TestFunction& phi,
                                                      const InitialProfileSpec& h0, int d,
                                                      const HeatKernelSpec& H,
                                                      const Eigen::Matrix3d& gamma_bulk_sq,
                                                      double c_d, double tol) {
  // |Gamma grad psi|^2 route with Gamma = sqrt(Gamma^2); expands into the
  // same axis-separable pair integrals
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(gamma_bulk_sq);
  if (es.eigenvalues().minCoeff() < -1e-10)
    throw std::runtime_error("gamma_bulk_sq is not positive semidefinite");
  Eigen::Vector3d ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  Eigen::Matrix3d gamma = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();

  std::vector<GaussPoly1D> axes;
  for (int i = 0; i < d; ++i) axes.push_back(phi.axis_factor(i));

  auto integrand = [&](double s) {
    double total = 0;
    for (int k = 0; k < d; ++k) {
      // (sum_i Gamma_ki d_i psi)^2 = sum_{i,j} Gamma_ki Gamma_kj d_i psi d_j psi
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          double coef = gamma(k, i) * gamma(k, j);
          if (coef == 0) continue;
          double term = coef;
          for (int ax = 0; ax < d; ++ax) {
            double var = s * H.h_diag[ax] + (h0.dirac ? 0.0 : h0.width * h0.width);
            int r1 = ax == i ? 1 : 0, r2 = ax == j ? 1 : 0;
            term *= axis_pair_integral(axes[ax], r1, r2, (t - s) * H.h_diag[ax], var);
          }
          total += term;
        }
    }
    return total;
  };
  LimitIntegral out;
  out.tag = "field_variance_bulk_divergence";
  out.value = c_d * integrate_time_singular(integrand, t, tol, &out.abs_error);
  out.abs_error *= c_d;
  return out;
}

}  // namespace rwre
