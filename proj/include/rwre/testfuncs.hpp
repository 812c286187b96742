// Test-function catalog with closed-form derivatives and Gaussian algebra:
// products over axes of (polynomial) x exp(-(z-c)^2 / 2w^2), plus the
// constant function.  Everything the quadrature module integrates reduces to
// one-dimensional Gaussian-polynomial factors.
#pragma once

#include <string>
#include <vector>

#include "rwre/lattice.hpp"

namespace rwre {

// p((z-c)) * exp(-a (z-c)^2 / 2), polynomial in the local frame u = z-c
struct GaussPoly1D {
  std::vector<double> coef{1.0};  // coef[k] * u^k
  double a = 0.0;                 // inverse variance of the envelope (0 = none)
  double c = 0.0;

  double eval(double z) const;
  GaussPoly1D derivative() const;
  // convolution with the centered Gaussian of variance tau
  GaussPoly1D convolve_gaussian(double tau) const;
  // pointwise product
  GaussPoly1D times(const GaussPoly1D& other) const;
  // integral over the line (requires a > 0 or polynomial == constant 0)
  double integral() const;
  // expectation against a Gaussian density N(mean, var)
  double gauss_expect(double mean, double var) const;
};

// moments of N(m, v): E[U^k] (k small)
double gaussian_moment(int k, double m, double v);

struct TestFunction {
  enum class Kind { One, GaussHermite };
  Kind kind = Kind::One;
  int d = 1;
  DVec center = dzero();
  DVec width = {1.0, 1.0, 1.0};
  MIdx hermite = {0, 0, 0};  // per-axis probabilists' Hermite index

  static TestFunction one(int d);
  static TestFunction gaussian_bump(int d, const DVec& center, const DVec& width,
                                    const MIdx& hermite = {0, 0, 0});

  double value(const DVec& x) const;
  // partial derivative of multi-index r
  double derivative(const MIdx& r, const DVec& x) const;
  bool is_one() const { return kind == Kind::One; }
  // per-axis Gaussian-polynomial factor (kind must be GaussHermite)
  GaussPoly1D axis_factor(int axis) const;
  std::string name() const;
};

// probabilists' Hermite polynomial coefficients He_n
std::vector<double> hermite_coefficients(int n);

}  // namespace rwre
