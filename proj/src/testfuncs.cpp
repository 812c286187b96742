#include "rwre/testfuncs.hpp"

#include <cmath>
#include <stdexcept>

namespace rwre {

namespace {

std::vector<double> poly_shift(const std::vector<double>& p, double h) {
  // q(u) = p(u + h)
  std::vector<double> q(p.size(), 0.0);
  for (std::size_t k = 0; k < p.size(); ++k) {
    // expand (u+h)^k
    double binom = 1;
    double hp = 1;
    for (std::size_t j = 0; j <= k; ++j) {
      // coefficient of u^{k-j}: C(k,j) h^j
      q[k - j] += p[k] * binom * hp;
      binom = binom * (double)(k - j) / (double)(j + 1);
      hp *= h;
    }
  }
  return q;
}

std::vector<double> poly_mul(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> c(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) c[i + j] += a[i] * b[j];
  return c;
}

}  // namespace

double gaussian_moment(int k, double m, double v) {
  // recursion M_k = m M_{k-1} + (k-1) v M_{k-2}
  if (k == 0) return 1.0;
  if (k == 1) return m;
  double m0 = 1.0, m1 = m;
  for (int i = 2; i <= k; ++i) {
    double m2 = m * m1 + (i - 1) * v * m0;
    m0 = m1;
    m1 = m2;
  }
  return m1;
}

double GaussPoly1D::eval(double z) const {
  double u = z - c;
  double p = 0, up = 1;
  for (double co : coef) {
    p += co * up;
    up *= u;
  }
  return p * std::exp(-0.5 * a * u * u);
}

GaussPoly1D GaussPoly1D::derivative() const {
  GaussPoly1D out;
  out.a = a;
  out.c = c;
  out.coef.assign(coef.size() + 1, 0.0);
  for (std::size_t k = 1; k < coef.size(); ++k) out.coef[k - 1] += k * coef[k];
  for (std::size_t k = 0; k < coef.size(); ++k) out.coef[k + 1] -= a * coef[k];
  while (out.coef.size() > 1 && out.coef.back() == 0.0) out.coef.pop_back();
  return out;
}

GaussPoly1D GaussPoly1D::convolve_gaussian(double tau) const {
  if (tau <= 0) return *this;
  if (a == 0.0) {
    if (coef.size() == 1) return *this;  // constants are heat-invariant
    // pure polynomial: E[p(z - c + W)], W ~ N(0, tau): still polynomial
    GaussPoly1D out;
    out.a = 0;
    out.c = c;
    out.coef.assign(coef.size(), 0.0);
    // E[(u + W)^k] = sum_j C(k,j) u^{k-j} E[W^j]
    for (std::size_t k = 0; k < coef.size(); ++k) {
      double binom = 1;
      for (std::size_t j = 0; j <= k; ++j) {
        out.coef[k - j] += coef[k] * binom * gaussian_moment((int)j, 0.0, tau);
        binom = binom * (double)(k - j) / (double)(j + 1);
      }
    }
    return out;
  }
  // (g * G_tau)(z) = (1+a tau)^{-1/2} e^{-a'(z-c)^2/2} E[p(U)],
  // U ~ N(w/(1+a tau), tau/(1+a tau)), w = z-c, a' = a/(1+a tau)
  double den = 1.0 + a * tau;
  double ap = a / den;
  double s2 = tau / den;
  GaussPoly1D out;
  out.a = ap;
  out.c = c;
  // E[p(U)] is a polynomial in w through m(w) = w/den: build via moment
  // recursion with symbolic mean: M_k(w) polynomial in w
  std::size_t deg = coef.size();
  std::vector<std::vector<double>> M(deg);  // M[k] has degree k in w
  if (deg > 0) M[0] = {1.0};
  if (deg > 1) M[1] = {0.0, 1.0 / den};
  for (std::size_t k = 2; k < deg; ++k) {
    // M_k = (w/den) M_{k-1} + (k-1) s2 M_{k-2}
    M[k].assign(k + 1, 0.0);
    for (std::size_t j = 0; j < M[k - 1].size(); ++j) M[k][j + 1] += M[k - 1][j] / den;
    for (std::size_t j = 0; j < M[k - 2].size(); ++j) M[k][j] += (k - 1) * s2 * M[k - 2][j];
  }
  out.coef.assign(deg, 0.0);
  for (std::size_t k = 0; k < deg; ++k)
    for (std::size_t j = 0; j < M[k].size(); ++j) out.coef[j] += coef[k] * M[k][j];
  double norm = 1.0 / std::sqrt(den);
  for (auto& co : out.coef) co *= norm;
  return out;
}

GaussPoly1D GaussPoly1D::times(const GaussPoly1D& other) const {
  GaussPoly1D out;
  out.a = a + other.a;
  if (out.a == 0.0) {
    out.c = c;
    out.coef = poly_mul(coef, poly_shift(other.coef, c - other.c));
    return out;
  }
  // combined center and cross term
  double cc = (a * c + other.a * other.c) / out.a;
  double cross = std::exp(-0.5 * a * other.a / out.a * (c - other.c) * (c - other.c));
  out.c = cc;
  std::vector<double> p1 = poly_shift(coef, cc - c);
  std::vector<double> p2 = poly_shift(other.coef, cc - other.c);
  out.coef = poly_mul(p1, p2);
  for (auto& co : out.coef) co *= cross;
  return out;
}

double GaussPoly1D::integral() const {
  if (a <= 0) {
    bool zero = true;
    for (double co : coef) zero = zero && co == 0.0;
    if (zero) return 0.0;
    throw std::runtime_error("GaussPoly1D::integral: no Gaussian envelope");
  }
  double v = 1.0 / a;
  double s = 0;
  for (std::size_t k = 0; k < coef.size(); ++k)
    s += coef[k] * gaussian_moment((int)k, 0.0, v);
  return s * std::sqrt(2.0 * M_PI * v);
}

double GaussPoly1D::gauss_expect(double mean, double var) const {
  // int g(z) N(z; mean, var) dz
  GaussPoly1D density;
  density.a = 1.0 / var;
  density.c = mean;
  density.coef = {1.0 / std::sqrt(2.0 * M_PI * var)};
  return times(density).integral();
}

std::vector<double> hermite_coefficients(int n) {
  // He_0 = 1, He_1 = u, He_{n+1} = u He_n - n He_{n-1}
  std::vector<double> h0{1.0}, h1{0.0, 1.0};
  if (n == 0) return h0;
  if (n == 1) return h1;
  for (int k = 1; k < n; ++k) {
    std::vector<double> h2(h1.size() + 1, 0.0);
    for (std::size_t j = 0; j < h1.size(); ++j) h2[j + 1] += h1[j];
    for (std::size_t j = 0; j < h0.size(); ++j) h2[j] -= k * h0[j];
    h0 = h1;
    h1 = h2;
  }
  return h1;
}

TestFunction TestFunction::one(int d) {
  TestFunction f;
  f.kind = Kind::One;
  f.d = d;
  return f;
}

TestFunction TestFunction::gaussian_bump(int d, const DVec& center, const DVec& width,
                                         const MIdx& hermite) {
  TestFunction f;
  f.kind = Kind::GaussHermite;
  f.d = d;
  f.center = center;
  f.width = width;
  f.hermite = hermite;
  return f;
}

GaussPoly1D TestFunction::axis_factor(int axis) const {
  if (kind == Kind::One) {
    GaussPoly1D g;
    g.coef = {1.0};
    g.a = 0;
    return g;
  }
  GaussPoly1D g;
  g.c = center[axis];
  g.a = 1.0 / (width[axis] * width[axis]);
  // He_n(u / w) as polynomial in u
  std::vector<double> he = hermite_coefficients(hermite[axis]);
  g.coef.assign(he.size(), 0.0);
  double wp = 1;
  for (std::size_t k = 0; k < he.size(); ++k) {
    g.coef[k] = he[k] / wp;
    wp *= width[axis];
  }
  return g;
}

double TestFunction::value(const DVec& x) const {
  if (kind == Kind::One) return 1.0;
  double v = 1;
  for (int i = 0; i < d; ++i) v *= axis_factor(i).eval(x[i]);
  return v;
}

double TestFunction::derivative(const MIdx& r, const DVec& x) const {
  if (kind == Kind::One) return midx_degree(r) == 0 ? 1.0 : 0.0;
  double v = 1;
  for (int i = 0; i < d; ++i) {
    GaussPoly1D g = axis_factor(i);
    for (int k = 0; k < r[i]; ++k) g = g.derivative();
    v *= g.eval(x[i]);
  }
  return v;
}

std::string TestFunction::name() const {
  if (kind == Kind::One) return "one";
  std::string s = "gauss";
  for (int i = 0; i < d; ++i)
    s += "_w" + std::to_string(width[i]) + "h" + std::to_string(hermite[i]);
  return s;
}

}  // namespace rwre
