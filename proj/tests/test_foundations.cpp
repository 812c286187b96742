#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rwre/green.hpp"
#include "rwre/rng.hpp"
#include "rwre/stats.hpp"
#include "rwre/testfuncs.hpp"

using namespace rwre;

TEST_CASE("pmf convolution and difference law") {
  OffsetPmf pm1;
  pm1.support = {IVec{-1, 0, 0}, IVec{1, 0, 0}};
  pm1.prob = {0.5, 0.5};
  OffsetPmf two = convolve(pm1, pm1);
  CHECK(two.size() == 3);
  CHECK(two.at(IVec{0, 0, 0}) == doctest::Approx(0.5));
  CHECK(two.at(IVec{2, 0, 0}) == doctest::Approx(0.25));
  OffsetPmf d = difference_law(two, two);
  CHECK(d.total_mass() == doctest::Approx(1.0));
  CHECK(d.at(IVec{0, 0, 0}) == doctest::Approx(0.375));
}

TEST_CASE("lattice basis and membership") {
  // checkerboard lattice in d=2
  std::vector<IVec> gens = {IVec{1, 1, 0}, IVec{1, -1, 0}, IVec{2, 0, 0}};
  LatticeBasis L = lattice_basis_from(gens, 2);
  CHECK(L.rank == 2);
  CHECK(L.covolume == 2);
  CHECK(lattice_contains(L, IVec{3, 1, 0}));
  CHECK(!lattice_contains(L, IVec{1, 0, 0}));

  LatticeBasis Z2 = lattice_basis_from({IVec{1, 0, 0}, IVec{0, 1, 0}}, 2);
  CHECK(!same_sublattice(L, Z2));
  LatticeBasis L2 = lattice_basis_from({IVec{1, 1, 0}, IVec{0, 2, 0}}, 2);
  CHECK(same_sublattice(L, L2));
}

TEST_CASE("stream determinism and independence of derivation order") {
  Rng a = make_stream(42, {1, 2, 3});
  Rng b = make_stream(42, {1, 2, 3});
  for (int i = 0; i < 10; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c = make_stream(42, {1, 2, 4});
  bool differ = false;
  Rng a2 = make_stream(42, {1, 2, 3});
  for (int i = 0; i < 10; ++i) differ = differ || a2.next_u64() != c.next_u64();
  CHECK(differ);
}

TEST_CASE("rng moments") {
  Rng rng(7);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("ks calibration on exact exponential samples") {
  Rng rng(11);
  std::vector<double> xs(5000);
  for (auto& x : xs) x = -std::log(1.0 - rng.uniform());
  TestReport r = ks_exponential(xs, 1.0);
  CHECK(r.p_value > 0.01);
  // mixed law rejects
  for (std::size_t i = 0; i < xs.size() / 2; ++i) xs[i] *= 3.0;
  TestReport r2 = ks_exponential(xs, -1.0);
  CHECK(r2.p_value < 0.01);
}

TEST_CASE("chi2 geometric calibration") {
  Rng rng(13);
  double q = 0.4;  // success prob
  std::vector<std::uint64_t> counts(8000);
  for (auto& c : counts) {
    std::uint64_t k = 1;
    while (rng.uniform() > q) ++k;
    c = k;
  }
  TestReport r = chi2_geometric(counts, q);
  CHECK(r.p_value > 0.01);
  TestReport bad = chi2_geometric(counts, 0.55);
  CHECK(bad.p_value < 0.01);
}

TEST_CASE("mann-kendall and slope fit") {
  std::vector<double> inc = {1, 2, 3, 4, 5, 6, 7};
  TestReport t = mann_kendall(inc);
  CHECK(t.statistic > 0);
  CHECK(t.p_value < 0.05);
  std::vector<double> x = {0, 1, 2, 3}, y = {1, 3, 5, 7};
  SlopeFit f = fit_slope(x, y);
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
}

TEST_CASE("gauss-poly algebra") {
  // integral of exp(-x^2/2) = sqrt(2 pi)
  GaussPoly1D g;
  g.a = 1.0;
  g.coef = {1.0};
  CHECK(g.integral() == doctest::Approx(std::sqrt(2.0 * M_PI)));

  // derivative of the Gaussian matches finite differences
  GaussPoly1D d = g.derivative();
  double h = 1e-6, x = 0.7;
  CHECK(d.eval(x) == doctest::Approx((g.eval(x + h) - g.eval(x - h)) / (2 * h)).epsilon(1e-5));

  // heat semigroup: convolving twice equals one longer convolution
  GaussPoly1D c1 = g.convolve_gaussian(0.3).convolve_gaussian(0.5);
  GaussPoly1D c2 = g.convolve_gaussian(0.8);
  for (double z : {-1.0, 0.0, 0.4, 2.0})
    CHECK(c1.eval(z) == doctest::Approx(c2.eval(z)).epsilon(1e-12));

  // product against a shifted Gaussian then integral = Gaussian convolution value
  GaussPoly1D dens;
  dens.a = 2.0;
  dens.c = 0.5;
  dens.coef = {1.0};
  double direct = g.times(dens).integral();
  // int e^{-x^2/2} e^{-(x-1/2)^2} dx, known closed form
  double expect = std::sqrt(2.0 * M_PI / 3.0) * std::exp(-(2.0 / 3.0) * 0.25 / 2.0);
  CHECK(direct == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("test function derivatives vs finite differences") {
  TestFunction f = TestFunction::gaussian_bump(2, DVec{0.2, -0.3, 0}, DVec{1.3, 0.8, 1},
                                               MIdx{1, 2, 0});
  DVec x{0.5, 0.1, 0};
  double h = 1e-5;
  for (int axis = 0; axis < 2; ++axis) {
    MIdx r{0, 0, 0};
    r[axis] = 1;
    DVec xp = x, xm = x;
    xp[axis] += h;
    xm[axis] -= h;
    double fd = (f.value(xp) - f.value(xm)) / (2 * h);
    CHECK(f.derivative(r, x) == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("green table matches the classical d3 return probability") {
  // difference of two independent simple walks on Z^3 revisits the origin
  // with the classical Watson probability ~ 0.340537
  OffsetPmf mu;
  for (int i = 0; i < 3; ++i) {
    IVec e = izero();
    e[i] = 1;
    mu.support.push_back(e);
    e[i] = -1;
    mu.support.push_back(e);
  }
  mu.prob.assign(6, 1.0 / 6.0);
  OffsetPmf diff = difference_law(mu, mu);
  LatticeBasis L = lattice_basis_from(diff.support, 3);
  BasisMap bm = make_basis_map(L);
  OffsetPmf step = bm.map_pmf(diff);
  double q = rw_return_probability(step, 3);
  CHECK(q == doctest::Approx(0.340537).epsilon(2e-3));
}
