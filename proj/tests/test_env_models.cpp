#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rwre/env_models.hpp"

using namespace rwre;

namespace {
EnvironmentSpec nn1d(int steps = 2) {
  EnvironmentSpec e;
  e.model = EnvironmentSpec::Model::NearestNeighborIID;
  e.d = 1;
  e.composite_steps = steps;
  e.weights.kind = WeightLaw::Kind::Uniform01;
  return e;
}
EnvironmentSpec lazy1d() {
  EnvironmentSpec e;
  e.model = EnvironmentSpec::Model::SymmetricLazy;
  e.d = 1;
  e.weights.kind = WeightLaw::Kind::Uniform01;
  return e;
}
EnvironmentSpec landscape1d(double amplitude = 1.0) {
  EnvironmentSpec e;
  e.model = EnvironmentSpec::Model::RandomLandscape;
  e.d = 1;
  e.weights.kind = WeightLaw::Kind::BoundedLogWeights;
  e.weights.amplitude = amplitude;
  e.landscape_support = {IVec{-1, 0, 0}, IVec{0, 0, 0}, IVec{1, 0, 0}};
  e.landscape_b = {1.0, 1.0, 1.0};
  return e;
}
}  // namespace

TEST_CASE("annealed composite step laws") {
  StepDistribution nn = build_step_distribution(nn1d());
  CHECK(nn.pmf.at(IVec{-2, 0, 0}) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(nn.pmf.at(IVec{0, 0, 0}) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(nn.pmf.at(IVec{2, 0, 0}) == doctest::Approx(0.25).epsilon(1e-12));

  StepDistribution lz = build_step_distribution(lazy1d());
  CHECK(lz.pmf.at(IVec{-1, 0, 0}) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(lz.pmf.at(IVec{0, 0, 0}) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(lz.pmf.at(IVec{1, 0, 0}) == doctest::Approx(0.25).epsilon(1e-12));

  // attached covariance equals the pmf's own covariance
  CHECK(nn.cov(0, 0) == doctest::Approx(nn.pmf.cov(0, 0)).epsilon(1e-12));
  // normalized coordinates have unit covariance
  double c = nn.cov(0, 0);
  CHECK(nn.norm(0, 0) == doctest::Approx(1.0 / std::sqrt(c)).epsilon(1e-12));
}

TEST_CASE("mgf oracle") {
  StepDistribution nn = build_step_distribution(nn1d());
  MgfOracle m = mgf_oracle(nn);
  CHECK(m.M(dzero()) == doctest::Approx(1.0).epsilon(1e-14));
  DVec g0 = m.grad_logM(dzero());
  CHECK(g0[0] == doctest::Approx(0.0).epsilon(1e-14));

  DVec s{0.1, 0, 0};
  CHECK(m.M(s) == doctest::Approx(std::cosh(0.1) * std::cosh(0.1)).epsilon(1e-13));

  // gradient against a central finite difference of log M
  double h = 1e-6;
  DVec sp = s, sm = s;
  sp[0] += h;
  sm[0] -= h;
  double fd = (m.logM(sp) - m.logM(sm)) / (2 * h);
  CHECK(m.grad_logM(s)[0] == doctest::Approx(fd).epsilon(1e-8));

  // Hessian at 0 equals the covariance
  CHECK(m.hessian_logM(dzero())(0, 0) == doctest::Approx(nn.cov(0, 0)).epsilon(1e-12));

  CHECK_THROWS(m.M(DVec{100.0, 0, 0}));
}

TEST_CASE("kernel rows: normalization, reproducibility, landscape correlation range") {
  for (auto spec : {nn1d(), lazy1d(), landscape1d()}) {
    EnvironmentSampler env(spec, 99, 7);
    for (long long r = 0; r < 3; ++r) {
      KernelRow row = env.row(r, IVec{5, 0, 0});
      CHECK(row.pmf.total_mass() == doctest::Approx(1.0).epsilon(1e-15));
      // identical keys give identical rows
      KernelRow again = env.row(r, IVec{5, 0, 0});
      for (std::size_t i = 0; i < row.pmf.size(); ++i)
        CHECK(row.pmf.prob[i] == again.pmf.prob[i]);
    }
  }

  // landscape: rows at sites >= 3 apart are exactly independent (rho == 0)
  TwoPointTables t = build_two_point_tables(landscape1d());
  CHECK(t.range_inf == 2);
  CHECK(t.rho_at(IVec{3, 0, 0}).size() == 0);
  CHECK(t.rho_at(IVec{2, 0, 0}).size() > 0);

  // empirical independence of distant sampled rows for the i.i.d. model
  EnvironmentSampler env(nn1d(), 123, 0);
  double s11 = 0, s1 = 0, s2 = 0;
  const int n = 4000;
  for (int r = 0; r < n; ++r) {
    double w1 = env.row(r, IVec{0, 0, 0}).pmf.prob[0];
    double w2 = env.row(r, IVec{9, 0, 0}).pmf.prob[0];
    s11 += w1 * w2;
    s1 += w1;
    s2 += w2;
  }
  double corr = (s11 / n - s1 / n * s2 / n) / (1.0 / 12.0);
  CHECK(std::abs(corr) < 0.08);
}

TEST_CASE("two-point kernel exact tables") {
  // one-step basis, colliding walkers, Uniform[0,1] weights
  TwoPointKernel k0 = two_point_kernel(nn1d(1), izero());
  auto at = [&](int a, int b) {
    for (std::size_t i = 0; i < k0.joint.size(); ++i)
      if (k0.joint.support[i][0][0] == a && k0.joint.support[i][1][0] == b)
        return k0.joint.prob[i];
    return 0.0;
  };
  CHECK(at(1, 1) == doctest::Approx(1.0 / 3).epsilon(1e-12));
  CHECK(at(1, -1) == doctest::Approx(1.0 / 6).epsilon(1e-12));
  CHECK(at(-1, 1) == doctest::Approx(1.0 / 6).epsilon(1e-12));
  CHECK(at(-1, -1) == doctest::Approx(1.0 / 3).epsilon(1e-12));

  // beyond the interaction range: exact product, rho identically zero
  TwoPointKernel kf = two_point_kernel(nn1d(1), IVec{4, 0, 0});
  CHECK(kf.beyond_range);
  CHECK(kf.rho.size() == 0);

  // marginal consistency and centered remainder mass
  TwoPointTables t = build_two_point_tables(nn1d());
  StepDistribution mu = build_step_distribution(nn1d());
  for (const IVec& sep : t.corr_seps) {
    OffsetPmf m0 = t.joint_at(sep).marginal(0);
    for (std::size_t i = 0; i < m0.size(); ++i)
      CHECK(m0.prob[i] == doctest::Approx(mu.pmf.at(m0.support[i])).epsilon(1e-12));
    double rho_mass = 0;
    PairPmf rho = t.rho_at(sep);
    for (double p : rho.prob) rho_mass += p;
    CHECK(std::abs(rho_mass) < 1e-12);
  }

  // Monte Carlo fallback agrees with the exact table within 4 standard errors
  TwoPointKernel mc = two_point_kernel_mc(nn1d(1), izero(), 4000, 5);
  for (std::size_t i = 0; i < mc.joint.size(); ++i) {
    double exact = 0;
    for (std::size_t j = 0; j < k0.joint.size(); ++j)
      if (k0.joint.support[j] == mc.joint.support[i]) exact = k0.joint.prob[j];
    CHECK(std::abs(mc.joint.prob[i] - exact) < 4.0 * mc.joint_stderr[i] + 1e-9);
  }
}

TEST_CASE("symmetry order") {
  CHECK(symmetry_order(nn1d()) == 1);
  CHECK(symmetry_order(lazy1d()) == 2);
  CHECK(symmetry_order(landscape1d()) == 1);
  CHECK_THROWS_WITH_AS(symmetry_order(landscape1d(0.0)), "kernel is deterministic",
                       std::runtime_error);
}

TEST_CASE("symmetry order in d >= 2") {
  EnvironmentSpec nn2;
  nn2.model = EnvironmentSpec::Model::NearestNeighborIID;
  nn2.d = 2;
  nn2.weights.kind = WeightLaw::Kind::SymmetricDirichlet;
  nn2.weights.alpha = 1.0;
  CHECK(symmetry_order(nn2) == 1);

  EnvironmentSpec lz2;
  lz2.model = EnvironmentSpec::Model::SymmetricLazy;
  lz2.d = 2;
  lz2.weights.kind = WeightLaw::Kind::Uniform01;
  CHECK(symmetry_order(lz2) == 2);
}

TEST_CASE("validate assumptions") {
  DiagnosticReport one_step = validate_assumptions(nn1d(1));
  bool irr_fail = false;
  for (auto& c : one_step.checks)
    if (c.name == "irreducibility") irr_fail = !c.pass;
  CHECK(irr_fail);

  DiagnosticReport two_step = validate_assumptions(nn1d(2));
  for (auto& c : two_step.checks) {
    INFO(c.name, ": ", c.detail);
    CHECK(c.pass);
  }

  DiagnosticReport lazy = validate_assumptions(lazy1d());
  for (auto& c : lazy.checks) {
    INFO(c.name, ": ", c.detail);
    CHECK(c.pass);
  }
}
