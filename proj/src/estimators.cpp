#include "rwre/estimators.hpp"

#include <cmath>

namespace rwre {

namespace {

StepDistribution step_distribution_from_pmf(const OffsetPmf& mu, int d) {
  StepDistribution sd;
  sd.d = d;
  sd.pmf = mu;
  sd.mean_vec = mu.mean();
  sd.cov = Eigen::Matrix3d::Identity();
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) sd.cov(i, j) = mu.cov(i, j);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(sd.cov);
  if (es.eigenvalues().minCoeff() < 1e-12)
    throw std::runtime_error("degenerate walker law");
  Eigen::Vector3d inv_sqrt = es.eigenvalues().cwiseSqrt().cwiseInverse();
  sd.norm = es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose();
  return sd;
}

// fast sampler over a difference row
struct RowSampler {
  std::vector<IVec> support;
  DiscreteSampler sampler;
  void init(const OffsetPmf& pmf) {
    support = pmf.support;
    sampler.reset(pmf.prob);
  }
  IVec draw(Rng& rng) const { return support[sampler.sample(rng)]; }
};

// difference-chain walker with exact in-range rows
struct DiffWalker {
  RowSampler far;
  SiteMap<RowSampler> special;
  IVec sep = izero();

  explicit DiffWalker(const TiltedPairChain& q) {
    far.init(q.far_diff());
    for (const IVec& s : q.tables().corr_seps) {
      OffsetPmf row = q.tilted_diff_row(s);
      for (auto& v : row.support) v = isub(v, s);
      special[s].init(row);
    }
  }
  void step(Rng& rng) {
    auto it = special.find(sep);
    sep = iadd(sep, (it == special.end() ? far : it->second).draw(rng));
  }
};

}  // namespace

SRIChainHandle environment_chain(const EnvironmentSpec& spec, const Tilt& tilt) {
  SRIChainHandle h;
  h.tables = build_two_point_tables(spec);
  h.tilt = tilt;
  TiltedPairChain q(h.tables, tilt);
  h.drift = q.tilted_mean();
  h.label = spec.model_name();
  return h;
}

SRIChainHandle independent_walk_chain(const OffsetPmf& walker_mu, int d,
                                      const Tilt& tilt, const std::string& label) {
  SRIChainHandle h;
  TwoPointTables t;
  t.d = d;
  t.composite_steps = 1;
  t.mu = step_distribution_from_pmf(walker_mu, d);
  t.mu_elementary = walker_mu;
  t.indep = tensor(walker_mu, walker_mu);
  t.diff_far = difference_law(walker_mu, walker_mu);
  t.range_inf = 0;
  t.walker_lattice = lattice_basis_from(walker_mu.support, d);
  t.diff_lattice = lattice_basis_from(t.diff_far.support, d);
  h.tables = std::move(t);
  h.tilt = tilt;
  TiltedPairChain q(h.tables, tilt);
  h.drift = q.tilted_mean();
  h.label = label;
  return h;
}

OffsetPmf simple_walk_mu(int d) {
  OffsetPmf mu;
  for (int i = 0; i < d; ++i) {
    IVec e = izero();
    e[i] = 1;
    mu.support.push_back(e);
    e[i] = -1;
    mu.support.push_back(e);
  }
  mu.prob.assign(mu.support.size(), 1.0 / mu.support.size());
  return mu;
}

OffsetPmf lazy_pm1_mu() {
  OffsetPmf mu;
  mu.support = {IVec{-1, 0, 0}, IVec{0, 0, 0}, IVec{1, 0, 0}};
  mu.prob = {0.25, 0.5, 0.25};
  return mu;
}

OffsetPmf two_step_pm1_mu() {
  OffsetPmf mu;
  mu.support = {IVec{-2, 0, 0}, IVec{0, 0, 0}, IVec{2, 0, 0}};
  mu.prob = {0.25, 0.5, 0.25};
  return mu;
}

// ---------------------------------------------------------------------------

ErdosTaylorReport erdos_taylor_test(const SRIChainHandle& chain,
                                    const SiteMap<double>& f, long long N,
                                    const IVec& start_sep, double pi_f,
                                    const EstimatorOptions& opt) {
  TiltedPairChain q(chain.tables, chain.tilt);
  DiffWalker proto(q);
  double logN = std::log((double)N);

  std::vector<double> stats((std::size_t)opt.replicas);
  std::vector<double> tails((std::size_t)opt.replicas);
  const long long n_eps = N / 10;
  for (std::uint64_t rep = 0; rep < opt.replicas; ++rep) {
    Rng rng = make_stream(opt.seed, {rep, stream_purpose::kWalker});
    DiffWalker w = proto;
    w.sep = start_sep;
    double v = 0, tail = 0;
    for (long long r = 0; r <= N; ++r) {
      auto it = f.find(w.sep);
      if (it != f.end()) {
        v += it->second;
        if (r >= n_eps) tail += it->second;
      }
      w.step(rng);
    }
    stats[rep] = v / logN;
    tails[rep] = tail;
  }

  ErdosTaylorReport rep;
  EstimateWithCI mean = summarize(stats, opt.seed);
  rep.mean_check.name = "erdos_taylor_mean";
  rep.mean_check.estimate = mean.value;
  rep.mean_check.stderror = mean.stderror;
  rep.mean_check.target = 0.5 * pi_f;
  rep.ks = ks_exponential(stats, -1.0);
  rep.ks.name = "erdos_taylor_ks_exponential";
  std::vector<double> ts = tails;
  std::sort(ts.begin(), ts.end());
  rep.tail_sum_median = ts[ts.size() / 2];
  return rep;
}

GeometricReport total_collision_test_d3(const SRIChainHandle& chain, long long horizon,
                                        double q_return, const EstimatorOptions& opt) {
  TiltedPairChain q(chain.tables, chain.tilt);
  DiffWalker proto(q);

  std::vector<std::uint64_t> counts((std::size_t)opt.replicas);
  for (std::uint64_t rep = 0; rep < opt.replicas; ++rep) {
    Rng rng = make_stream(opt.seed, {rep, stream_purpose::kWalker});
    DiffWalker w = proto;
    std::uint64_t hits = 0;
    for (long long r = 0; r <= horizon; ++r) {
      if (w.sep == izero()) ++hits;
      w.step(rng);
    }
    counts[rep] = hits;
  }

  GeometricReport rep;
  rep.chi2 = chi2_geometric(counts, 1.0 - q_return);
  std::vector<double> cd(counts.begin(), counts.end());
  EstimateWithCI mean = summarize(cd, opt.seed);
  rep.mean_check.name = "geometric_mean";
  rep.mean_check.estimate = mean.value;
  rep.mean_check.stderror = mean.stderror;
  rep.mean_check.target = 1.0 / (1.0 - q_return);
  // visits missed beyond the horizon (crude local-CLT tail, reported only)
  rep.truncation_tail = 2.0 / std::sqrt((double)horizon);
  return rep;
}

LocalTimeReport local_time_test_d1(const SRIChainHandle& chain, const SiteMap<double>& f,
                                   long long N, const std::vector<double>& t_grid,
                                   double pi_f, double c1, const EstimatorOptions& opt) {
  TiltedPairChain q(chain.tables, chain.tilt);
  DiffWalker proto(q);
  double tmax = 0;
  for (double t : t_grid) tmax = std::max(tmax, t);
  long long rmax = (long long)std::llround(tmax * (double)N);

  std::vector<std::vector<double>> per_t(t_grid.size());
  for (auto& v : per_t) v.resize(opt.replicas);
  for (std::uint64_t rep = 0; rep < opt.replicas; ++rep) {
    Rng rng = make_stream(opt.seed, {rep, stream_purpose::kWalker});
    DiffWalker w = proto;
    double v = 0;
    std::size_t next_t = 0;
    for (long long r = 0; r <= rmax; ++r) {
      while (next_t < t_grid.size() &&
             r == (long long)std::llround(t_grid[next_t] * (double)N)) {
        per_t[next_t][rep] = v / std::sqrt((double)N);
        ++next_t;
      }
      auto it = f.find(w.sep);
      if (it != f.end()) v += it->second;
      w.step(rng);
    }
    while (next_t < t_grid.size()) per_t[next_t++][rep] = v / std::sqrt((double)N);
  }

  LocalTimeReport rep;
  rep.t_grid = t_grid;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    EstimateWithCI e = summarize(per_t[i], opt.seed);
    rep.means.push_back(e);
    // target pi_f * c1 * int_0^t G(2s, 0) ds = pi_f * c1 * sqrt(t / pi)
    rep.targets.push_back(pi_f * c1 * std::sqrt(t_grid[i] / M_PI));
    lx.push_back(std::log(t_grid[i]));
    ly.push_back(std::log(std::max(1e-300, e.value)));
  }
  rep.sqrt_t_slope = fit_slope(lx, ly);
  return rep;
}

InvarianceReport invariance_principle_test(const SRIChainHandle& chain, long long N,
                                           const IVec& start_sep,
                                           const EstimatorOptions& opt) {
  TiltedPairChain q(chain.tables, chain.tilt);
  const StepDistribution& mu = chain.tables.mu;
  const int d = chain.tables.d;
  long long half = N / 2;

  // accumulate covariance entries of walker 1 at t = 1/2 and 1, the cross
  // covariance of the two walkers, and fourth moments
  std::vector<double> cov_acc_half(d * d, 0.0), cov_acc_full(d * d, 0.0);
  std::vector<double> cov_sq_half(d * d, 0.0), cov_sq_full(d * d, 0.0);
  std::vector<double> cross_acc(d * d, 0.0), cross_sq(d * d, 0.0);
  double m4 = 0;
  for (std::uint64_t rep = 0; rep < opt.replicas; ++rep) {
    Rng rng = make_stream(opt.seed, {rep, stream_purpose::kWalker});
    IVec x1 = izero(), x2 = start_sep;
    DVec xh = dzero();
    for (long long r = 0; r < N; ++r) {
      if (r == half) {
        DVec c = mu.to_macroscopic(dsub(to_dvec(x1), dscale(chain.drift, (double)r)));
        xh = dscale(c, 1.0 / std::sqrt((double)N));
      }
      q.step(x1, x2, rng);
    }
    DVec c1 = mu.to_macroscopic(dsub(to_dvec(x1), dscale(chain.drift, (double)N)));
    DVec c2 = mu.to_macroscopic(
        dsub(dsub(to_dvec(x2), to_dvec(start_sep)), dscale(chain.drift, (double)N)));
    c1 = dscale(c1, 1.0 / std::sqrt((double)N));
    c2 = dscale(c2, 1.0 / std::sqrt((double)N));
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        double vh = xh[i] * xh[j], vf = c1[i] * c1[j], vx = c1[i] * c2[j];
        cov_acc_half[i * d + j] += vh;
        cov_sq_half[i * d + j] += vh * vh;
        cov_acc_full[i * d + j] += vf;
        cov_sq_full[i * d + j] += vf * vf;
        cross_acc[i * d + j] += vx;
        cross_sq[i * d + j] += vx * vx;
      }
    m4 = std::max(m4, std::pow(ddot(c1, c1), 2.0));
  }

  InvarianceReport rep;
  double R = (double)opt.replicas;
  auto check = [&](std::vector<double>& acc, std::vector<double>& sq, double tscale,
                   bool cross) {
    double worst = 0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        double mean = acc[i * d + j] / R;
        double var = sq[i * d + j] / R - mean * mean;
        double se = std::sqrt(std::max(var, 1e-300) / R);
        double target = cross ? 0.0 : (i == j ? tscale : 0.0);
        worst = std::max(worst, std::abs(mean - target) / se);
      }
    return worst;
  };
  rep.max_cov_dev_sigmas =
      std::max(check(cov_acc_half, cov_sq_half, 0.5, false),
               check(cov_acc_full, cov_sq_full, 1.0, false));
  rep.cross_cov_sigmas = check(cross_acc, cross_sq, 0.0, true);
  rep.moment_ratio = m4;
  rep.pass = rep.max_cov_dev_sigmas < 3.0;
  return rep;
}

AntiConcentrationReport anti_concentration_scan(const SRIChainHandle& chain,
                                                const std::vector<long long>& r_grid,
                                                const EstimatorOptions& opt) {
  TiltedPairChain q(chain.tables, chain.tilt);
  DiffWalker proto(q);
  const int d = chain.tables.d;
  long long rmax = 0;
  for (long long r : r_grid) rmax = std::max(rmax, r);

  std::vector<SiteMap<std::uint64_t>> occupancy(r_grid.size());
  for (std::uint64_t rep = 0; rep < opt.replicas; ++rep) {
    Rng rng = make_stream(opt.seed, {rep, stream_purpose::kWalker});
    DiffWalker w = proto;
    std::size_t gi = 0;
    for (long long r = 0; r <= rmax; ++r) {
      while (gi < r_grid.size() && r == r_grid[gi]) {
        occupancy[gi][w.sep] += 1;
        ++gi;
      }
      w.step(rng);
    }
  }

  AntiConcentrationReport rep;
  rep.r_grid = r_grid;
  for (std::size_t i = 0; i < r_grid.size(); ++i) {
    // empirical max over y of P(|diff - y| <= 1): widen counts over the
    // +-1 cube around each observed point
    SiteMap<std::uint64_t> ball;
    for (auto& [y, c] : occupancy[i]) {
      IVec v = izero();
      for (int dx = -1; dx <= 1; ++dx)
        for (int dy = (d >= 2 ? -1 : 0); dy <= (d >= 2 ? 1 : 0); ++dy)
          for (int dz = (d >= 3 ? -1 : 0); dz <= (d >= 3 ? 1 : 0); ++dz) {
            v = {y[0] + dx, d >= 2 ? y[1] + dy : 0, d >= 3 ? y[2] + dz : 0};
            ball[v] += c;
          }
    }
    std::uint64_t best = 0;
    for (auto& [y, c] : ball) best = std::max(best, c);
    rep.plateau.push_back(std::pow((double)r_grid[i], 0.5 * d) * (double)best /
                          (double)opt.replicas);
  }
  rep.trend = mann_kendall(rep.plateau);
  // no *upward* trend at the 5% level
  bool upward = rep.trend.statistic > 0 && rep.trend.p_value < 0.05;
  rep.pass = !upward;
  return rep;
}

EstimateWithCI expectation_limit_statistic(const SRIChainHandle& chain,
                                           const SiteMap<double>& f,
                                           const TestFunction& phi, double t, long long N,
                                           const IVec& a1, const IVec& a2,
                                           const EstimatorOptions& opt) {
  TiltedPairChain q(chain.tables, chain.tilt);
  const StepDistribution& mu = chain.tables.mu;
  const int d = chain.tables.d;
  const long long horizon = (long long)std::llround(t * (double)N);
  const double pref = std::pow((double)N, 0.5 * (d - 2));
  const double sqn = std::sqrt((double)N);

  std::vector<double> samples((std::size_t)opt.replicas);
  for (std::uint64_t rep = 0; rep < opt.replicas; ++rep) {
    Rng rng = make_stream(opt.seed, {rep, stream_purpose::kWalker});
    IVec x1 = a1, x2 = a2;
    double acc = 0;
    for (long long r = 0; r <= horizon; ++r) {
      auto it = f.find(isub(x1, x2));
      if (it != f.end()) {
        DVec c = mu.to_macroscopic(dsub(to_dvec(x1), dscale(chain.drift, (double)r)));
        acc += it->second * phi.value(dscale(c, 1.0 / sqn));
      }
      q.step(x1, x2, rng);
    }
    samples[rep] = pref * acc;
  }
  return summarize(samples, opt.seed);
}

EstimateWithCI expectation_limit_log_statistic(const SRIChainHandle& chain,
                                               const SiteMap<double>& f, long long N,
                                               const IVec& start_sep,
                                               const EstimatorOptions& opt) {
  TiltedPairChain q(chain.tables, chain.tilt);
  DiffWalker proto(q);
  double logN = std::log((double)N);
  std::vector<double> samples((std::size_t)opt.replicas);
  for (std::uint64_t rep = 0; rep < opt.replicas; ++rep) {
    Rng rng = make_stream(opt.seed, {rep, stream_purpose::kWalker});
    DiffWalker w = proto;
    w.sep = start_sep;
    double acc = 0;
    for (long long r = 0; r <= N; ++r) {
      auto it = f.find(w.sep);
      if (it != f.end()) acc += it->second;
      w.step(rng);
    }
    samples[rep] = acc / logN;
  }
  return summarize(samples, opt.seed);
}

BackpropReport backward_propagation_test(const SRIChainHandle& chain,
                                         const SiteMap<double>& f,
                                         const TestFunction& phi,
                                         const std::vector<long long>& n_grid, double t,
                                         const IVec& start_sep,
                                         const EstimatorOptions& opt) {
  TiltedPairChain q(chain.tables, chain.tilt);
  const StepDistribution& mu = chain.tables.mu;
  const int d = chain.tables.d;

  BackpropReport rep;
  rep.n_grid = n_grid;
  for (long long N : n_grid) {
    const long long horizon = (long long)std::llround(t * (double)N);
    const double sqn = std::sqrt((double)N);
    double norm;
    if (d == 1)
      norm = 1.0 / std::sqrt((double)N);
    else if (d == 2)
      norm = 1.0 / std::log((double)N);
    else
      norm = 1.0;
    std::vector<double> sq((std::size_t)opt.replicas);
    for (std::uint64_t rp = 0; rp < opt.replicas; ++rp) {
      Rng rng = make_stream(opt.seed, {rp, (std::uint64_t)N, stream_purpose::kWalker});
      IVec x1 = izero(), x2 = start_sep;
      double phi0 = phi.value(dscale(mu.to_macroscopic(to_dvec(x1)), 1.0 / sqn));
      double acc = 0;
      for (long long r = 0; r <= horizon; ++r) {
        auto it = f.find(isub(x1, x2));
        if (it != f.end()) {
          DVec c = mu.to_macroscopic(dsub(to_dvec(x1), dscale(chain.drift, (double)r)));
          acc += it->second * (phi.value(dscale(c, 1.0 / sqn)) - phi0);
        }
        q.step(x1, x2, rng);
      }
      double y = norm * acc;
      sq[rp] = y * y;
    }
    EstimateWithCI e = summarize(sq, opt.seed);
    rep.second_moments.push_back(e.value);
    rep.stderrors.push_back(e.stderror);
  }
  rep.decreasing = true;
  for (std::size_t i = 1; i < rep.second_moments.size(); ++i)
    rep.decreasing = rep.decreasing && rep.second_moments[i] < rep.second_moments[i - 1];
  return rep;
}

StatsSuiteReport stats_suite(const std::vector<double>& samples, double exp_rate,
                             const std::vector<std::uint64_t>& counts, double geom_q) {
  StatsSuiteReport rep;
  rep.mean = summarize(samples);
  if (!samples.empty()) rep.ks_exp = ks_exponential(samples, exp_rate);
  if (!counts.empty() && geom_q > 0) rep.chi2_geom = chi2_geometric(counts, geom_q);
  if (!samples.empty()) rep.normality = normality_check(samples);
  return rep;
}

}  // namespace rwre
