#include "rwre/density_field.hpp"

#include <cmath>

namespace rwre {

// The evolver advances the tilted weighted density
//   Y_r(z) = exp(vs.z - r log M - log nu-hat) P^omega(r, z)
// whose update has bounded local factors (no overflow for any tilt); at
// vs = 0 this is the plain quenched probability.  The annealed companion
// rho_r = nu^vs * (mu^vs)^{*r} gives the exact mean field.
DensityEvolver::DensityEvolver(const EnvironmentSpec& spec, std::uint64_t master_seed,
                               std::uint64_t env_id, const InitialProfile& nu,
                               double support_cap_mass)
    : DensityEvolver(spec, master_seed, env_id, nu, dzero(), support_cap_mass) {}

DensityEvolver::DensityEvolver(const EnvironmentSpec& spec, std::uint64_t master_seed,
                               std::uint64_t env_id, const InitialProfile& nu,
                               const DVec& varsigma, double support_cap_mass)
    : spec_(spec), env_(spec, master_seed, env_id), varsigma_(varsigma),
      cap_(support_cap_mass) {
  spec_.check_shape();
  cs_ = spec_.effective_composite_steps();
  {
    EnvironmentSpec s1 = spec_;
    s1.composite_steps = 1;
    mu_elem_ = build_step_distribution(s1).pmf;
  }
  MgfOracle mgf(mu_elem_, spec_.d);
  logM_elem_ = mgf.logM(varsigma_);
  // per-offset tilt factors for the elementary directions
  const auto& dirs = env_.directions();
  tilt_factor_.resize(dirs.size());
  for (std::size_t k = 0; k < dirs.size(); ++k)
    tilt_factor_[k] = std::exp(ddot(varsigma_, dirs[k]) - logM_elem_);
  mu_tilted_ = mu_elem_;
  for (std::size_t k = 0; k < mu_tilted_.size(); ++k)
    mu_tilted_.prob[k] *= std::exp(ddot(varsigma_, mu_tilted_.support[k]) - logM_elem_);

  // tilted initial state nu^vs
  double z = 0;
  std::vector<double> w(nu.nu.size());
  for (std::size_t i = 0; i < nu.nu.size(); ++i) {
    w[i] = nu.nu.prob[i] * std::exp(ddot(varsigma_, nu.nu.support[i]));
    z += w[i];
  }
  for (auto& x : w) x /= z;

  dense_ = spec_.d == 1;
  if (dense_) {
    long long lo = nu.nu.support.front()[0], hi = lo;
    for (auto& s : nu.nu.support) {
      lo = std::min<long long>(lo, s[0]);
      hi = std::max<long long>(hi, s[0]);
    }
    lo_ = alo_ = lo;
    line_.assign(hi - lo + 1, 0.0);
    for (std::size_t i = 0; i < nu.nu.size(); ++i)
      line_[nu.nu.support[i][0] - lo] += w[i];
    annealed_line_ = line_;
  } else {
    for (std::size_t i = 0; i < nu.nu.size(); ++i) {
      mass_[nu.nu.support[i]] += w[i];
      annealed_[nu.nu.support[i]] += w[i];
    }
  }
}

double DensityEvolver::total_mass() const {
  double s = 0;
  if (dense_)
    for (double v : line_) s += v;
  else
    for (auto& [z, v] : mass_) s += v;
  return s;
}

double DensityEvolver::mass_at(const IVec& z) const {
  if (dense_) {
    long long i = z[0] - lo_;
    return (i >= 0 && i < (long long)line_.size()) ? line_[i] : 0.0;
  }
  auto it = mass_.find(z);
  return it == mass_.end() ? 0.0 : it->second;
}

double DensityEvolver::annealed_at(const IVec& z) const {
  if (dense_) {
    long long i = z[0] - alo_;
    return (i >= 0 && i < (long long)annealed_line_.size()) ? annealed_line_[i] : 0.0;
  }
  auto it = annealed_.find(z);
  return it == annealed_.end() ? 0.0 : it->second;
}

void DensityEvolver::for_each(const std::function<void(const IVec&, double)>& fn) const {
  if (dense_) {
    for (std::size_t i = 0; i < line_.size(); ++i)
      if (line_[i] != 0.0) fn(IVec{(int)(lo_ + (long long)i), 0, 0}, line_[i]);
  } else {
    for (auto& [z, v] : mass_) fn(z, v);
  }
}

void DensityEvolver::for_each_annealed(
    const std::function<void(const IVec&, double)>& fn) const {
  if (dense_) {
    for (std::size_t i = 0; i < annealed_line_.size(); ++i)
      if (annealed_line_[i] != 0.0) fn(IVec{(int)(alo_ + (long long)i), 0, 0}, annealed_line_[i]);
  } else {
    for (auto& [z, v] : annealed_) fn(z, v);
  }
}

void DensityEvolver::elementary_step(long long etime) {
  const auto& dirs = env_.directions();
  int maxoff = 0;
  for (auto& o : dirs) maxoff = std::max(maxoff, inorm_inf(o));
  if (dense_) {
    line_next_.assign(line_.size() + 2 * maxoff, 0.0);
    for (std::size_t i = 0; i < line_.size(); ++i) {
      double p = line_[i];
      if (p == 0.0) continue;
      IVec z{(int)(lo_ + (long long)i), 0, 0};
      env_.row_probs(etime, z, rowbuf_);
      for (std::size_t k = 0; k < dirs.size(); ++k)
        line_next_[(long long)i + maxoff + dirs[k][0]] += p * rowbuf_[k] * tilt_factor_[k];
    }
    line_.swap(line_next_);
    lo_ -= maxoff;
    double cap = cap_ > 0 ? cap_ : 1e-300;
    for (auto& v : line_)
      if (v > 0 && v < cap) {
        lost_ += v;
        v = 0;
      }
    std::size_t a = 0, b = line_.size();
    while (a < b && line_[a] == 0.0) ++a;
    while (b > a && line_[b - 1] == 0.0) --b;
    if (a > 0 || b < line_.size()) {
      line_.erase(line_.begin() + b, line_.end());
      line_.erase(line_.begin(), line_.begin() + a);
      lo_ += (long long)a;
    }
  } else {
    SiteMap<double> next;
    next.reserve(mass_.size() * 2);
    for (auto& [z, p] : mass_) {
      if (p == 0.0) continue;
      env_.row_probs(etime, z, rowbuf_);
      for (std::size_t k = 0; k < dirs.size(); ++k)
        next[iadd(z, dirs[k])] += p * rowbuf_[k] * tilt_factor_[k];
    }
    if (cap_ > 0) {
      for (auto it = next.begin(); it != next.end();) {
        if (it->second < cap_) {
          lost_ += it->second;
          it = next.erase(it);
        } else {
          ++it;
        }
      }
    }
    mass_ = std::move(next);
  }
}

void DensityEvolver::step() {
  for (int sub = 0; sub < cs_; ++sub) elementary_step(r_ * cs_ + sub);
  // annealed companion: convolution with the tilted elementary law
  for (int sub = 0; sub < cs_; ++sub) {
    if (dense_) {
      int maxoff = mu_tilted_.max_inf_radius();
      annealed_next_.assign(annealed_line_.size() + 2 * maxoff, 0.0);
      for (std::size_t i = 0; i < annealed_line_.size(); ++i) {
        double p = annealed_line_[i];
        if (p == 0.0) continue;
        for (std::size_t k = 0; k < mu_tilted_.size(); ++k)
          annealed_next_[(long long)i + maxoff + mu_tilted_.support[k][0]] +=
              p * mu_tilted_.prob[k];
      }
      annealed_line_.swap(annealed_next_);
      alo_ -= maxoff;
      for (auto& v : annealed_line_)
        if (v > 0 && v < 1e-300) v = 0;
      std::size_t a = 0, b = annealed_line_.size();
      while (a < b && annealed_line_[a] < 1e-18) ++a;
      while (b > a && annealed_line_[b - 1] < 1e-18) --b;
      if (a > 0 || b < annealed_line_.size()) {
        annealed_line_.erase(annealed_line_.begin() + b, annealed_line_.end());
        annealed_line_.erase(annealed_line_.begin(), annealed_line_.begin() + a);
        alo_ += (long long)a;
      }
    } else {
      SiteMap<double> next;
      for (auto& [z, p] : annealed_)
        for (std::size_t k = 0; k < mu_tilted_.size(); ++k)
          next[iadd(z, mu_tilted_.support[k])] += p * mu_tilted_.prob[k];
      annealed_ = std::move(next);
    }
  }
  ++r_;
}

OffsetPmf DensityEvolver::realized_composite_row(long long r, const IVec& z) const {
  OffsetPmf cur;
  cur.support = {izero()};
  cur.prob = {1.0};
  for (int sub = 0; sub < cs_; ++sub) {
    OffsetPmf next;
    for (std::size_t i = 0; i < cur.size(); ++i) {
      KernelRow row = env_.row(r * cs_ + sub, iadd(z, cur.support[i]));
      for (std::size_t k = 0; k < row.pmf.size(); ++k) {
        next.support.push_back(iadd(cur.support[i], row.pmf.support[k]));
        next.prob.push_back(cur.prob[i] * row.pmf.prob[k]);
      }
    }
    next.compress(0.0);
    cur = std::move(next);
  }
  return cur;
}

// ---------------------------------------------------------------------------

FieldSample field_and_martingale(const EnvironmentSpec& spec, const ScalingParams& sp,
                                 const InitialProfile& nu, const TestFunction& phi,
                                 double t, std::uint64_t master_seed,
                                 std::uint64_t env_id, const FieldOptions& fopt) {
  TwoPointTables tables = build_two_point_tables(spec);
  const StepDistribution& mu = tables.mu;
  const long long horizon = (long long)std::llround(t * (double)sp.N);
  const double sqn = std::sqrt((double)sp.N);

  DensityEvolver ev(spec, master_seed, env_id, nu, sp.varsigma, fopt.support_cap);

  auto x_macro = [&](const IVec& z, long long r) {
    DVec shift = dscale(sp.d_N, (double)r / (double)sp.N);
    DVec pos = dsub(to_dvec(z), shift);
    return dscale(mu.to_macroscopic(pos), 1.0 / sqn);
  };

  // pair-function tables for the decomposition
  int p = sp.p;
  std::vector<std::pair<MIdx, MIdx>> midx;
  for (const MIdx& r1 : multi_indices(spec.d, p))
    for (const MIdx& r2 : multi_indices(spec.d, p)) midx.emplace_back(r1, r2);
  SiteMap<std::vector<double>> eta_tab;
  SiteMap<double> zeta_tab, theta_tab;
  for (const IVec& sep : tables.corr_seps) {
    std::vector<double> es;
    for (auto& [r1, r2] : midx) es.push_back(eta_value(tables, r1, r2, sep, &mu.norm));
    eta_tab[sep] = es;
    zeta_tab[sep] = zeta_value(tables, p, sp.varsigma, sep, nullptr);
    theta_tab[sep] = vartheta_value(tables, sp.varsigma, sep);
  }

  FieldSample out;
  out.t = t;
  const double B = sp.B_N, B2 = B * B;
  double qv = 0, lead = 0, e1 = 0, e2 = 0, msum = 0, ident = 0;
  (void)e1;

  for (long long r = 0; r < horizon; ++r) {
    if (fopt.collect_qv) {
      for (const IVec& sep : tables.corr_seps) {
        PairPmf rho = tables.rho_at(sep);
        ev.for_each([&](const IVec& z1, double m1) {
          IVec z2 = isub(z1, sep);
          double m2 = ev.mass_at(z2);
          if (m2 == 0.0) return;
          double w = m1 * m2;  // Y-values already carry the rescaling factors
          DVec x1 = x_macro(z1, r);
          double phi1 = phi.value(x1);
          double j = 0;
          for (std::size_t k = 0; k < rho.size(); ++k) {
            const IVec& a1 = rho.support[k][0];
            const IVec& a2 = rho.support[k][1];
            double fac = std::exp(ddot(sp.varsigma, iadd(a1, a2)) - 2.0 * sp.logM);
            j += rho.prob[k] * fac * phi.value(x_macro(iadd(z1, a1), r + 1)) *
                 phi.value(x_macro(iadd(z2, a2), r + 1));
          }
          qv += B2 * w * j;
          if (sp.regime == Regime::A) {
            DVec x2 = x_macro(z2, r);
            double l = 0, v2 = 0;
            const std::vector<double>& es = eta_tab[sep];
            double np = std::pow((double)sp.N, -(double)p);
            for (std::size_t k = 0; k < midx.size(); ++k) {
              double fr = midx_factorial(midx[k].first) * midx_factorial(midx[k].second);
              double d1 = phi.derivative(midx[k].first, x1);
              double d2a = phi.derivative(midx[k].second, x1);
              double d2b = phi.derivative(midx[k].second, x2);
              l += np * d1 * d2a / fr * es[k];
              v2 += np * d1 * (d2b - d2a) / fr * es[k];
            }
            lead += B2 * w * l;
            e2 += B2 * w * v2;
          } else if (sp.regime == Regime::B || sp.regime == Regime::C) {
            lead += B2 * w * std::exp(-2.0 * sp.logM) * phi1 * phi1 * zeta_tab[sep];
            e2 += B2 * w * phi1 * phi1 *
                  (theta_tab[sep] - std::exp(-2.0 * sp.logM) * zeta_tab[sep]);
          } else {
            lead += B2 * w * phi1 * phi1 * theta_tab[sep];
          }
        });
      }
    }

    double rhs = 0, lhs_old = 0;
    if (fopt.track_identity) {
      ev.for_each([&](const IVec& z, double y) {
        OffsetPmf krow = ev.realized_composite_row(r, z);
        double v = 0;
        for (std::size_t k = 0; k < krow.size(); ++k)
          v += krow.prob[k] * std::exp(ddot(sp.varsigma, krow.support[k]) - sp.logM) *
               phi.value(x_macro(iadd(z, krow.support[k]), r + 1));
        double conv = 0;
        for (std::size_t k = 0; k < mu.pmf.size(); ++k)
          conv += mu.pmf.prob[k] * std::exp(ddot(sp.varsigma, mu.pmf.support[k]) - sp.logM) *
                  phi.value(x_macro(iadd(z, mu.pmf.support[k]), r + 1));
        rhs += y * (v - conv);
        lhs_old += y * conv;
      });
    }

    ev.step();

    if (fopt.track_identity) {
      double lhs_new = 0;
      ev.for_each([&](const IVec& z, double y) {
        lhs_new += y * phi.value(x_macro(z, r + 1));
      });
      ident = std::max(ident, std::abs((lhs_new - lhs_old) - rhs));
      msum += B * rhs;
    }
  }

  double h = 0, meanf = 0;
  ev.for_each([&](const IVec& z, double y) { h += y * phi.value(x_macro(z, horizon)); });
  ev.for_each_annealed(
      [&](const IVec& z, double y) { meanf += y * phi.value(x_macro(z, horizon)); });

  out.h_field = h;
  out.mean_field = meanf;
  out.f_field = B * (h - meanf);
  out.qv_ledger = qv;
  out.qv_leading = lead;
  out.qv_err2 = e2;
  out.qv_err1 = qv - lead - e2;
  out.martingale_sum = msum;
  out.heat_identity_residual = ident;
  out.lost_mass = ev.lost_mass();
  out.total_mass = ev.total_mass();
  return out;
}

double qv_decomposition_residual(const FieldSample& fs) {
  return std::abs(fs.qv_ledger - (fs.qv_leading + fs.qv_err1 + fs.qv_err2));
}

// ---------------------------------------------------------------------------

namespace {

double run_qvf_path(const EnvironmentSpec& spec, const ScalingParams& sp,
                    const TwoPointTables& tables, const TiltedPairChain& q,
                    const TiltedPairChain& q0, const SiteMap<double>& f_table,
                    const TestFunction& phi, long long horizon, const IVec& a1,
                    const IVec& a2, QvfMode mode, std::uint64_t seed, std::uint64_t rep,
                    double* wsum, double* wsqsum) {
  const StepDistribution& mu = tables.mu;
  const double sqn = std::sqrt((double)sp.N);
  const double pref = std::pow((double)sp.N, 0.5 * (spec.d - 2));
  auto x_macro = [&](const IVec& z, long long r) {
    DVec shift = dscale(sp.d_N, (double)r / (double)sp.N);
    return dscale(mu.to_macroscopic(dsub(to_dvec(z), shift)), 1.0 / sqn);
  };
  auto f_at = [&](const IVec& sep) {
    auto it = f_table.find(sep);
    return it == f_table.end() ? 0.0 : it->second;
  };
  Rng rng = make_stream(seed, {rep, stream_purpose::kWalker});
  double acc = 0;

  if (mode == QvfMode::TiltedImportance) {
    IVec x1 = a1, x2 = a2;
    double usum = 0;
    for (long long r = 1; r <= horizon; ++r) {
      usum += q.u_at(isub(x1, x2));
      q.step(x1, x2, rng);
      double fv = f_at(isub(x1, x2));
      if (fv != 0.0) {
        double w = std::exp(usum);
        acc += w * fv * phi.value(x_macro(x1, r));
        *wsum += w;
        *wsqsum += w * w;
      }
    }
    return pref * acc;
  }
  if (mode == QvfMode::AnnealedPair) {
    IVec x1 = a1, x2 = a2;
    double logw = 0;
    for (long long r = 1; r <= horizon; ++r) {
      IVec p1 = x1, p2 = x2;
      q0.step(x1, x2, rng);
      logw += ddot(sp.varsigma, isub(iadd(x1, x2), iadd(p1, p2))) - 2.0 * sp.logM;
      double fv = f_at(isub(x1, x2));
      if (fv != 0.0) acc += std::exp(logw) * fv * phi.value(x_macro(x1, r));
    }
    return pref * acc;
  }
  // quenched environment, two independent walkers
  EnvironmentSampler env(spec, seed, rep);
  int cs = spec.effective_composite_steps();
  IVec x1 = a1, x2 = a2;
  double logw = 0;
  std::vector<double> probs1, probs2;
  for (long long r = 1; r <= horizon; ++r) {
    IVec p1 = x1, p2 = x2;
    for (int sub = 0; sub < cs; ++sub) {
      long long etime = (r - 1) * cs + sub;
      env.row_probs(etime, x1, probs1);
      DiscreteSampler s1(probs1);
      x1 = iadd(x1, env.directions()[s1.sample(rng)]);
      env.row_probs(etime, x2, probs2);
      DiscreteSampler s2(probs2);
      x2 = iadd(x2, env.directions()[s2.sample(rng)]);
    }
    logw += ddot(sp.varsigma, isub(iadd(x1, x2), iadd(p1, p2))) - 2.0 * sp.logM;
    double fv = f_at(isub(x1, x2));
    if (fv != 0.0) acc += std::exp(logw) * fv * phi.value(x_macro(x1, r));
  }
  return pref * acc;
}

}  // namespace

QvfEstimate estimate_qvf_at(const EnvironmentSpec& spec, const ScalingParams& sp,
                            const SiteMap<double>& f_table, const TestFunction& phi,
                            double t, const IVec& a1, const IVec& a2,
                            const QvfOptions& opt) {
  TwoPointTables tables = build_two_point_tables(spec);
  Tilt tilt{sp.varsigma};
  TiltedPairChain q(tables, tilt);
  TiltedPairChain q0(tables, Tilt{});
  const long long horizon = (long long)std::llround(t * (double)sp.N);

  std::vector<double> samples((std::size_t)opt.replicas);
  double wsum = 0, wsqsum = 0;
  for (std::uint64_t rep = 0; rep < opt.replicas; ++rep)
    samples[rep] = run_qvf_path(spec, sp, tables, q, q0, f_table, phi, horizon, a1, a2,
                                opt.mode, opt.seed, rep, &wsum, &wsqsum);

  QvfEstimate out;
  out.value = summarize(samples, opt.seed);
  if (opt.mode == QvfMode::TiltedImportance && wsum > 0) {
    out.ess_fraction = wsum * wsum / (wsqsum * (double)opt.replicas);
    if (out.ess_fraction < opt.min_ess_fraction)
      throw std::runtime_error("estimate_qvf: tilt too large for importance estimator");
  }
  return out;
}

QvfEstimate estimate_qvf(const EnvironmentSpec& spec, const ScalingParams& sp,
                         const SiteMap<double>& f_table, const TestFunction& phi,
                         double t, const InitialProfile& nu1, const InitialProfile& nu2,
                         const QvfOptions& opt) {
  TwoPointTables tables = build_two_point_tables(spec);
  Tilt tilt{sp.varsigma};
  TiltedPairChain q(tables, tilt);
  TiltedPairChain q0(tables, Tilt{});
  const long long horizon = (long long)std::llround(t * (double)sp.N);

  auto tilted_weights = [&](const InitialProfile& nu) {
    std::vector<double> w(nu.nu.size());
    double z = 0;
    for (std::size_t i = 0; i < nu.nu.size(); ++i) {
      w[i] = nu.nu.prob[i] * std::exp(ddot(sp.varsigma, nu.nu.support[i]));
      z += w[i];
    }
    for (auto& x : w) x /= z;
    return w;
  };
  DiscreteSampler s1(tilted_weights(nu1)), s2(tilted_weights(nu2));

  std::vector<double> samples((std::size_t)opt.replicas);
  double wsum = 0, wsqsum = 0;
  for (std::uint64_t rep = 0; rep < opt.replicas; ++rep) {
    Rng srng = make_stream(opt.seed, {rep, stream_purpose::kInitialState});
    IVec a1 = nu1.nu.support[s1.sample(srng)];
    IVec a2 = nu2.nu.support[s2.sample(srng)];
    samples[rep] = run_qvf_path(spec, sp, tables, q, q0, f_table, phi, horizon, a1, a2,
                                opt.mode, opt.seed, rep, &wsum, &wsqsum);
  }
  QvfEstimate out;
  out.value = summarize(samples, opt.seed);
  if (opt.mode == QvfMode::TiltedImportance && wsum > 0) {
    out.ess_fraction = wsum * wsum / (wsqsum * (double)opt.replicas);
    if (out.ess_fraction < opt.min_ess_fraction)
      throw std::runtime_error("estimate_qvf: tilt too large for importance estimator");
  }
  return out;
}

}  // namespace rwre
