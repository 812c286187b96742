#include "rwre/kpoint.hpp"

#include <cmath>

namespace rwre {

std::vector<KPointState> simulate_quenched_kpoint(const EnvironmentSpec& spec, int k,
                                                  const std::vector<IVec>& starts,
                                                  long long horizon,
                                                  std::uint64_t master_seed,
                                                  std::uint64_t env_id) {
  if ((int)starts.size() != k) throw std::invalid_argument("starts must have k entries");
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  EnvironmentSampler env(spec, master_seed, env_id);
  int cs = spec.effective_composite_steps();

  std::vector<KPointState> path;
  path.reserve(horizon + 1);
  KPointState st;
  st.positions = starts;
  st.time = 0;
  path.push_back(st);

  // walker randomness is a separate stream from the environment
  Rng wrng = make_stream(master_seed, {env_id, stream_purpose::kWalker});

  // per-sub-step row cache (rows at equal (time, site) are identical anyway;
  // the cache only avoids regenerating them)
  SiteMap<KernelRow> rows;
  for (long long t = 0; t < horizon; ++t) {
    for (int sub = 0; sub < cs; ++sub) {
      long long etime = t * cs + sub;
      rows.clear();
      for (int i = 0; i < k; ++i) {
        IVec& x = st.positions[i];
        auto it = rows.find(x);
        if (it == rows.end()) it = rows.emplace(x, env.row(etime, x)).first;
        const OffsetPmf& pmf = it->second.pmf;
        DiscreteSampler smp(pmf.prob);
        x = iadd(x, pmf.support[smp.sample(wrng)]);
      }
    }
    st.time = t + 1;
    path.push_back(st);
  }
  return path;
}

OffsetPmf difference_kernel(const TwoPointTables& tables, const IVec& separation) {
  return tables.diff_step(separation);
}

// ---------------------------------------------------------------------------

TiltedPairChain::TiltedPairChain(const TwoPointTables& tables, const Tilt& tilt)
    : tables_(&tables), tilt_(tilt) {
  MgfOracle mgf(tables.mu.pmf, tables.d);
  radius_ = mgf.admissible_radius() / 4.0;
  double n = dnorm2(tilt.varsigma);
  if (n > radius_ + 1e-12)
    throw std::domain_error("tilt out of admissible ball (|vs| = " + std::to_string(n) +
                            ", radius " + std::to_string(radius_) + ")");
  logM_ = mgf.logM(tilt.varsigma);

  far_walker_ = tables.mu.pmf;
  for (std::size_t i = 0; i < far_walker_.size(); ++i)
    far_walker_.prob[i] *= std::exp(ddot(tilt.varsigma, far_walker_.support[i]) - logM_);
  far_walker_.normalize();  // exact up to fp; guards drift
  far_sampler_.reset(far_walker_.prob);
  far_diff_ = difference_law(far_walker_, far_walker_);
  far_diff_sampler_.reset(far_diff_.prob);

  for (const IVec& sep : tables.corr_seps) {
    SepEntry e;
    e.pmf = tables.joint_at(sep);
    double z = 0;
    for (std::size_t i = 0; i < e.pmf.size(); ++i) {
      double w = std::exp(ddot(tilt.varsigma, iadd(e.pmf.support[i][0], e.pmf.support[i][1])));
      e.pmf.prob[i] *= w;
      z += e.pmf.prob[i];
    }
    e.u = std::log(z) - 2.0 * logM_;
    for (auto& p : e.pmf.prob) p /= z;
    e.sampler.reset(e.pmf.prob);
    e.diff = e.pmf.difference();
    e.diff_sampler.reset(e.diff.prob);
    in_range_.emplace(sep, std::move(e));
  }
}

void TiltedPairChain::step(IVec& x1, IVec& x2, Rng& rng) const {
  IVec sep = isub(x1, x2);
  auto it = in_range_.find(sep);
  if (it == in_range_.end()) {
    x1 = iadd(x1, far_walker_.support[far_sampler_.sample(rng)]);
    x2 = iadd(x2, far_walker_.support[far_sampler_.sample(rng)]);
    return;
  }
  const auto& pr = it->second.pmf.support[it->second.sampler.sample(rng)];
  x1 = iadd(x1, pr[0]);
  x2 = iadd(x2, pr[1]);
}

IVec TiltedPairChain::step_difference(const IVec& sep, Rng& rng) const {
  auto it = in_range_.find(sep);
  if (it == in_range_.end())
    return iadd(sep, far_diff_.support[far_diff_sampler_.sample(rng)]);
  return iadd(sep, it->second.diff.support[it->second.diff_sampler.sample(rng)]);
}

OffsetPmf TiltedPairChain::tilted_diff_row(const IVec& sep) const {
  auto it = in_range_.find(sep);
  OffsetPmf row = it == in_range_.end() ? far_diff_ : it->second.diff;
  for (auto& v : row.support) v = iadd(sep, v);
  return row;
}

double TiltedPairChain::u_at(const IVec& sep) const {
  auto it = in_range_.find(sep);
  return it == in_range_.end() ? 0.0 : it->second.u;
}

double TiltedPairChain::vartheta_at(const IVec& sep) const {
  return std::expm1(u_at(sep));
}

double TiltedPairChain::max_abs_u() const {
  double m = 0;
  for (auto& [k, v] : in_range_) m = std::max(m, std::abs(v.u));
  return m;
}

DVec TiltedPairChain::tilted_mean() const { return far_walker_.mean(); }

// ---------------------------------------------------------------------------

namespace {
DVec mapped(const Eigen::Matrix3d* coords, const IVec& a, int d) {
  if (!coords) return to_dvec(a);
  DVec out = dzero();
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) out[i] += (*coords)(i, j) * a[j];
  return out;
}
}  // namespace

double eta_value(const TwoPointTables& t, const MIdx& r1, const MIdx& r2,
                 const IVec& sep, const Eigen::Matrix3d* coords) {
  PairPmf rho = t.rho_at(sep);
  double s = 0;
  for (std::size_t i = 0; i < rho.size(); ++i)
    s += rho.prob[i] * dpow_midx(mapped(coords, rho.support[i][0], t.d), r1) *
         dpow_midx(mapped(coords, rho.support[i][1], t.d), r2);
  return s;
}

double zeta_value(const TwoPointTables& t, int p, const DVec& v, const IVec& sep,
                  const Eigen::Matrix3d* coords) {
  PairPmf rho = t.rho_at(sep);
  double pf = 1;
  for (int i = 2; i <= p; ++i) pf *= i;
  double s = 0;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    double d1 = ddot(v, mapped(coords, rho.support[i][0], t.d));
    double d2 = ddot(v, mapped(coords, rho.support[i][1], t.d));
    s += rho.prob[i] * std::pow(d1, p) * std::pow(d2, p) / (pf * pf);
  }
  return s;
}

double u_value(const TwoPointTables& t, const DVec& varsigma, const IVec& sep) {
  MgfOracle mgf(t.mu.pmf, t.d);
  double logM = mgf.logM(varsigma);
  const PairPmf& joint = t.joint_at(sep);
  double z = 0;
  for (std::size_t i = 0; i < joint.size(); ++i)
    z += joint.prob[i] *
         std::exp(ddot(varsigma, iadd(joint.support[i][0], joint.support[i][1])));
  return std::log(z) - 2.0 * logM;
}

double vartheta_value(const TwoPointTables& t, const DVec& varsigma, const IVec& sep) {
  // direct rho representation; equals expm1(u) within fp
  MgfOracle mgf(t.mu.pmf, t.d);
  double logM = mgf.logM(varsigma);
  PairPmf rho = t.rho_at(sep);
  double s = 0;
  for (std::size_t i = 0; i < rho.size(); ++i)
    s += rho.prob[i] *
         std::exp(ddot(varsigma, iadd(rho.support[i][0], rho.support[i][1])) - 2.0 * logM);
  return s;
}

double cumulant_gap_two(const TwoPointTables& t, const DVec& varsigma, const IVec& sep) {
  return u_value(t, varsigma, sep);
}

PairFunctionTable pair_functions(const TwoPointTables& t, int p, const DVec& v,
                                 const DVec& varsigma, const Eigen::Matrix3d* coords) {
  PairFunctionTable out;
  out.d = t.d;
  out.p = p;
  out.direction = v;
  out.varsigma = varsigma;
  out.seps = t.corr_seps;
  for (const MIdx& r1 : multi_indices(t.d, p))
    for (const MIdx& r2 : multi_indices(t.d, p)) out.eta_indices.emplace_back(r1, r2);
  out.eta.resize(out.eta_indices.size());
  for (const IVec& sep : out.seps) {
    out.zeta[sep] = zeta_value(t, p, v, sep, coords);
    out.u[sep] = u_value(t, varsigma, sep);
    out.vartheta[sep] = vartheta_value(t, varsigma, sep);
    for (std::size_t i = 0; i < out.eta_indices.size(); ++i)
      out.eta[i][sep] =
          eta_value(t, out.eta_indices[i].first, out.eta_indices[i].second, sep, coords);
  }
  return out;
}

EstimateWithCI cumulant_gap_mc(const EnvironmentSpec& spec, const DVec& varsigma, int k,
                               const std::vector<IVec>& positions, std::uint64_t replicas,
                               std::uint64_t seed) {
  if ((int)positions.size() != k) throw std::invalid_argument("positions must have k entries");
  StepDistribution mu = build_step_distribution(spec);
  MgfOracle mgf(mu.pmf, spec.d);
  double logM = mgf.logM(varsigma);
  int cs = spec.effective_composite_steps();

  // E over environments of prod_i (composite row MGF_i); walkers integrated
  // exactly given the realization
  std::vector<double> samples((std::size_t)replicas);
  for (std::uint64_t rep = 0; rep < replicas; ++rep) {
    EnvironmentSampler env(spec, seed, rep);
    double prod = 1;
    for (int i = 0; i < k; ++i) {
      // composite row MGF of walker i given the environment: forward sweep of
      // the weighted measure over positions
      SiteMap<double> w;
      w[positions[i]] = 1.0;
      for (int s = 0; s < cs; ++s) {
        SiteMap<double> next;
        for (auto& [x, mass] : w) {
          KernelRow row = env.row(s, x);
          for (std::size_t a = 0; a < row.pmf.size(); ++a)
            next[iadd(x, row.pmf.support[a])] +=
                mass * row.pmf.prob[a] * std::exp(ddot(varsigma, row.pmf.support[a]));
        }
        w = std::move(next);
      }
      double m = 0;
      for (auto& [x, mass] : w) m += mass;
      prod *= m;
    }
    samples[rep] = prod;
  }
  EstimateWithCI e = summarize(samples, seed);
  // delta-method transfer to the log scale
  double val = std::log(e.value) - k * logM;
  EstimateWithCI out;
  out.value = val;
  out.stderror = e.stderror / e.value;
  out.replicas = e.replicas;
  out.seed = seed;
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct PairKeyHash {
  std::size_t operator()(const std::array<IVec, 2>& p) const {
    IVecHash h;
    return h(p[0]) * 0x9e3779b97f4a7c15ull + h(p[1]);
  }
};
using PairMeasure = std::unordered_map<std::array<IVec, 2>, double, PairKeyHash>;

}  // namespace

double tilting_identity_residual_exact(const TwoPointTables& t, const Tilt& tilt,
                                       long long horizon, const PairObservable& f,
                                       const IVec& start1, const IVec& start2) {
  MgfOracle mgf(t.mu.pmf, t.d);
  double logM = mgf.logM(tilt.varsigma);
  TiltedPairChain q(t, tilt);

  // left side: untilted evolution carrying the product of rescaling factors
  PairMeasure lhs;
  lhs[{start1, start2}] = 1.0;
  for (long long s = 0; s < horizon; ++s) {
    PairMeasure next;
    for (auto& [xs, w] : lhs) {
      const PairPmf& step = t.joint_at(isub(xs[0], xs[1]));
      for (std::size_t i = 0; i < step.size(); ++i) {
        double fac =
            std::exp(ddot(tilt.varsigma, iadd(step.support[i][0], step.support[i][1])) -
                     2.0 * logM);
        next[{iadd(xs[0], step.support[i][0]), iadd(xs[1], step.support[i][1])}] +=
            w * step.prob[i] * fac;
      }
    }
    lhs = std::move(next);
  }
  double lhs_val = 0;
  for (auto& [xs, w] : lhs) lhs_val += w * f(xs[0], xs[1]);

  // right side: tilted chain carrying e^{sum_r u(diff_r)}
  PairMeasure rhs;
  rhs[{start1, start2}] = 1.0;
  for (long long s = 0; s < horizon; ++s) {
    PairMeasure next;
    for (auto& [xs, w] : rhs) {
      IVec sep = isub(xs[0], xs[1]);
      double uw = std::exp(q.u_at(sep));
      auto push = [&](const IVec& a1, const IVec& a2, double p) {
        next[{iadd(xs[0], a1), iadd(xs[1], a2)}] += w * uw * p;
      };
      if (t.in_range(sep)) {
        const PairPmf& base = t.joint_at(sep);
        double z = 0;
        std::vector<double> probs(base.size());
        for (std::size_t i = 0; i < base.size(); ++i) {
          probs[i] = base.prob[i] * std::exp(ddot(tilt.varsigma,
                                                  iadd(base.support[i][0], base.support[i][1])));
          z += probs[i];
        }
        for (std::size_t i = 0; i < base.size(); ++i)
          push(base.support[i][0], base.support[i][1], probs[i] / z);
      } else {
        OffsetPmf mv = q.tilted_walker_step();
        for (std::size_t a = 0; a < mv.size(); ++a)
          for (std::size_t b = 0; b < mv.size(); ++b)
            push(mv.support[a], mv.support[b], mv.prob[a] * mv.prob[b]);
      }
    }
    rhs = std::move(next);
  }
  double rhs_val = 0;
  for (auto& [xs, w] : rhs) rhs_val += w * f(xs[0], xs[1]);

  return std::abs(lhs_val - rhs_val);
}

std::pair<EstimateWithCI, EstimateWithCI> tilting_identity_mc(
    const TwoPointTables& t, const Tilt& tilt, long long horizon,
    const PairObservable& f, const IVec& start1, const IVec& start2,
    std::uint64_t replicas, std::uint64_t seed) {
  MgfOracle mgf(t.mu.pmf, t.d);
  double logM = mgf.logM(tilt.varsigma);
  TiltedPairChain q(t, tilt);
  TiltedPairChain q0(t, Tilt{});  // untilted sampler

  std::vector<double> lhs((std::size_t)replicas), diff((std::size_t)replicas);
  for (std::uint64_t rep = 0; rep < replicas; ++rep) {
    // common random numbers: both chains consume the same stream
    Rng rng_l = make_stream(seed, {rep, 1});
    Rng rng_r = make_stream(seed, {rep, 1});

    IVec a1 = start1, a2 = start2;
    double logw = 0;
    for (long long s = 0; s < horizon; ++s) {
      IVec p1 = a1, p2 = a2;
      q0.step(a1, a2, rng_l);
      logw += ddot(tilt.varsigma, isub(iadd(a1, a2), iadd(p1, p2))) - 2.0 * logM;
    }
    double L = std::exp(logw) * f(a1, a2);

    IVec b1 = start1, b2 = start2;
    double usum = 0;
    for (long long s = 0; s < horizon; ++s) {
      usum += q.u_at(isub(b1, b2));
      q.step(b1, b2, rng_r);
    }
    double R = std::exp(usum) * f(b1, b2);
    lhs[rep] = L;
    diff[rep] = L - R;
  }
  return {summarize(diff, seed), summarize(lhs, seed)};
}

}  // namespace rwre
