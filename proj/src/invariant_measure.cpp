#include "rwre/invariant_measure.hpp"

#include <Eigen/Sparse>
#include <cmath>
#include <functional>

namespace rwre {

DiffChain make_diff_chain(const TwoPointTables& t) {
  DiffChain c;
  c.d = t.d;
  c.far = t.diff_far;
  c.lattice = t.diff_lattice;
  c.walker_norm = t.mu.norm;
  c.range_inf = t.range_inf;
  for (const IVec& sep : t.corr_seps) c.special.emplace(sep, t.diff_step(sep));
  return c;
}

DiffChain make_tilted_diff_chain(const TwoPointTables& t, const Tilt& tilt) {
  TiltedPairChain q(t, tilt);
  DiffChain c;
  c.d = t.d;
  c.lattice = t.diff_lattice;
  c.walker_norm = t.mu.norm;  // metric fixed by the untilted law
  c.range_inf = t.range_inf;
  OffsetPmf mv = q.tilted_walker_step();
  c.far = difference_law(mv, mv);
  for (const IVec& sep : t.corr_seps) {
    OffsetPmf row = q.tilted_diff_row(sep);
    for (auto& v : row.support) v = isub(v, sep);  // convert to offsets
    c.special.emplace(sep, row);
  }
  return c;
}

DiffChain make_independent_diff_chain(const OffsetPmf& walker_mu, int d) {
  DiffChain c;
  c.d = d;
  c.far = difference_law(walker_mu, walker_mu);
  c.lattice = lattice_basis_from(c.far.support, d);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Identity();
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) cov(i, j) = walker_mu.cov(i, j);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  Eigen::Vector3d inv_sqrt = es.eigenvalues().cwiseSqrt().cwiseInverse();
  c.walker_norm = es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose();
  c.range_inf = 0;
  return c;
}

namespace {

// enumerate basis-coordinate box |n|_inf <= R
std::vector<IVec> box_points(int d, int R) {
  std::vector<IVec> pts;
  IVec v = izero();
  std::function<void(int)> rec = [&](int dim) {
    if (dim == d) {
      pts.push_back(v);
      return;
    }
    for (int c = -R; c <= R; ++c) {
      v[dim] = c;
      rec(dim + 1);
    }
    v[dim] = 0;
  };
  rec(0);
  return pts;
}

struct BasisChain {
  // chain mapped to basis coordinates (walk generates Z^d there)
  int d;
  BasisMap map;
  OffsetPmf far;
  SiteMap<OffsetPmf> special;  // keyed by basis separation
  int range_basis = 0;
  int maxjump_basis = 0;

  const OffsetPmf& row(const IVec& n) const {
    auto it = special.find(n);
    return it == special.end() ? far : it->second;
  }
};

BasisChain to_basis_chain(const DiffChain& c) {
  BasisChain b;
  b.d = c.d;
  b.map = make_basis_map(c.lattice);
  b.far = b.map.map_pmf(c.far);
  b.maxjump_basis = b.far.max_inf_radius();
  for (auto& [sep, row] : c.special) {
    IVec n = b.map.to_basis(sep);
    b.special.emplace(n, b.map.map_pmf(row));
    b.range_basis = std::max(b.range_basis, inorm_inf(n));
    b.maxjump_basis = std::max(b.maxjump_basis, b.special[n].max_inf_radius());
  }
  return b;
}

int default_radius(const BasisChain& b) {
  return std::max(4 * std::max(1, b.range_basis) + 2 * b.maxjump_basis, 8);
}

double stationarity_residual_on(const BasisChain& b, const InvariantMeasure& pi,
                                const BasisMap& map, int inner_radius) {
  // sup |(pi P)(n) - pi(n)| over the inner window, extending pi by c_far;
  // accumulate in scatter form over the sources
  SiteMap<double> inflow;
  for (const IVec& m : box_points(b.d, inner_radius + b.maxjump_basis)) {
    const OffsetPmf& row = b.row(m);
    double w = pi.at(map.to_ambient(m));
    for (std::size_t i = 0; i < row.size(); ++i) {
      IVec n = iadd(m, row.support[i]);
      if (inorm_inf(n) <= inner_radius) inflow[n] += w * row.prob[i];
    }
  }
  double worst = 0;
  for (const IVec& n : box_points(b.d, inner_radius))
    worst = std::max(worst, std::abs(inflow[n] - pi.at(map.to_ambient(n))));
  return worst;
}

InvariantMeasure solve_recurrent_window(const DiffChain& chain, const BasisChain& b,
                                        int R) {
  // unknowns: pi(n) on |n|_inf <= R; exterior pinned at 1 (counting far field)
  std::vector<IVec> pts = box_points(b.d, R);
  SiteMap<int> index;
  for (std::size_t i = 0; i < pts.size(); ++i) index[pts[i]] = (int)i;
  const int n_unknown = (int)pts.size();

  std::vector<Eigen::Triplet<double>> trips;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_unknown);
  // stationarity at n: pi(n) - sum_m pi(m) P(m -> n) = 0; assemble in
  // scatter form over the sources m
  for (int i = 0; i < n_unknown; ++i) trips.emplace_back(i, i, 1.0);
  for (const IVec& m : box_points(b.d, R + b.maxjump_basis)) {
    const OffsetPmf& row = b.row(m);
    auto src = index.find(m);
    for (std::size_t k = 0; k < row.size(); ++k) {
      IVec n = iadd(m, row.support[k]);
      auto it = index.find(n);
      if (it == index.end()) continue;
      if (src != index.end())
        trips.emplace_back(it->second, src->second, -row.prob[k]);
      else
        rhs[it->second] += row.prob[k];  // exterior source with weight 1
    }
  }
  Eigen::SparseMatrix<double> A(n_unknown, n_unknown);
  A.setFromTriplets(trips.begin(), trips.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success)
    throw std::runtime_error("invariant measure: window linear solve failed");
  Eigen::VectorXd sol = lu.solve(rhs);

  InvariantMeasure pi;
  pi.d = chain.d;
  pi.lattice = chain.lattice;
  pi.c_far = 1.0;
  pi.window_radius_basis = R;
  for (int i = 0; i < n_unknown; ++i) pi.weights[b.map.to_ambient(pts[i])] = sol[i];

  for (auto& [sep, w] : pi.weights)
    if (w < -1e-8)
      throw std::runtime_error("invariant measure: negative weight " + std::to_string(w) +
                               " (signed-measure state, modeling bug)");

  // boundary ring flatness
  double flat = 0;
  for (const IVec& n : box_points(b.d, R))
    if (inorm_inf(n) == R) flat = std::max(flat, std::abs(pi.at(b.map.to_ambient(n)) - 1.0));
  pi.boundary_flatness = flat;
  pi.stationarity_residual =
      stationarity_residual_on(b, pi, b.map, std::max(1, R - b.maxjump_basis));
  return pi;
}

InvariantMeasure solve_transient_green(const DiffChain& chain, const BasisChain& b, int R,
                                       const GreenOptions& gopt) {
  // pi(x0) = 1 + sum_{z in S} sum_w D(z, w) G(w, x0), where D is the row
  // perturbation against the pure walk and G the full-chain Green function,
  // recovered from the pure-walk one by a finite-rank resolvent correction.
  std::vector<IVec> S;  // perturbed rows (basis coords)
  for (auto& [n, row] : b.special) S.push_back(n);
  if (S.empty()) {
    // pure walk: counting measure
    InvariantMeasure pi;
    pi.d = chain.d;
    pi.lattice = chain.lattice;
    pi.c_far = 1.0;
    pi.window_radius_basis = R;
    for (const IVec& n : box_points(b.d, R)) pi.weights[b.map.to_ambient(n)] = 1.0;
    return pi;
  }

  // D(z, .) support
  SiteMap<OffsetPmf> D;  // signed rows
  std::vector<IVec> Sprime;  // all targets of D
  SiteMap<char> seen;
  for (const IVec& z : S) {
    OffsetPmf diff = b.special.at(z);
    for (std::size_t i = 0; i < b.far.size(); ++i) {
      diff.support.push_back(b.far.support[i]);
      diff.prob.push_back(-b.far.prob[i]);
    }
    diff.compress(1e-15);
    D.emplace(z, diff);
    for (auto& off : D[z].support) {
      IVec w = iadd(z, off);
      if (!seen.count(w)) {
        seen[w] = 1;
        Sprime.push_back(w);
      }
    }
  }
  for (const IVec& z : S)
    if (!seen.count(z)) {
      seen[z] = 1;
      Sprime.push_back(z);
    }

  // pure-walk Green values needed: differences (x0 - w) and (z' - w)
  std::vector<IVec> gpoints;
  SiteMap<char> gseen;
  auto need = [&](const IVec& x) {
    if (!gseen.count(x)) {
      gseen[x] = 1;
      gpoints.push_back(x);
    }
  };
  std::vector<IVec> window = box_points(b.d, R);
  for (const IVec& x0 : window)
    for (const IVec& w : Sprime) need(isub(x0, w));
  for (const IVec& z : Sprime)
    for (const IVec& w : Sprime) need(isub(z, w));
  GreenTable G0(b.far, b.d, gpoints, gopt);

  // [D G0](z, y) = sum_w D(z, w) G0(y - w)
  auto DG0 = [&](const IVec& z, const IVec& y) {
    const OffsetPmf& dz = D.at(z);
    double s = 0;
    for (std::size_t i = 0; i < dz.size(); ++i)
      s += dz.prob[i] * G0.at(isub(y, iadd(z, dz.support[i])));
    return s;
  };

  // solve G_{S'S} (I - M) = G0_{S'S}, M(z, z') = [D G0](z, z')
  const int ns = (int)S.size(), nsp = (int)Sprime.size();
  Eigen::MatrixXd M(ns, ns), G0m(nsp, ns);
  for (int i = 0; i < ns; ++i)
    for (int j = 0; j < ns; ++j) M(i, j) = DG0(S[i], S[j]);
  for (int i = 0; i < nsp; ++i)
    for (int j = 0; j < ns; ++j) G0m(i, j) = G0.at(isub(S[j], Sprime[i]));
  // note G0 is symmetric (the far walk is symmetric), so G0(z' - w) = G0(w - z')
  Eigen::MatrixXd I = Eigen::MatrixXd::Identity(ns, ns);
  Eigen::MatrixXd Gm = G0m * (I - M).inverse();

  SiteMap<int> sprime_index;
  for (int i = 0; i < nsp; ++i) sprime_index[Sprime[i]] = i;

  InvariantMeasure pi;
  pi.d = chain.d;
  pi.lattice = chain.lattice;
  pi.c_far = 1.0;
  pi.window_radius_basis = R;
  std::vector<double> dg(ns);
  for (const IVec& x0 : window) {
    for (int j = 0; j < ns; ++j) dg[j] = DG0(S[j], x0);
    double v = 1.0;
    for (const IVec& z : S) {
      const OffsetPmf& dz = D.at(z);
      for (std::size_t i = 0; i < dz.size(); ++i) {
        IVec w = iadd(z, dz.support[i]);
        // G(w, x0) = G0(x0 - w) + sum_{z' in S} G(w, z') [D G0](z', x0)
        double g = G0.at(isub(x0, w));
        int wi = sprime_index.at(w);
        for (int j = 0; j < ns; ++j) g += Gm(wi, j) * dg[j];
        v += dz.prob[i] * g;
      }
    }
    pi.weights[b.map.to_ambient(x0)] = v;
  }

  double tail = G0.tail_error_bound();
  if (tail > 1e-3)
    throw std::runtime_error(
        "invariant measure: Neumann-series tail bound above tolerance, increase horizon");
  for (auto& [sep, w] : pi.weights)
    if (w < -1e-6)
      throw std::runtime_error("invariant measure: negative weight " + std::to_string(w) +
                               " (signed-measure state, modeling bug)");

  double flat = 0;
  for (const IVec& n : window)
    if (inorm_inf(n) == R) flat = std::max(flat, std::abs(pi.at(b.map.to_ambient(n)) - 1.0));
  pi.boundary_flatness = flat;
  pi.stationarity_residual =
      stationarity_residual_on(b, pi, b.map, std::max(1, b.range_basis + b.maxjump_basis));
  return pi;
}

}  // namespace

InvariantMeasure solve_invariant_measure(const DiffChain& chain,
                                         const InvariantSolveOptions& opt) {
  BasisChain b = to_basis_chain(chain);
  int R = opt.window_radius_basis > 0 ? opt.window_radius_basis : default_radius(b);
  if (chain.d <= 2) return solve_recurrent_window(chain, b, R);
  return solve_transient_green(chain, b, R, opt.green);
}

double potential_u(const DiffChain& chain, const IVec& sep) {
  double r = dnorm2(chain.to_macroscopic(sep));
  switch (chain.d) {
    case 1: return 1.0 + r;
    case 2: return std::log(1.0 + r);
    default: return -std::pow(1.0 + r, 2.0 - chain.d);
  }
}

double potential_f(const DiffChain& chain, const IVec& sep) {
  const OffsetPmf& row = chain.row(sep);
  double s = -potential_u(chain, sep);
  for (std::size_t i = 0; i < row.size(); ++i)
    s += row.prob[i] * potential_u(chain, iadd(sep, row.support[i]));
  return s;
}

double unit_integral(const DiffChain& chain, const InvariantMeasure& pi) {
  BasisChain b = to_basis_chain(chain);
  const int R = pi.window_radius_basis;
  // lattice-point density per unit of normalized volume:
  // normalized covolume = |det(walker_norm)| * ambient covolume
  double det_norm = chain.walker_norm.block(0, 0, chain.d, chain.d).determinant();
  double kappa = 1.0 / (det_norm * (double)std::max<long long>(1, b.map.basis.covolume));

  // f summed exactly over the normalized ball |x'| <= rho (window + annulus)
  int Rf = R + (chain.d == 1 ? 2 * b.maxjump_basis + 2
                             : (chain.d == 2 ? std::max(300, 6 * R) : std::max(48, 3 * R)));
  double rho = 1e300;
  for (const IVec& n : box_points(b.d, Rf))
    if (inorm_inf(n) == Rf)
      rho = std::min(rho, dnorm2(chain.to_macroscopic(b.map.to_ambient(n))));
  rho *= 0.98;

  double total = 0;
  for (const IVec& n : box_points(b.d, Rf)) {
    IVec sep = b.map.to_ambient(n);
    if (dnorm2(chain.to_macroscopic(sep)) > rho) continue;
    total += potential_f(chain, sep) * pi.at(sep);
  }
  if (chain.d >= 2) {
    // analytic far-field remainder: the far walk has covariance 2 Id in the
    // normalized metric, so f(x) ~ Delta u(x') and
    // int_{|x'|>rho} Delta u = lim flux - flux(rho)
    double rem;
    if (chain.d == 2) {
      rem = 2.0 * M_PI * (1.0 - rho / (1.0 + rho));
    } else {
      double omega = 2.0 * std::pow(M_PI, 0.5 * chain.d) / std::tgamma(0.5 * chain.d);
      rem = (chain.d - 2.0) * omega *
            (1.0 - std::pow(rho / (1.0 + rho), (double)(chain.d - 1)));
    }
    total += pi.c_far * kappa * rem;
  }
  return total;
}

InvariantMeasure unit_normalize(const DiffChain& chain, const InvariantMeasure& raw) {
  double integral = unit_integral(chain, raw);
  if (std::abs(integral) < 1e-10)
    throw std::runtime_error("unit_normalize: normalization integral vanishes");
  InvariantMeasure out = raw;
  for (auto& [k, v] : out.weights) v /= integral;
  out.c_far /= integral;
  out.stationarity_residual /= std::abs(integral);
  out.tag = InvariantMeasure::Norm::unit;
  out.unit_integral = integral;
  return out;
}

EstimateWithCI occupation_ratio_oracle(const DiffChain& chain, long long horizon,
                                       std::uint64_t replicas, std::uint64_t seed) {
  if (chain.d > 2)
    throw std::invalid_argument("occupation_ratio_oracle: recurrent chains only (d <= 2)");
  BasisChain b = to_basis_chain(chain);
  // reference ring just outside the interaction window
  std::vector<IVec> ring;
  int r0 = b.range_basis + 2;
  for (const IVec& n : box_points(b.d, r0 + 2))
    if (inorm_inf(n) > r0 - 1 && inorm_inf(n) <= r0 + 2) ring.push_back(n);

  DiscreteSampler far_sampler(b.far.prob);
  SiteMap<DiscreteSampler> special_samplers;
  for (auto& [n, row] : b.special) special_samplers.emplace(n, DiscreteSampler(row.prob));

  std::vector<double> ratios;
  for (std::uint64_t rep = 0; rep < replicas; ++rep) {
    Rng rng = make_stream(seed, {rep, stream_purpose::kWalker});
    IVec n = izero();
    double hits0 = 0, hits_ring = 0;
    for (long long t = 0; t < horizon; ++t) {
      if (n == izero()) hits0 += 1;
      if (inorm_inf(n) > r0 - 1 && inorm_inf(n) <= r0 + 2) hits_ring += 1;
      auto it = special_samplers.find(n);
      if (it == special_samplers.end())
        n = iadd(n, b.far.support[far_sampler.sample(rng)]);
      else
        n = iadd(n, b.special.at(n).support[it->second.sample(rng)]);
    }
    if (hits_ring > 0) ratios.push_back(hits0 / (hits_ring / (double)ring.size()));
  }
  return summarize(ratios, seed);
}

// ---------------------------------------------------------------------------

double gamma_ext_sq(const TwoPointTables& t, int p, const DVec& v,
                    const InvariantMeasure& pi, GammaConvention conv) {
  const Eigen::Matrix3d* coords =
      conv == GammaConvention::UnitMacroscopic ? &t.mu.norm : nullptr;
  double s = 0;
  for (const IVec& sep : t.corr_seps) s += zeta_value(t, p, v, sep, coords) * pi.at(sep);
  return s;
}

NoiseCoefficients bulk_coefficients(const TwoPointTables& t, int p,
                                    const InvariantMeasure& pi_unit) {
  NoiseCoefficients nc;
  nc.p = p;
  for (const MIdx& r1 : multi_indices(t.d, p))
    for (const MIdx& r2 : multi_indices(t.d, p)) nc.ap_indices.emplace_back(r1, r2);
  nc.ap.resize(nc.ap_indices.size(), 0.0);
  for (std::size_t i = 0; i < nc.ap_indices.size(); ++i) {
    double s = 0;
    for (const IVec& sep : t.corr_seps)
      s += eta_value(t, nc.ap_indices[i].first, nc.ap_indices[i].second, sep, &t.mu.norm) *
           pi_unit.at(sep);
    nc.ap[i] = s;
  }
  if (p == 1) {
    for (std::size_t i = 0; i < nc.ap_indices.size(); ++i) {
      const MIdx& r1 = nc.ap_indices[i].first;
      const MIdx& r2 = nc.ap_indices[i].second;
      int a = -1, bidx = -1;
      for (int k = 0; k < t.d; ++k) {
        if (r1[k] == 1) a = k;
        if (r2[k] == 1) bidx = k;
      }
      if (a >= 0 && bidx >= 0) nc.gamma_bulk_sq(a, bidx) = nc.ap[i];
    }
  }
  DVec e1 = dzero();
  e1[0] = 1.0;
  nc.gamma_ext_sq_unit = gamma_ext_sq(t, p, e1, pi_unit, GammaConvention::UnitMacroscopic);
  return nc;
}

// ---------------------------------------------------------------------------

ThetaEffResult theta_eff(const TwoPointTables& t, const Tilt& tilt,
                         const SiteMap<double>& f_table,
                         const InvariantMeasure& pi_tilted_unit,
                         const ThetaEffOptions& opt) {
  TiltedPairChain q(t, tilt);
  DiffChain dc = make_tilted_diff_chain(t, tilt);
  BasisChain b = to_basis_chain(dc);

  // active window where u or f are nonzero
  SiteMap<char> active;
  for (const IVec& sep : t.corr_seps)
    if (q.u_at(sep) != 0) active[sep] = 1;
  for (auto& [sep, v] : f_table)
    if (v != 0) active[sep] = 1;
  int active_rad = 0;
  for (auto& [sep, c] : active)
    active_rad = std::max(active_rad, inorm_inf(b.map.to_basis(sep)));
  const int exit_rad = std::max(1, opt.exit_radius_mult) * std::max(1, active_rad) + 1;

  double max_u = q.max_abs_u();
  // certified bound on the neglected post-exit factor: a walk outside the
  // exit shell can still revisit the active window; bound the expected number
  // of such visits with the pure-walk Green function
  double gbound = 0;
  {
    std::vector<IVec> pts;
    std::vector<IVec> act;
    for (auto& [sep, c] : active) act.push_back(b.map.to_basis(sep));
    for (const IVec& n : box_points(b.d, exit_rad + b.maxjump_basis))
      if (inorm_inf(n) > exit_rad)
        for (const IVec& z : act) pts.push_back(isub(z, n));
    if (!pts.empty() && t.d >= 3) {
      GreenOptions go;
      go.exact_steps = 32;
      GreenTable G(b.far, b.d, pts, go);
      for (const IVec& n : box_points(b.d, exit_rad + b.maxjump_basis)) {
        if (inorm_inf(n) <= exit_rad) continue;
        double s = 0;
        for (const IVec& z : act) s += G.at(isub(z, n));
        gbound = std::max(gbound, s);
      }
    }
  }
  double fmax = 0;
  for (auto& [sep, v] : f_table) fmax = std::max(fmax, std::abs(v));

  ThetaEffResult out;
  std::vector<double> samples;
  double worst_tail = 0;
  std::uint64_t diverged = 0;

  // outer integral against pi_v restricted to {e^u - 1 != 0}
  std::vector<std::pair<IVec, double>> starts;  // (y, (e^{u(y)}-1) pi(y))
  double fterm = 0;
  for (auto& [sep, c] : active) {
    fterm += (f_table.count(sep) ? f_table.at(sep) : 0.0) * pi_tilted_unit.at(sep);
    double w = std::expm1(q.u_at(sep)) * pi_tilted_unit.at(sep);
    if (w != 0) starts.emplace_back(sep, w);
  }

  DiscreteSampler far_sampler(b.far.prob);
  SiteMap<DiscreteSampler> special_samplers;
  for (auto& [n, row] : b.special) special_samplers.emplace(n, DiscreteSampler(row.prob));

  for (std::uint64_t rep = 0; rep < opt.replicas; ++rep) {
    Rng rng = make_stream(opt.seed, {rep, stream_purpose::kEstimator});
    double total = 0;
    for (auto& [y0, w0] : starts) {
      IVec n = b.map.to_basis(y0);
      // record u and f along the path while inside the active region
      std::vector<double> us, fs;
      long long steps = 0;
      double tail_mult = 0;
      while (steps < opt.max_steps) {
        // advance one step of the tilted difference chain
        auto sit = special_samplers.find(n);
        if (sit == special_samplers.end())
          n = iadd(n, b.far.support[far_sampler.sample(rng)]);
        else
          n = iadd(n, b.special.at(n).support[sit->second.sample(rng)]);
        ++steps;
        IVec amb = b.map.to_ambient(n);
        us.push_back(q.u_at(amb));
        fs.push_back(f_table.count(amb) ? f_table.at(amb) : 0.0);
        if (inorm_inf(n) > exit_rad) {
          tail_mult = gbound;
          break;
        }
      }
      if (steps >= opt.max_steps) ++diverged;
      double contrib;
      if (!opt.series_form) {
        double usum = 0;
        for (double u : us) usum += u;
        contrib = w0 * std::exp(usum);
      } else {
        // F = sum_s f_s + sum_T W_{T-1} (e^{u_T}-1) sum_{s>T} f_s
        std::vector<double> suffix(fs.size() + 1, 0.0);
        for (std::size_t i = fs.size(); i-- > 0;) suffix[i] = suffix[i + 1] + fs[i];
        double F = suffix[0];
        double logW = 0;
        for (std::size_t T = 0; T < us.size(); ++T) {
          if (us[T] != 0) F += std::exp(logW) * std::expm1(us[T]) * suffix[T + 1];
          logW += us[T];
        }
        contrib = w0 * F;
      }
      total += contrib;
      // truncation slack: remaining visits can change the factor by at most
      // exp(maxu * visits) - 1 (resummed) or add fmax * visits (series)
      double slack = opt.series_form
                         ? std::abs(w0) * fmax * tail_mult * std::exp(max_u * tail_mult)
                         : std::abs(contrib) * (std::exp(max_u * tail_mult) - 1.0);
      worst_tail = std::max(worst_tail, slack);
    }
    samples.push_back(opt.series_form ? fterm + total : total);
  }
  out.value = summarize(samples, opt.seed);
  out.truncation_bound = worst_tail;
  out.diverging_fraction = (double)diverged / std::max<std::uint64_t>(1, opt.replicas);
  if (out.diverging_fraction > 0.01)
    throw std::runtime_error("theta_eff: exponential functional diverging, beyond admissible tilt");
  return out;
}

ThetaEffResult nu_eff_sq(const TwoPointTables& t, int p, const Tilt& tilt,
                         const InvariantMeasure& pi_tilted_unit,
                         const ThetaEffOptions& opt) {
  // f = vartheta_v table
  TiltedPairChain q(t, tilt);
  SiteMap<double> f;
  for (const IVec& sep : t.corr_seps) f[sep] = q.vartheta_at(sep);
  ThetaEffResult r = theta_eff(t, tilt, f, pi_tilted_unit, opt);
  // macroscopic |v|: the tilt is a lattice covector, v = Sigma^{1/2} varsigma
  Eigen::Matrix3d cov = t.mu.cov;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  Eigen::Matrix3d sqrtC =
      es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
  Eigen::Vector3d vs(tilt.varsigma[0], tilt.varsigma[1], tilt.varsigma[2]);
  double vnorm = (sqrtC * vs).norm();
  double scale = std::pow(vnorm, -2.0 * p);
  r.value.value *= scale;
  r.value.stderror *= scale;
  r.truncation_bound *= scale;
  return r;
}

}  // namespace rwre
