#include "rwre/env_models.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>

namespace rwre {

namespace {

std::vector<IVec> unit_directions(int d) {
  std::vector<IVec> dirs;
  for (int i = 0; i < d; ++i) {
    IVec e = izero();
    e[i] = 1;
    dirs.push_back(e);
    e[i] = -1;
    dirs.push_back(e);
  }
  return dirs;
}

// Gauss-Legendre nodes/weights on [-1,1]
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1, p1 = 0;
      for (int j = 0; j < n; ++j) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2 * j + 1) * t * p1 - j * p2) / (j + 1);
      }
      double dp = n * (t * p0 - p1) / (t * t - 1);
      double dt = p0 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    double p0 = 1, p1 = 0;
    for (int j = 0; j < n; ++j) {
      double p2 = p1;
      p1 = p0;
      p0 = ((2 * j + 1) * t * p1 - j * p2) / (j + 1);
    }
    double dp = n * (t * p0 - p1) / (t * t - 1);
    x[i] = t;
    w[i] = 2.0 / ((1 - t * t) * dp * dp);
  }
}

// Exact elementary machinery per model --------------------------------------

struct ElementaryModel {
  EnvironmentSpec spec;
  std::vector<IVec> dirs;  // row support offsets
  OffsetPmf mu;            // annealed elementary law
  std::vector<IVec> corr_range_set;  // separations with dependent rows

  int corr_range_inf() const {
    int r = 0;
    for (auto& v : corr_range_set) r = std::max(r, inorm_inf(v));
    return r;
  }
};

// landscape helpers: integrate a functional of the log-weights over the
// bounded uniform law with a tensor Gauss-Legendre rule
struct LandscapeQuadrature {
  std::vector<double> nodes, weights;  // on [-A, A], weights normalized to 1
  explicit LandscapeQuadrature(double amplitude, int n = 12) {
    gauss_legendre(n, nodes, weights);
    for (auto& t : nodes) t *= amplitude;
    for (auto& w : weights) w *= 0.5;  // Lebesgue/(2A) normalization
    if (amplitude == 0) {
      nodes.assign(1, 0.0);
      weights.assign(1, 1.0);
    }
  }
};

// row probabilities of the landscape kernel given log-weights at x + supp
void landscape_row(const EnvironmentSpec& s, const std::vector<double>& omega_at_supp,
                   std::vector<double>& out) {
  double z = 0;
  out.resize(s.landscape_support.size());
  for (std::size_t i = 0; i < s.landscape_support.size(); ++i) {
    out[i] = s.landscape_b[i] * std::exp(omega_at_supp[i]);
    z += out[i];
  }
  for (auto& p : out) p /= z;
}

ElementaryModel make_elementary(const EnvironmentSpec& spec_in) {
  spec_in.check_shape();
  ElementaryModel em;
  em.spec = spec_in;
  EnvironmentSpec& spec = em.spec;
  if (spec.model == EnvironmentSpec::Model::RandomLandscape && spec.landscape_b.empty())
    spec.landscape_b.assign(spec.landscape_support.size(), 1.0);
  switch (spec.model) {
    case EnvironmentSpec::Model::NearestNeighborIID: {
      em.dirs = unit_directions(spec.d);
      em.mu.support = em.dirs;
      em.mu.prob.assign(em.dirs.size(), 1.0 / em.dirs.size());
      em.corr_range_set = {izero()};
      break;
    }
    case EnvironmentSpec::Model::SymmetricLazy: {
      em.dirs.push_back(izero());
      for (auto& e : unit_directions(spec.d)) em.dirs.push_back(e);
      em.mu.support = em.dirs;
      em.mu.prob.assign(em.dirs.size(), 0.0);
      em.mu.prob[0] = 0.5;  // E[U] = 1/2
      for (std::size_t i = 1; i < em.dirs.size(); ++i)
        em.mu.prob[i] = 0.5 / (2.0 * spec.d);
      em.corr_range_set = {izero()};
      break;
    }
    case EnvironmentSpec::Model::RandomLandscape: {
      em.dirs = spec.landscape_support;
      // annealed law by quadrature over the site weights in supp b
      LandscapeQuadrature q(spec.weights.amplitude);
      int m = (int)em.dirs.size();
      std::vector<int> idx(m, 0);
      std::vector<double> omega(m), row;
      std::vector<double> acc(m, 0.0);
      for (;;) {
        double w = 1;
        for (int i = 0; i < m; ++i) {
          omega[i] = q.nodes[idx[i]];
          w *= q.weights[idx[i]];
        }
        landscape_row(spec, omega, row);
        for (int i = 0; i < m; ++i) acc[i] += w * row[i];
        int carry = 0;
        while (carry < m && ++idx[carry] == (int)q.nodes.size()) idx[carry++] = 0;
        if (carry == m) break;
      }
      em.mu.support = em.dirs;
      em.mu.prob = acc;
      em.mu.normalize();
      // rows at x1, x2 share weights iff (x1+supp) meets (x2+supp)
      for (auto& a : em.dirs)
        for (auto& b : em.dirs) {
          IVec v = isub(a, b);
          em.corr_range_set.push_back(v);
        }
      break;
    }
  }
  em.mu.compress(0.0);
  return em;
}

bool rows_dependent(const ElementaryModel& em, const IVec& sep) {
  for (auto& v : em.corr_range_set)
    if (v == sep) return true;
  return false;
}

// exact joint law E[K(sep,.) (x) K(0,.)] of two elementary rows
PairPmf elementary_pair(const ElementaryModel& em, const IVec& sep) {
  const EnvironmentSpec& s = em.spec;
  if (!rows_dependent(em, sep)) return tensor(em.mu, em.mu);

  PairPmf out;
  switch (s.model) {
    case EnvironmentSpec::Model::NearestNeighborIID: {
      int m = (int)em.dirs.size();
      double e2_same, e2_cross;
      if (s.weights.kind == WeightLaw::Kind::Uniform01) {
        e2_same = uniform01_moment(2);           // E w^2
        e2_cross = 0.5 - uniform01_moment(2);    // E w(1-w)
      } else {
        e2_same = dirichlet_second(s.weights.alpha, m, true);
        e2_cross = dirichlet_second(s.weights.alpha, m, false);
      }
      for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) {
          out.support.push_back({em.dirs[a], em.dirs[b]});
          out.prob.push_back(a == b ? e2_same : e2_cross);
        }
      break;
    }
    case EnvironmentSpec::Model::SymmetricLazy: {
      double eu2 = uniform01_moment(2);        // E U^2
      double eu1m = 0.5 - eu2;                 // E U(1-U)
      double e1m2 = 1.0 - 2.0 * 0.5 + eu2;     // E (1-U)^2
      int twod = 2 * s.d;
      for (std::size_t a = 0; a < em.dirs.size(); ++a)
        for (std::size_t b = 0; b < em.dirs.size(); ++b) {
          bool sa = em.dirs[a] == izero(), sb = em.dirs[b] == izero();
          double p;
          if (sa && sb)
            p = eu2;
          else if (sa || sb)
            p = eu1m / twod;
          else
            p = e1m2 / (twod * twod);
          out.support.push_back({em.dirs[a], em.dirs[b]});
          out.prob.push_back(p);
        }
      break;
    }
    case EnvironmentSpec::Model::RandomLandscape: {
      // shared weights live on (sep + supp) u (supp)
      std::vector<IVec> sites;
      auto add_site = [&](const IVec& v) {
        for (auto& u : sites)
          if (u == v) return;
        sites.push_back(v);
      };
      for (auto& u : em.dirs) add_site(iadd(sep, u));
      for (auto& u : em.dirs) add_site(u);
      int m = (int)sites.size();
      if (m > 6)
        throw std::runtime_error(
            "RandomLandscape: exact two-point oracle limited to <=6 shared weights; "
            "use the Monte Carlo fallback");
      LandscapeQuadrature q(s.weights.amplitude);
      int nsup = (int)em.dirs.size();
      std::vector<int> idx(m, 0);
      std::vector<double> omega(m);
      std::vector<double> row1(nsup), row2(nsup), w1(nsup), w2(nsup);
      std::vector<double> acc(nsup * nsup, 0.0);
      // index of each row's weight sites in `sites`
      std::vector<int> map1(nsup), map2(nsup);
      auto find_site = [&](const IVec& v) {
        for (int i = 0; i < m; ++i)
          if (sites[i] == v) return i;
        return -1;
      };
      for (int i = 0; i < nsup; ++i) {
        map1[i] = find_site(iadd(sep, em.dirs[i]));
        map2[i] = find_site(em.dirs[i]);
      }
      for (;;) {
        double w = 1;
        for (int i = 0; i < m; ++i) {
          omega[i] = q.nodes[idx[i]];
          w *= q.weights[idx[i]];
        }
        for (int i = 0; i < nsup; ++i) {
          w1[i] = omega[map1[i]];
          w2[i] = omega[map2[i]];
        }
        landscape_row(s, w1, row1);
        landscape_row(s, w2, row2);
        for (int a = 0; a < nsup; ++a)
          for (int b = 0; b < nsup; ++b) acc[a * nsup + b] += w * row1[a] * row2[b];
        int carry = 0;
        while (carry < m && ++idx[carry] == (int)q.nodes.size()) idx[carry++] = 0;
        if (carry == m) break;
      }
      for (int a = 0; a < nsup; ++a)
        for (int b = 0; b < nsup; ++b) {
          out.support.push_back({em.dirs[a], em.dirs[b]});
          out.prob.push_back(acc[a * nsup + b]);
        }
      break;
    }
  }
  out.compress(0.0);
  return out;
}

double pair_tv_distance(const PairPmf& a, const PairPmf& b) {
  PairPmf d = a;
  for (std::size_t i = 0; i < b.size(); ++i) {
    d.support.push_back(b.support[i]);
    d.prob.push_back(-b.prob[i]);
  }
  d.compress(0.0);
  double tv = 0;
  for (double p : d.prob) tv += std::abs(p);
  return 0.5 * tv;
}

}  // namespace

std::string EnvironmentSpec::model_name() const {
  switch (model) {
    case Model::NearestNeighborIID: return "nearest_neighbor_iid";
    case Model::SymmetricLazy: return "symmetric_lazy";
    case Model::RandomLandscape: return "random_landscape";
  }
  return "?";
}

void EnvironmentSpec::check_shape() const {
  if (d < 1 || d > kMaxDim)
    throw std::invalid_argument("EnvironmentSpec: dimension must be in 1..3");
  if (composite_steps < 0)
    throw std::invalid_argument("EnvironmentSpec: composite_steps must be positive");
  switch (model) {
    case Model::NearestNeighborIID:
      if (d == 1) {
        if (weights.kind == WeightLaw::Kind::BoundedLogWeights)
          throw std::invalid_argument("NearestNeighborIID: weight law must be uniform01 or dirichlet");
      } else if (weights.kind != WeightLaw::Kind::SymmetricDirichlet) {
        throw std::invalid_argument("NearestNeighborIID d>=2: weight law must be symmetric_dirichlet");
      }
      break;
    case Model::SymmetricLazy:
      if (weights.kind != WeightLaw::Kind::Uniform01)
        throw std::invalid_argument("SymmetricLazy: weight law must be uniform01");
      break;
    case Model::RandomLandscape: {
      if (weights.kind != WeightLaw::Kind::BoundedLogWeights)
        throw std::invalid_argument("RandomLandscape: weight law must be bounded_log_weights");
      if (landscape_support.empty())
        throw std::invalid_argument("RandomLandscape: empty support function");
      if (!landscape_b.empty() && landscape_b.size() != landscape_support.size())
        throw std::invalid_argument("RandomLandscape: b values must match support");
      for (double b : landscape_b)
        if (b <= 0) throw std::invalid_argument("RandomLandscape: b must be positive on support");
      break;
    }
  }
}

MgfOracle::MgfOracle(const OffsetPmf& mu, int d) : mu_(mu), d_(d) {
  double mx = mu.max_two_norm();
  // finite support admits every tilt; cap to keep reweighting well-conditioned
  z0_ = mx > 0 ? 4.0 / mx : 1.0;
}

void MgfOracle::check(const DVec& v) const {
  double n2 = dnorm2(v);
  if (n2 > z0_ + 1e-12) {
    std::ostringstream os;
    os << "MgfOracle: |tilt|=" << n2 << " exceeds admissible radius " << z0_;
    throw std::domain_error(os.str());
  }
}

double MgfOracle::M(const DVec& v) const {
  check(v);
  double s = 0;
  for (std::size_t i = 0; i < mu_.size(); ++i)
    s += mu_.prob[i] * std::exp(ddot(v, mu_.support[i]));
  return s;
}

double MgfOracle::logM(const DVec& v) const { return std::log(M(v)); }

DVec MgfOracle::grad_logM(const DVec& v) const {
  check(v);
  double m = 0;
  DVec g = dzero();
  for (std::size_t i = 0; i < mu_.size(); ++i) {
    double w = mu_.prob[i] * std::exp(ddot(v, mu_.support[i]));
    m += w;
    g = dadd(g, dscale(to_dvec(mu_.support[i]), w));
  }
  return dscale(g, 1.0 / m);
}

Eigen::Matrix3d MgfOracle::hessian_logM(const DVec& v) const {
  check(v);
  double m = 0;
  DVec g = dzero();
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < mu_.size(); ++i) {
    double w = mu_.prob[i] * std::exp(ddot(v, mu_.support[i]));
    m += w;
    g = dadd(g, dscale(to_dvec(mu_.support[i]), w));
    for (int a = 0; a < d_; ++a)
      for (int b = 0; b < d_; ++b) h(a, b) += w * mu_.support[i][a] * mu_.support[i][b];
  }
  h /= m;
  for (int a = 0; a < d_; ++a)
    for (int b = 0; b < d_; ++b) h(a, b) -= g[a] * g[b] / (m * m);
  for (int a = d_; a < 3; ++a) h(a, a) = 1.0;
  return h;
}

PairPmf TwoPointTables::rho_at(const IVec& sep) const {
  PairPmf out;
  auto it = joint.find(sep);
  if (it == joint.end()) return out;  // identically zero beyond range
  out = it->second;
  for (std::size_t i = 0; i < indep.size(); ++i) {
    out.support.push_back(indep.support[i]);
    out.prob.push_back(-indep.prob[i]);
  }
  out.compress(1e-15);
  return out;
}

OffsetPmf TwoPointTables::diff_step(const IVec& sep) const {
  auto it = joint.find(sep);
  if (it == joint.end()) return diff_far;
  return it->second.difference();
}

StepDistribution build_step_distribution(const EnvironmentSpec& spec) {
  ElementaryModel em = make_elementary(spec);
  int cs = spec.effective_composite_steps();
  OffsetPmf mu = em.mu;
  for (int i = 1; i < cs; ++i) mu = convolve(mu, em.mu);

  StepDistribution sd;
  sd.d = spec.d;
  sd.pmf = mu;
  sd.mean_vec = mu.mean();
  sd.cov = Eigen::Matrix3d::Identity();
  for (int i = 0; i < spec.d; ++i)
    for (int j = 0; j < spec.d; ++j) sd.cov(i, j) = mu.cov(i, j);

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(sd.cov);
  if (es.eigenvalues().minCoeff() < 1e-12) {
    std::ostringstream os;
    os << "degenerate weight law: step covariance has eigenvalue "
       << es.eigenvalues().minCoeff() << " (support in a proper subspace)";
    throw std::runtime_error(os.str());
  }
  Eigen::Vector3d inv_sqrt = es.eigenvalues().cwiseSqrt().cwiseInverse();
  sd.norm = es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose();
  return sd;
}

MgfOracle mgf_oracle(const StepDistribution& mu) { return MgfOracle(mu.pmf, mu.d); }

TwoPointTables build_two_point_tables(const EnvironmentSpec& spec) {
  ElementaryModel em = make_elementary(spec);
  int cs = spec.effective_composite_steps();

  TwoPointTables t;
  t.d = spec.d;
  t.composite_steps = cs;
  t.mu = build_step_distribution(spec);
  t.mu_elementary = em.mu;
  t.indep = tensor(t.mu.pmf, t.mu.pmf);
  t.diff_far = difference_law(t.mu.pmf, t.mu.pmf);

  int elem_step = em.mu.max_inf_radius();
  int rbuild = em.corr_range_inf() + 2 * elem_step * (cs - 1);

  // cache elementary pair tables within reach
  SiteMap<PairPmf> elem_cache;
  auto elem_at = [&](const IVec& sep) -> const PairPmf& {
    auto it = elem_cache.find(sep);
    if (it != elem_cache.end()) return it->second;
    auto [jt, ok] = elem_cache.emplace(sep, elementary_pair(em, sep));
    return jt->second;
  };

  std::vector<IVec> diff_gens = t.diff_far.support;

  // enumerate candidate separations in the build window
  std::vector<IVec> cands;
  IVec v = izero();
  std::function<void(int)> rec = [&](int dim) {
    if (dim == spec.d) {
      cands.push_back(v);
      return;
    }
    for (int c = -rbuild; c <= rbuild; ++c) {
      v[dim] = c;
      rec(dim + 1);
    }
    v[dim] = 0;
  };
  rec(0);

  for (const IVec& sep : cands) {
    // compose cs elementary two-point steps starting at this separation
    PairPmf cur;
    cur.support.push_back({izero(), izero()});
    cur.prob.push_back(1.0);
    for (int s = 0; s < cs; ++s) {
      PairPmf next;
      for (std::size_t i = 0; i < cur.size(); ++i) {
        IVec now = iadd(sep, isub(cur.support[i][0], cur.support[i][1]));
        const PairPmf& step = elem_at(now);
        for (std::size_t j = 0; j < step.size(); ++j) {
          next.support.push_back({iadd(cur.support[i][0], step.support[j][0]),
                                  iadd(cur.support[i][1], step.support[j][1])});
          next.prob.push_back(cur.prob[i] * step.prob[j]);
        }
      }
      next.compress(0.0);
      cur = std::move(next);
    }
    if (pair_tv_distance(cur, t.indep) > 1e-13) {
      t.joint.emplace(sep, std::move(cur));
      t.corr_seps.push_back(sep);
      t.range_inf = std::max(t.range_inf, inorm_inf(sep));
      for (auto& pr : t.joint[sep].difference().support) diff_gens.push_back(pr);
    }
  }

  t.walker_lattice = lattice_basis_from(t.mu.pmf.support, spec.d);
  t.diff_lattice = lattice_basis_from(diff_gens, spec.d);
  return t;
}

TwoPointKernel two_point_kernel(const EnvironmentSpec& spec, const IVec& separation) {
  TwoPointTables t = build_two_point_tables(spec);
  TwoPointKernel k;
  k.separation = separation;
  k.beyond_range = !t.in_range(separation);
  k.joint = t.joint_at(separation);
  k.rho = t.rho_at(separation);
  return k;
}

TwoPointKernel two_point_kernel_mc(const EnvironmentSpec& spec, const IVec& separation,
                                   std::uint64_t samples, std::uint64_t seed) {
  // Monte Carlo over environments: both rows are exact given the environment,
  // so one sample contributes a full outer product.
  int cs = spec.effective_composite_steps();
  std::vector<std::array<IVec, 2>> sup;
  std::vector<double> sum, sumsq;
  auto slot = [&](const IVec& a, const IVec& b) {
    std::array<IVec, 2> pr{a, b};
    for (std::size_t i = 0; i < sup.size(); ++i)
      if (sup[i] == pr) return i;
    sup.push_back(pr);
    sum.push_back(0);
    sumsq.push_back(0);
    return sup.size() - 1;
  };

  for (std::uint64_t rep = 0; rep < samples; ++rep) {
    EnvironmentSampler env(spec, seed, rep);
    // enumerate the joint composite step of walkers at (separation, 0) exactly
    // under this environment realization
    PairPmf cur;
    cur.support.push_back({separation, izero()});
    cur.prob.push_back(1.0);
    for (int s = 0; s < cs; ++s) {
      PairPmf next;
      for (std::size_t i = 0; i < cur.size(); ++i) {
        KernelRow r1 = env.row(s, cur.support[i][0]);
        KernelRow r2 = env.row(s, cur.support[i][1]);
        for (std::size_t a = 0; a < r1.pmf.size(); ++a)
          for (std::size_t b = 0; b < r2.pmf.size(); ++b) {
            next.support.push_back({iadd(cur.support[i][0], r1.pmf.support[a]),
                                    iadd(cur.support[i][1], r2.pmf.support[b])});
            next.prob.push_back(cur.prob[i] * r1.pmf.prob[a] * r2.pmf.prob[b]);
          }
      }
      next.compress(0.0);
      cur = std::move(next);
    }
    for (std::size_t i = 0; i < cur.size(); ++i) {
      IVec a = isub(cur.support[i][0], separation);
      std::size_t k = slot(a, cur.support[i][1]);
      sum[k] += cur.prob[i];
      sumsq[k] += cur.prob[i] * cur.prob[i];
    }
  }

  TwoPointKernel out;
  out.separation = separation;
  for (std::size_t i = 0; i < sup.size(); ++i) {
    double mean = sum[i] / samples;
    double var = sumsq[i] / samples - mean * mean;
    out.joint.support.push_back(sup[i]);
    out.joint.prob.push_back(mean);
    out.joint_stderr.push_back(std::sqrt(std::max(0.0, var) / samples));
  }
  StepDistribution mu = build_step_distribution(spec);
  PairPmf indep = tensor(mu.pmf, mu.pmf);
  out.rho = out.joint;
  for (std::size_t i = 0; i < indep.size(); ++i) {
    out.rho.support.push_back(indep.support[i]);
    out.rho.prob.push_back(-indep.prob[i]);
  }
  out.rho.compress(0.0);
  return out;
}

int symmetry_order(const EnvironmentSpec& spec) {
  TwoPointTables t = build_two_point_tables(spec);
  const PairPmf& at0 = t.joint_at(izero());
  bool any_random = false;
  for (int deg = 1; deg <= 4; ++deg) {
    for (const MIdx& r : multi_indices(spec.d, deg)) {
      double cross = 0;
      for (std::size_t i = 0; i < at0.size(); ++i)
        cross += at0.prob[i] * ipow_midx(at0.support[i][0], r) *
                 ipow_midx(at0.support[i][1], r);
      double m = 0;
      for (std::size_t i = 0; i < t.mu.pmf.size(); ++i)
        m += t.mu.pmf.prob[i] * ipow_midx(t.mu.pmf.support[i], r);
      double var = cross - m * m;
      if (var > 1e-12) return deg;
      if (std::abs(var) > 1e-14) any_random = true;
    }
  }
  if (!any_random) throw std::runtime_error("kernel is deterministic");
  throw std::runtime_error("unsupported symmetry order (p > 4)");
}

DiagnosticReport validate_assumptions(const EnvironmentSpec& spec) {
  DiagnosticReport rep;
  auto add = [&](const std::string& name, bool pass, const std::string& detail) {
    rep.checks.push_back({name, pass, detail});
  };

  TwoPointTables t;
  try {
    t = build_two_point_tables(spec);
  } catch (const std::exception& e) {
    add("construct", false, e.what());
    return rep;
  }

  // (1)+(2) i.i.d. time slices and translation invariance hold by construction
  add("iid_time_slices", true, "kernel rows drawn independently per time index");
  add("translation_invariance", true, "row law depends on the site only through shared weights");

  // (3) mass conservation and moments
  double mass_err = std::abs(t.mu.pmf.total_mass() - 1.0);
  EnvironmentSampler env(spec, 0x5eedu, 0);
  for (long long r = 0; r < 3; ++r)
    for (int k = -2; k <= 2; ++k) {
      IVec x = izero();
      x[0] = k;
      mass_err = std::max(mass_err, std::abs(env.row(r, x).pmf.total_mass() - 1.0));
    }
  add("mass_conservation", mass_err < 1e-12, "max row mass error " + std::to_string(mass_err));

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(t.mu.cov);
  bool spd = true;
  for (int i = 0; i < spec.d; ++i) spd = spd && es.eigenvalues()(i) > 1e-12;
  add("covariance_spd", spd, "min eigenvalue " + std::to_string(es.eigenvalues().minCoeff()));

  // normalized covariance must be the identity
  Eigen::Matrix3d nc = t.mu.norm * t.mu.cov * t.mu.norm;
  double id_err = 0;
  for (int i = 0; i < spec.d; ++i)
    for (int j = 0; j < spec.d; ++j) id_err = std::max(id_err, std::abs(nc(i, j) - (i == j ? 1.0 : 0.0)));
  add("identity_covariance_after_normalization", id_err < 1e-10,
      "max deviation " + std::to_string(id_err));

  // (4) symmetry order is well defined
  try {
    int p = symmetry_order(spec);
    add("symmetry_order", true, "p = " + std::to_string(p));
  } catch (const std::exception& e) {
    add("symmetry_order", false, e.what());
  }

  // (5) finite interaction range: rho vanishes on a ring outside the range
  double worst_tv = 0;
  for (int k = 1; k <= 2; ++k) {
    IVec sep = izero();
    sep[0] = t.range_inf + k;
    worst_tv = std::max(worst_tv, pair_tv_distance(t.joint_at(sep), t.indep));
  }
  add("finite_interaction_range", worst_tv < 1e-12,
      "range_inf = " + std::to_string(t.range_inf) + ", ring TV " + std::to_string(worst_tv));

  // (6) irreducibility of the difference chain on the model's sublattice
  bool irr = same_sublattice(t.diff_lattice, t.walker_lattice);
  std::ostringstream os;
  os << "difference lattice covolume " << t.diff_lattice.covolume << ", walker covolume "
     << t.walker_lattice.covolume;
  if (!irr) os << " (difference chain confined to a proper sublattice)";
  add("irreducibility", irr, os.str());

  return rep;
}

// ---------------------------------------------------------------------------

EnvironmentSampler::EnvironmentSampler(const EnvironmentSpec& spec,
                                       std::uint64_t master_seed, std::uint64_t env_id)
    : spec_(spec), master_(master_seed), env_id_(env_id) {
  spec_.check_shape();
  if (spec_.model == EnvironmentSpec::Model::RandomLandscape) {
    dirs_ = spec_.landscape_support;
    if (spec_.landscape_b.empty()) spec_.landscape_b.assign(dirs_.size(), 1.0);
  } else if (spec_.model == EnvironmentSpec::Model::SymmetricLazy) {
    dirs_.push_back(izero());
    for (auto& e : unit_directions(spec_.d)) dirs_.push_back(e);
  } else {
    dirs_ = unit_directions(spec_.d);
  }
}

int EnvironmentSampler::elementary_range() const {
  if (spec_.model != EnvironmentSpec::Model::RandomLandscape) return 0;
  int r = 0;
  for (auto& a : dirs_)
    for (auto& b : dirs_) r = std::max(r, inorm_inf(isub(a, b)));
  return r;
}

double EnvironmentSampler::log_weight(long long time, const IVec& site) const {
  Rng rng = make_stream(master_, {env_id_, stream_purpose::kKernelRow,
                                  (std::uint64_t)time, site_key(site)});
  return sample_bounded_log_weight(rng, spec_.weights.amplitude);
}

void EnvironmentSampler::row_probs(long long time, const IVec& site,
                                   std::vector<double>& out) const {
  switch (spec_.model) {
    case EnvironmentSpec::Model::NearestNeighborIID: {
      Rng rng = make_stream(master_, {env_id_, stream_purpose::kKernelRow,
                                      (std::uint64_t)time, site_key(site)});
      int m = (int)dirs_.size();
      out.resize(m);
      if (spec_.weights.kind == WeightLaw::Kind::Uniform01) {
        double w = rng.uniform();
        out[0] = w;
        out[1] = 1.0 - w;
      } else {
        sample_dirichlet(rng, spec_.weights.alpha, m, out.data());
      }
      break;
    }
    case EnvironmentSpec::Model::SymmetricLazy: {
      Rng rng = make_stream(master_, {env_id_, stream_purpose::kKernelRow,
                                      (std::uint64_t)time, site_key(site)});
      double u = rng.uniform();
      out.assign(dirs_.size(), (1.0 - u) / (2.0 * spec_.d));
      out[0] = u;
      break;
    }
    case EnvironmentSpec::Model::RandomLandscape: {
      std::vector<double> omega(dirs_.size());
      for (std::size_t i = 0; i < dirs_.size(); ++i)
        omega[i] = log_weight(time, iadd(site, dirs_[i]));
      landscape_row(spec_, omega, out);
      break;
    }
  }
}

KernelRow EnvironmentSampler::row(long long time, const IVec& site) const {
  KernelRow out;
  out.site = site;
  out.time = time;
  out.pmf.support = dirs_;
  row_probs(time, site, out.pmf.prob);
  return out;
}

KernelRow sample_kernel_row(const EnvironmentSpec& spec, std::uint64_t master_seed,
                            std::uint64_t env_id, long long elementary_time,
                            const IVec& site) {
  EnvironmentSampler env(spec, master_seed, env_id);
  return env.row(elementary_time, site);
}

}  // namespace rwre
