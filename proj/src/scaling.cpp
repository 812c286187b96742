#include "rwre/scaling.hpp"

#include <cmath>

namespace rwre {

double psi_table(int p, int d, long long N) {
  double n = (double)N;
  if (d == 1) return std::pow(n, 1.0 - 1.0 / (4.0 * p));
  if (d == 2) return n * std::pow(std::log(n), -1.0 / (2.0 * p));
  return n;
}

double omega_table(int p, int d, long long N) {
  double n = (double)N;
  return std::pow(psi_table(p, d, N) / n, 2.0 * p);
}

ScalingParams scaling_schedule(const StepDistribution& mu, int p, Regime regime,
                               long long N, const DVec& v_macro) {
  if (N < 2) throw std::invalid_argument("scaling_schedule: N >= 2 required");
  if (p < 1) throw std::invalid_argument("scaling_schedule: p >= 1 required");
  if (regime == Regime::C && mu.d != 2)
    throw std::invalid_argument("regime C requires d = 2");
  if (regime == Regime::D && mu.d < 3)
    throw std::invalid_argument("regime D requires d >= 3");

  ScalingParams sp;
  sp.N = N;
  sp.p = p;
  sp.d = mu.d;
  sp.regime = regime;
  sp.v_macro = v_macro;
  sp.psi_N = psi_table(p, mu.d, N);
  sp.omega_N = omega_table(p, mu.d, N);

  double n = (double)N;
  double scale = 0;
  switch (regime) {
    case Regime::A: scale = 1.0 / std::sqrt(n); break;
    case Regime::B: scale = std::sqrt(std::pow(n, -0.5) * sp.psi_N / n); break;
    case Regime::C: scale = std::pow(std::log(n), -1.0 / (2.0 * p)); break;
    case Regime::D: scale = 1.0; break;
  }
  sp.varsigma_macro = dscale(v_macro, scale);
  // lattice covector: vs_lat = Sigma^{-1/2} vs_macro (the map is symmetric)
  sp.varsigma = mu.to_macroscopic(sp.varsigma_macro);

  MgfOracle mgf(mu.pmf, mu.d);
  sp.logM = mgf.logM(sp.varsigma);
  DVec g = mgf.grad_logM(sp.varsigma);
  sp.d_N = dscale(g, n);

  double vs_norm = dnorm2(sp.varsigma_macro);
  double bulk_branch = std::pow(n, 0.5 * p + 0.25 * (mu.d - 2));
  double extremal_branch =
      vs_norm > 0 ? std::pow(n, 0.25 * (mu.d - 2)) / std::pow(vs_norm, p) : bulk_branch;
  if (regime == Regime::A) {
    sp.B_N = bulk_branch;
    sp.B_N_other = extremal_branch;
  } else {
    sp.B_N = extremal_branch;
    sp.B_N_other = bulk_branch;
  }
  return sp;
}

double rescale_constant_log(const ScalingParams& sp, double t, const DVec& x_macro) {
  double n = (double)sp.N;
  // vs_macro . d_N_macro = vs_lat . d_N_lat (invariant pairing)
  double vd = ddot(sp.varsigma, sp.d_N);
  return std::sqrt(n) * ddot(sp.varsigma_macro, x_macro) + (vd - n * sp.logM) * t -
         sp.log_nu_tilt;
}

double rescale_constant_log_path(const ScalingParams& sp, long long r, const IVec& z) {
  return ddot(sp.varsigma, z) - (double)r * sp.logM - sp.log_nu_tilt;
}

InitialProfile dirac_profile() {
  InitialProfile ip;
  ip.dirac = true;
  ip.nu.support = {izero()};
  ip.nu.prob = {1.0};
  return ip;
}

InitialProfile gaussian_profile(const StepDistribution& mu, long long N, double width,
                                double cutoff_sigmas) {
  InitialProfile ip;
  ip.dirac = false;
  ip.macro_width = width;
  // walker-lattice sites weighted by the macroscopic Gaussian of width w
  // (positions scale as N^{-1/2} x_macro(z)); closure pruned by the cutoff
  auto weight = [&](const IVec& z) {
    DVec xm = dscale(mu.to_macroscopic(z), 1.0 / std::sqrt((double)N));
    double q = ddot(xm, xm) / (width * width);
    return q > cutoff_sigmas * cutoff_sigmas ? 0.0 : std::exp(-0.5 * q);
  };
  std::vector<IVec> frontier{izero()};
  SiteMap<char> seen;
  seen[izero()] = 1;
  double s = 0;
  ip.nu.support.clear();
  ip.nu.prob.clear();
  while (!frontier.empty()) {
    std::vector<IVec> next;
    for (const IVec& x : frontier) {
      double w = weight(x);
      if (w > 0) {
        ip.nu.support.push_back(x);
        ip.nu.prob.push_back(w);
        s += w;
      }
      if (w == 0) continue;  // outside the cutoff: stop expanding
      for (const IVec& g : mu.pmf.support)
        for (const IVec& y : {iadd(x, g), isub(x, g)}) {
          if (seen.count(y)) continue;
          seen[y] = 1;
          next.push_back(y);
        }
    }
    frontier = std::move(next);
  }
  if (s <= 0) throw std::runtime_error("gaussian_profile: empty profile");
  for (auto& p : ip.nu.prob) p /= s;
  ip.nu.compress(0.0);
  return ip;
}

GoodnessReport goodness_check(const StepDistribution& mu, const ScalingParams& sp,
                              const InitialProfile& nu, double eps_ic) {
  // m_N = tilted initial profile in macroscopic coordinates; check
  // sup_a (m_N, G_t(a-.)) <= C t^{eps-1} over a grid of scales
  GoodnessReport rep;
  rep.eps_ic = eps_ic;
  double n = (double)sp.N;
  // tilted weights
  std::vector<double> w(nu.nu.size());
  double z = 0;
  for (std::size_t i = 0; i < nu.nu.size(); ++i) {
    w[i] = nu.nu.prob[i] * std::exp(ddot(sp.varsigma, nu.nu.support[i]));
    z += w[i];
  }
  for (auto& x : w) x /= z;

  HeatKernelSpec G = HeatKernelSpec::standard(sp.d);
  double worst = 0;
  for (double t : {1.0 / n, 4.0 / n, 0.001, 0.01, 0.1, 0.5, 1.0}) {
    double teff = std::max(t, 1.0 / n);
    // scan a over a coarse grid around the profile
    double sup = 0;
    double lim = 2.0 * nu.macro_width + 3.0 * std::sqrt(teff);
    int grid = 8;
    for (int gx = -grid; gx <= grid; ++gx)
      for (int gy = (sp.d >= 2 ? -grid : 0); gy <= (sp.d >= 2 ? grid : 0); ++gy) {
        DVec a = {lim * gx / grid, sp.d >= 2 ? lim * gy / grid : 0.0, 0.0};
        double pair = 0;
        for (std::size_t i = 0; i < nu.nu.size(); ++i) {
          DVec xm = dscale(mu.to_macroscopic(nu.nu.support[i]), 1.0 / std::sqrt(n));
          pair += w[i] * G.value(teff, dsub(a, xm));
        }
        sup = std::max(sup, pair);
      }
    worst = std::max(worst, sup * std::pow(teff, 1.0 - eps_ic));
  }
  rep.fitted_c = worst;
  rep.pass = std::isfinite(worst);
  return rep;
}

}  // namespace rwre
