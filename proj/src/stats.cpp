#include "rwre/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace rwre {

EstimateWithCI summarize(const std::vector<double>& samples, std::uint64_t seed) {
  EstimateWithCI e;
  e.replicas = samples.size();
  e.seed = seed;
  if (samples.empty()) return e;
  double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / samples.size();
  double ss = 0;
  for (double x : samples) ss += (x - mean) * (x - mean);
  e.value = mean;
  if (samples.size() > 1)
    e.stderror = std::sqrt(ss / (samples.size() - 1) / samples.size());
  return e;
}

EstimateWithCI pool(const std::vector<EstimateWithCI>& runs) {
  EstimateWithCI out;
  double wsum = 0, vsum = 0, var = 0;
  for (auto& r : runs) {
    double n = (double)r.replicas;
    wsum += n;
    vsum += r.value * n;
    var += n * n * r.stderror * r.stderror;
  }
  if (wsum == 0) return out;
  out.value = vsum / wsum;
  out.stderror = std::sqrt(var) / wsum;
  out.replicas = (std::uint64_t)wsum;
  return out;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double kolmogorov_pvalue(double stat) {
  if (stat <= 0) return 1.0;
  // two-sided asymptotic K distribution, alternating series
  double sum = 0;
  for (int k = 1; k <= 100; ++k) {
    double term = std::exp(-2.0 * k * k * stat * stat);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-16) break;
  }
  double p = 2.0 * sum;
  return std::clamp(p, 0.0, 1.0);
}

TestReport ks_exponential(const std::vector<double>& samples, double rate) {
  TestReport r;
  r.name = "ks_exponential";
  if (samples.empty()) return r;
  std::vector<double> s = samples;
  std::sort(s.begin(), s.end());
  double mean = std::accumulate(s.begin(), s.end(), 0.0) / s.size();
  bool estimated = rate <= 0;
  if (estimated) rate = 1.0 / mean;
  double d = 0;
  std::size_t n = s.size();
  for (std::size_t i = 0; i < n; ++i) {
    double f = 1.0 - std::exp(-rate * std::max(0.0, s[i]));
    d = std::max(d, std::abs(f - (double)(i + 1) / n));
    d = std::max(d, std::abs(f - (double)i / n));
  }
  r.statistic = d;
  r.p_value = kolmogorov_pvalue(std::sqrt((double)n) * d);
  r.estimate = mean;
  r.target = 1.0 / rate;
  r.detail = estimated ? "rate estimated from sample mean" : "fixed rate";
  return r;
}

namespace {
// regularized upper incomplete gamma Q(a,x) via series / continued fraction
double gamma_q(double a, double x) {
  if (x < 0 || a <= 0) return 1.0;
  if (x == 0) return 1.0;
  if (x < a + 1.0) {
    // series for P(a,x)
    double ap = a, sum = 1.0 / a, del = sum;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-15) break;
    }
    double p = sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
    return 1.0 - p;
  }
  // continued fraction for Q(a,x)
  double b = x + 1.0 - a, c = 1e300, dd = 1.0 / b, h = dd;
  for (int i = 1; i <= 500; ++i) {
    double an = -1.0 * i * (i - a);
    b += 2.0;
    dd = an * dd + b;
    if (std::abs(dd) < 1e-300) dd = 1e-300;
    c = b + an / c;
    if (std::abs(c) < 1e-300) c = 1e-300;
    dd = 1.0 / dd;
    double del = dd * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}
}  // namespace

double chi2_sf(double x, int dof) { return gamma_q(0.5 * dof, 0.5 * x); }

TestReport chi2_geometric(const std::vector<std::uint64_t>& counts, double q_stop) {
  TestReport r;
  r.name = "chi2_geometric";
  if (counts.empty() || q_stop <= 0 || q_stop >= 1) {
    r.detail = "degenerate input";
    return r;
  }
  std::uint64_t maxk = *std::max_element(counts.begin(), counts.end());
  double n = (double)counts.size();
  // choose K so the pooled tail bin has expected count >= 10
  std::uint64_t K = 1;
  while (K < maxk && n * std::pow(1.0 - q_stop, (double)K) >= 10.0) ++K;
  // bins: k=1..K exact, last bin = {k > K}
  std::vector<double> obs(K + 1, 0.0), exp(K + 1, 0.0);
  for (auto c : counts) {
    std::uint64_t k = std::max<std::uint64_t>(1, c);
    if (k <= K)
      obs[k - 1] += 1;
    else
      obs[K] += 1;
  }
  for (std::uint64_t k = 1; k <= K; ++k)
    exp[k - 1] = n * q_stop * std::pow(1.0 - q_stop, (double)(k - 1));
  exp[K] = n * std::pow(1.0 - q_stop, (double)K);
  double chi2 = 0;
  int bins = 0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (exp[i] < 1e-9) continue;
    chi2 += (obs[i] - exp[i]) * (obs[i] - exp[i]) / exp[i];
    ++bins;
  }
  r.statistic = chi2;
  int dof = std::max(1, bins - 1);
  r.p_value = chi2_sf(chi2, dof);
  r.detail = "bins=" + std::to_string(bins) + " dof=" + std::to_string(dof);
  return r;
}

TestReport normality_check(const std::vector<double>& samples) {
  TestReport r;
  r.name = "jarque_bera";
  std::size_t n = samples.size();
  if (n < 8) return r;
  double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double m2 = 0, m3 = 0, m4 = 0;
  for (double x : samples) {
    double d = x - mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  double skew = m3 / std::pow(m2, 1.5);
  double kurt = m4 / (m2 * m2) - 3.0;
  double jb = n / 6.0 * (skew * skew + kurt * kurt / 4.0);
  r.statistic = jb;
  r.p_value = chi2_sf(jb, 2);
  r.detail = "skew=" + std::to_string(skew) + " excess_kurt=" + std::to_string(kurt);
  return r;
}

TestReport mann_kendall(const std::vector<double>& series) {
  TestReport r;
  r.name = "mann_kendall";
  std::size_t n = series.size();
  if (n < 3) {
    r.p_value = 1.0;
    return r;
  }
  long long s = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if (series[j] > series[i]) ++s;
      if (series[j] < series[i]) --s;
    }
  double var = n * (n - 1.0) * (2.0 * n + 5.0) / 18.0;
  double z;
  if (s > 0)
    z = (s - 1) / std::sqrt(var);
  else if (s < 0)
    z = (s + 1) / std::sqrt(var);
  else
    z = 0;
  r.statistic = (double)s;
  r.p_value = 2.0 * (1.0 - normal_cdf(std::abs(z)));
  return r;
}

SlopeFit fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("fit_slope: need matching series of length >= 2");
  std::size_t n = x.size();
  double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  SlopeFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double e = y[i] - (f.intercept + f.slope * x[i]);
    sse += e * e;
  }
  if (n > 2) f.slope_stderr = std::sqrt(sse / (n - 2) / sxx);
  return f;
}

}  // namespace rwre
