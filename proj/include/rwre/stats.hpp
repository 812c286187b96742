// Estimates with uncertainty and the small test-statistic toolbox used by the
// limit-theorem estimators.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rwre {

struct EstimateWithCI {
  double value = 0.0;
  double stderror = 0.0;  // sample std / sqrt(n)
  std::uint64_t replicas = 0;
  std::uint64_t seed = 0;

  double half_width(double z = 3.0) const { return z * stderror; }
};

EstimateWithCI summarize(const std::vector<double>& samples, std::uint64_t seed = 0);
// pooled estimate of independent runs (inverse-variance-free simple pooling
// by replica counts; runs must estimate the same quantity)
EstimateWithCI pool(const std::vector<EstimateWithCI>& runs);

struct TestReport {
  std::string name;
  double statistic = 0.0;
  double p_value = 1.0;
  double estimate = 0.0;
  double stderror = 0.0;
  double target = 0.0;
  double tolerance = 0.0;  // relative unless noted
  bool pass = false;
  std::string detail;
};

// two-sided p-value of the Kolmogorov statistic sqrt(n)*D (asymptotic law)
double kolmogorov_pvalue(double stat);
// KS test of samples against Exp(rate); if rate <= 0 the rate is estimated
// from the sample mean (shape-only test, conservative with the asymptotic law)
TestReport ks_exponential(const std::vector<double>& samples, double rate = -1.0);

// chi^2 GOF of integer counts >= 1 against Geometric(success q_stop):
// P(V=k) = q_stop * (1-q_stop)^(k-1)
TestReport chi2_geometric(const std::vector<std::uint64_t>& counts, double q_stop);
double chi2_sf(double x, int dof);  // survival function

// skewness/kurtosis normality check (Jarque-Bera)
TestReport normality_check(const std::vector<double>& samples);

// Mann-Kendall trend test on a short series; p_value is two-sided.
// `statistic` > 0 means an increasing trend.
TestReport mann_kendall(const std::vector<double>& series);

// least-squares slope of y against x with standard error
struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
};
SlopeFit fit_slope(const std::vector<double>& x, const std::vector<double>& y);

double normal_cdf(double x);

}  // namespace rwre
