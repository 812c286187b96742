// Closed catalog of weight laws with exact low-order moments.
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "rwre/rng.hpp"

namespace rwre {

struct WeightLaw {
  enum class Kind { Uniform01, SymmetricDirichlet, BoundedLogWeights };
  Kind kind = Kind::Uniform01;
  double alpha = 1.0;      // Dirichlet concentration
  double amplitude = 1.0;  // bounded log-weights: omega ~ Uniform[-A, A]

  std::string name() const {
    switch (kind) {
      case Kind::Uniform01: return "uniform01";
      case Kind::SymmetricDirichlet: return "symmetric_dirichlet";
      case Kind::BoundedLogWeights: return "bounded_log_weights";
    }
    return "?";
  }
};

// moments of U ~ Uniform[0,1]
inline double uniform01_moment(int k) { return 1.0 / (k + 1); }

// Dirichlet(alpha,...,alpha) over m categories
inline double dirichlet_mean(int m) { return 1.0 / m; }
inline double dirichlet_second(double alpha, int m, bool same_index) {
  double a0 = alpha * m;
  if (same_index) return alpha * (alpha + 1.0) / (a0 * (a0 + 1.0));
  return alpha * alpha / (a0 * (a0 + 1.0));
}

// samplers ---------------------------------------------------------------

double sample_gamma(Rng& rng, double shape);  // shape > 0, scale 1

// Dirichlet(alpha,..,alpha) over m categories into out[0..m)
void sample_dirichlet(Rng& rng, double alpha, int m, double* out);

inline double sample_bounded_log_weight(Rng& rng, double amplitude) {
  return amplitude * (2.0 * rng.uniform() - 1.0);
}

}  // namespace rwre
