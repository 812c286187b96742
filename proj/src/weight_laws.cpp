#include "rwre/weight_laws.hpp"

#include <cmath>

namespace rwre {

double sample_gamma(Rng& rng, double shape) {
  // Marsaglia-Tsang; boost small shapes by the power trick
  if (shape < 1.0) {
    double u = rng.uniform();
    while (u <= 0) u = rng.uniform();
    return sample_gamma(rng, shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  double d = shape - 1.0 / 3.0;
  double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = rng.normal();
    double v = 1.0 + c * x;
    if (v <= 0) continue;
    v = v * v * v;
    double u = rng.uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (u > 0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

void sample_dirichlet(Rng& rng, double alpha, int m, double* out) {
  double s = 0;
  for (int i = 0; i < m; ++i) {
    out[i] = sample_gamma(rng, alpha);
    s += out[i];
  }
  for (int i = 0; i < m; ++i) out[i] /= s;
}

}  // namespace rwre
