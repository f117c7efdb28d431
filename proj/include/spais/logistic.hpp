#pragma once

#include <cmath>
#include <stdexcept>

namespace spais {

/// CDF of a zero-mean logistic distribution with scale `beta`, evaluated at z.
inline double logistic_cdf(double z, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("logistic scale beta must be positive");
  const double u = z / beta;
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

/// log of logistic_cdf, computed as -softplus(-z/beta) so it stays finite
/// for arbitrarily negative z.
inline double log_logistic_cdf(double z, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("logistic scale beta must be positive");
  const double u = z / beta;
  if (u == INFINITY) return 0.0;
  if (u >= 0.0) return -std::log1p(std::exp(-u));
  return u - std::log1p(std::exp(u));
}

}  // namespace spais
