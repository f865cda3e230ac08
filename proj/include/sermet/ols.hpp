#pragma once

#include <vector>

#include "sermet/matrix.hpp"

namespace sermet::ols {

struct OlsResult {
  std::vector<double> coefficients;  // intercept first, then one beta per regressor
  double r2 = 0.0;
  double r2_adjusted = 0.0;
  double f_statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;  // samples
  std::size_t k = 0;  // regressors (excluding intercept)
  bool ridge_fallback = false;  // rank-deficient design, solved with tiny ridge
  bool degenerate = false;      // zero-variance response, r2 undefined

  bool insignificant() const { return p_value > 0.05; }
};

// 1 - (1 - r2) (n - 1) / (n - k - 1); never clamped, may be negative.
double adjusted_r2(double r2, std::size_t n, std::size_t k);

// Ordinary least squares with intercept via the normal equations. R^2,
// adjusted R^2 (never clamped; may be negative), overall F statistic and its
// p-value from the F(k, n-k-1) survival function. Requires n > k + 1.
OlsResult ols_fit(const Matrix& x, const std::vector<double>& y);

// P(F > f) for the F(d1, d2) distribution via the regularized incomplete
// beta function.
double f_survival(double f, std::size_t d1, std::size_t d2);

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double regularized_incomplete_beta(double x, double a, double b);

// Regress labels on the two latent coordinates: l = c + b1*z1 + b2*z2.
OlsResult ols_label_analysis(const Matrix& z, const std::vector<double>& labels);

// Regress consecutive-pair label distances on per-dimension latent
// distances. With euclidean_regressor the single Euclidean distance is used
// instead of the two per-dimension absolute differences.
OlsResult ols_distance_analysis(const Matrix& z, const std::vector<double>& labels,
                                bool euclidean_regressor = false);

}  // namespace sermet::ols
