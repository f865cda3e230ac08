#include "sermet/ols.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace sermet::ols {

namespace {

// Gaussian elimination with partial pivoting on an augmented system.
// Returns false when a pivot collapses (rank-deficient).
bool solve_inplace(Matrix& a, std::vector<double>& rhs) {
  const std::size_t m = a.rows();
  for (std::size_t col = 0; col < m; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < m; ++r)
      if (std::fabs(a(r, col)) > std::fabs(a(pivot, col))) pivot = r;
    if (std::fabs(a(pivot, col)) < 1e-12) return false;
    if (pivot != col) {
      for (std::size_t c = 0; c < m; ++c) std::swap(a(col, c), a(pivot, c));
      std::swap(rhs[col], rhs[pivot]);
    }
    const double inv = 1.0 / a(col, col);
    for (std::size_t r = col + 1; r < m; ++r) {
      const double factor = a(r, col) * inv;
      if (factor == 0.0) continue;
      for (std::size_t c = col; c < m; ++c) a(r, c) -= factor * a(col, c);
      rhs[r] -= factor * rhs[col];
    }
  }
  for (std::size_t col = m; col-- > 0;) {
    double acc = rhs[col];
    for (std::size_t c = col + 1; c < m; ++c) acc -= a(col, c) * rhs[c];
    rhs[col] = acc / a(col, col);
  }
  return true;
}

}  // namespace

double adjusted_r2(double r2, std::size_t n, std::size_t k) {
  return 1.0 - (1.0 - r2) * static_cast<double>(n - 1) / static_cast<double>(n - k - 1);
}

double regularized_incomplete_beta(double x, double a, double b) {
  if (!(x >= 0.0 && x <= 1.0) || a <= 0.0 || b <= 0.0)
    return std::numeric_limits<double>::quiet_NaN();
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;

  // Continued fraction for the incomplete beta (modified Lentz); converges
  // fastest for x < (a+1)/(a+b+2), otherwise use the symmetry relation.
  if (x > (a + 1.0) / (a + b + 2.0)) return 1.0 - regularized_incomplete_beta(1.0 - x, b, a);

  const double log_front =
      a * std::log(x) + b * std::log(1.0 - x) - std::log(a) -
      (std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));

  const double tiny = 1e-300;
  double c = 1.0;
  double d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double frac = d;
  for (int i = 1; i <= 500; ++i) {
    const double m = static_cast<double>(i);
    // even step
    double numer = m * (b - m) * x / ((a + 2.0 * m - 1.0) * (a + 2.0 * m));
    d = 1.0 + numer * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + numer / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    frac *= d * c;
    // odd step
    numer = -(a + m) * (a + b + m) * x / ((a + 2.0 * m) * (a + 2.0 * m + 1.0));
    d = 1.0 + numer * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + numer / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    frac *= delta;
    if (std::fabs(delta - 1.0) < 1e-15) break;
  }
  return std::exp(log_front) * frac;
}

double f_survival(double f, std::size_t d1, std::size_t d2) {
  if (d1 < 1 || d2 < 1) throw std::invalid_argument("f_survival: degrees of freedom must be >= 1");
  if (!(f >= 0.0)) throw std::invalid_argument("f_survival: f must be >= 0");
  if (std::isinf(f)) return 0.0;
  const double a = static_cast<double>(d2) / 2.0;
  const double b = static_cast<double>(d1) / 2.0;
  const double x = static_cast<double>(d2) / (static_cast<double>(d2) + static_cast<double>(d1) * f);
  return regularized_incomplete_beta(x, a, b);
}

OlsResult ols_fit(const Matrix& x, const std::vector<double>& y) {
  const std::size_t n = x.rows();
  const std::size_t k = x.cols();
  if (y.size() != n) throw std::invalid_argument("ols_fit: response length mismatch");
  if (n <= k + 1)
    throw std::invalid_argument("ols_fit: need n > k + 1 (" + std::to_string(n) + " samples, " +
                                std::to_string(k) + " regressors)");
  if (!x.all_finite()) throw std::invalid_argument("ols_fit: non-finite design entries");

  const std::size_t m = k + 1;  // intercept + regressors
  auto design_at = [&](std::size_t row, std::size_t col) -> double {
    return col == 0 ? 1.0 : x(row, col - 1);
  };

  // Normal equations: G = D^T D, rhs = D^T y.
  Matrix gram(m, m);
  std::vector<double> rhs(m, 0.0);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = r; c < m; ++c) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += design_at(i, r) * design_at(i, c);
      gram(r, c) = acc;
      gram(c, r) = acc;
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += design_at(i, r) * y[i];
    rhs[r] = acc;
  }

  OlsResult result;
  result.n = n;
  result.k = k;

  Matrix work = gram;
  std::vector<double> beta = rhs;
  if (!solve_inplace(work, beta)) {
    work = gram;
    for (std::size_t i = 0; i < m; ++i) work(i, i) += 1e-10;
    beta = rhs;
    if (!solve_inplace(work, beta))
      throw std::runtime_error("ols_fit: normal equations unsolvable even with ridge");
    result.ridge_fallback = true;
  }
  result.coefficients = beta;

  double y_mean = 0.0;
  for (double v : y) y_mean += v;
  y_mean /= static_cast<double>(n);

  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double fit = 0.0;
    for (std::size_t c = 0; c < m; ++c) fit += beta[c] * design_at(i, c);
    const double res = y[i] - fit;
    ss_res += res * res;
    const double dev = y[i] - y_mean;
    ss_tot += dev * dev;
  }

  if (ss_tot <= 0.0) {
    result.degenerate = true;
    result.r2 = std::numeric_limits<double>::quiet_NaN();
    result.r2_adjusted = std::numeric_limits<double>::quiet_NaN();
    result.f_statistic = std::numeric_limits<double>::quiet_NaN();
    result.p_value = 1.0;
    return result;
  }

  result.r2 = 1.0 - ss_res / ss_tot;
  const double dof = static_cast<double>(n - k - 1);
  result.r2_adjusted = adjusted_r2(result.r2, n, k);
  if (result.r2 >= 1.0) {
    result.f_statistic = std::numeric_limits<double>::infinity();
    result.p_value = 0.0;
  } else {
    result.f_statistic = (result.r2 / static_cast<double>(k)) / ((1.0 - result.r2) / dof);
    if (result.f_statistic < 0.0) result.f_statistic = 0.0;
    result.p_value = f_survival(result.f_statistic, k, n - k - 1);
  }
  return result;
}

OlsResult ols_label_analysis(const Matrix& z, const std::vector<double>& labels) {
  if (z.cols() != 2) throw std::invalid_argument("ols_label_analysis: expected 2 latent columns");
  if (z.rows() <= 3) throw std::invalid_argument("ols_label_analysis: need more than 3 samples");
  return ols_fit(z, labels);
}

OlsResult ols_distance_analysis(const Matrix& z, const std::vector<double>& labels,
                                bool euclidean_regressor) {
  if (z.cols() != 2)
    throw std::invalid_argument("ols_distance_analysis: expected 2 latent columns");
  const std::size_t n = z.rows();
  if (n < 4) throw std::invalid_argument("ols_distance_analysis: need at least 4 samples");
  if (labels.size() != n)
    throw std::invalid_argument("ols_distance_analysis: label count mismatch");

  const std::size_t pairs = n - 1;
  std::vector<double> label_dist(pairs);
  Matrix regressors(pairs, euclidean_regressor ? 1 : 2);
  for (std::size_t i = 0; i < pairs; ++i) {
    const double d0 = z(i, 0) - z(i + 1, 0);
    const double d1 = z(i, 1) - z(i + 1, 1);
    if (euclidean_regressor) {
      regressors(i, 0) = std::sqrt(d0 * d0 + d1 * d1);
    } else {
      regressors(i, 0) = std::fabs(d0);
      regressors(i, 1) = std::fabs(d1);
    }
    label_dist[i] = std::fabs(labels[i] - labels[i + 1]);
  }
  return ols_fit(regressors, label_dist);
}

}  // namespace sermet::ols
