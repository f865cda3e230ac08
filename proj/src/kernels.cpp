#include "sermet/kernels.hpp"

#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sermet::kernels {

namespace {

void check_affine(const Matrix& x, const Matrix& w, const std::vector<double>& bias) {
  if (x.cols() != w.cols())
    throw std::invalid_argument("affine_forward: input " + shape_string(x) +
                                " does not match weight " + shape_string(w));
  if (bias.size() != w.rows())
    throw std::invalid_argument("affine_forward: bias size " + std::to_string(bias.size()) +
                                " does not match weight rows " + std::to_string(w.rows()));
}

// Work thresholds below which the OpenMP loops stay serial; thread startup
// costs more than these loops at training-batch sizes.
constexpr std::size_t kMinWork = 1 << 14;

}  // namespace

namespace serial {

void affine_forward(const Matrix& x, const Matrix& w, const std::vector<double>& bias,
                    Matrix& y) {
  check_affine(x, w, bias);
  const std::size_t b = x.rows(), in = x.cols(), out = w.rows();
  y = Matrix(b, out);
  for (std::size_t i = 0; i < b; ++i) {
    const double* xi = x.row(i);
    double* yi = y.row(i);
    for (std::size_t o = 0; o < out; ++o) {
      const double* wo = w.row(o);
      double acc = bias[o];
      for (std::size_t j = 0; j < in; ++j) acc += wo[j] * xi[j];
      yi[o] = acc;
    }
  }
}

void grad_weights(const Matrix& dy, const Matrix& x, Matrix& dw) {
  const std::size_t b = dy.rows(), out = dy.cols(), in = x.cols();
  dw = Matrix(out, in);
  for (std::size_t o = 0; o < out; ++o) {
    double* dwo = dw.row(o);
    for (std::size_t i = 0; i < b; ++i) {
      const double g = dy(i, o);
      const double* xi = x.row(i);
      for (std::size_t j = 0; j < in; ++j) dwo[j] += g * xi[j];
    }
  }
}

void grad_bias(const Matrix& dy, std::vector<double>& db) {
  const std::size_t b = dy.rows(), out = dy.cols();
  db.assign(out, 0.0);
  for (std::size_t o = 0; o < out; ++o) {
    double acc = 0.0;
    for (std::size_t i = 0; i < b; ++i) acc += dy(i, o);
    db[o] = acc;
  }
}

void grad_input(const Matrix& dy, const Matrix& w, Matrix& dx) {
  const std::size_t b = dy.rows(), out = dy.cols(), in = w.cols();
  dx = Matrix(b, in);
  for (std::size_t i = 0; i < b; ++i) {
    const double* dyi = dy.row(i);
    double* dxi = dx.row(i);
    for (std::size_t o = 0; o < out; ++o) {
      const double g = dyi[o];
      const double* wo = w.row(o);
      for (std::size_t j = 0; j < in; ++j) dxi[j] += g * wo[j];
    }
  }
}

void column_mean_std(const Matrix& x, std::vector<double>& mean, std::vector<double>& stddev) {
  const std::size_t n = x.rows(), c = x.cols();
  mean.assign(c, 0.0);
  stddev.assign(c, 0.0);
  for (std::size_t j = 0; j < c; ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += x(i, j);
    const double m = sum / static_cast<double>(n);
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = x(i, j) - m;
      sq += d * d;
    }
    mean[j] = m;
    stddev[j] = std::sqrt(sq / static_cast<double>(n));
  }
}

void standardize(const Matrix& x, const std::vector<double>& mean,
                 const std::vector<double>& stddev, Matrix& out) {
  const std::size_t n = x.rows(), c = x.cols();
  out = Matrix(n, c);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = x.row(i);
    double* oi = out.row(i);
    for (std::size_t j = 0; j < c; ++j) oi[j] = (xi[j] - mean[j]) / stddev[j];
  }
}

void squared_error_row_sums(const Matrix& a, const Matrix& b, std::vector<double>& row_sums) {
  if (!a.same_shape(b))
    throw std::invalid_argument("squared_error_row_sums: shape mismatch " + shape_string(a) +
                                " vs " + shape_string(b));
  const std::size_t n = a.rows(), c = a.cols();
  row_sums.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a.row(i);
    const double* bi = b.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double d = ai[j] - bi[j];
      acc += d * d;
    }
    row_sums[i] = acc;
  }
}

}  // namespace serial

void affine_forward(const Matrix& x, const Matrix& w, const std::vector<double>& bias,
                    Matrix& y) {
  check_affine(x, w, bias);
  const std::size_t b = x.rows(), in = x.cols(), out = w.rows();
  y = Matrix(b, out);
  const long long rows = static_cast<long long>(b);
#pragma omp parallel for schedule(static) if (b * in * out > kMinWork)
  for (long long i = 0; i < rows; ++i) {
    const double* xi = x.row(static_cast<std::size_t>(i));
    double* yi = y.row(static_cast<std::size_t>(i));
    for (std::size_t o = 0; o < out; ++o) {
      const double* wo = w.row(o);
      double acc = bias[o];
      for (std::size_t j = 0; j < in; ++j) acc += wo[j] * xi[j];
      yi[o] = acc;
    }
  }
}

void grad_weights(const Matrix& dy, const Matrix& x, Matrix& dw) {
  const std::size_t b = dy.rows(), out = dy.cols(), in = x.cols();
  dw = Matrix(out, in);
  const long long out_rows = static_cast<long long>(out);
#pragma omp parallel for schedule(static) if (b * in * out > kMinWork)
  for (long long o = 0; o < out_rows; ++o) {
    double* dwo = dw.row(static_cast<std::size_t>(o));
    for (std::size_t i = 0; i < b; ++i) {
      const double g = dy(i, static_cast<std::size_t>(o));
      const double* xi = x.row(i);
      for (std::size_t j = 0; j < in; ++j) dwo[j] += g * xi[j];
    }
  }
}

void grad_bias(const Matrix& dy, std::vector<double>& db) {
  const std::size_t b = dy.rows(), out = dy.cols();
  db.assign(out, 0.0);
  const long long out_rows = static_cast<long long>(out);
#pragma omp parallel for schedule(static) if (b * out > kMinWork)
  for (long long o = 0; o < out_rows; ++o) {
    double acc = 0.0;
    for (std::size_t i = 0; i < b; ++i) acc += dy(i, static_cast<std::size_t>(o));
    db[static_cast<std::size_t>(o)] = acc;
  }
}

void grad_input(const Matrix& dy, const Matrix& w, Matrix& dx) {
  const std::size_t b = dy.rows(), out = dy.cols(), in = w.cols();
  dx = Matrix(b, in);
  const long long rows = static_cast<long long>(b);
#pragma omp parallel for schedule(static) if (b * in * out > kMinWork)
  for (long long i = 0; i < rows; ++i) {
    const double* dyi = dy.row(static_cast<std::size_t>(i));
    double* dxi = dx.row(static_cast<std::size_t>(i));
    for (std::size_t o = 0; o < out; ++o) {
      const double g = dyi[o];
      const double* wo = w.row(o);
      for (std::size_t j = 0; j < in; ++j) dxi[j] += g * wo[j];
    }
  }
}

void column_mean_std(const Matrix& x, std::vector<double>& mean, std::vector<double>& stddev) {
  const std::size_t n = x.rows(), c = x.cols();
  mean.assign(c, 0.0);
  stddev.assign(c, 0.0);
  const long long cols = static_cast<long long>(c);
#pragma omp parallel for schedule(static) if (n * c > kMinWork)
  for (long long j = 0; j < cols; ++j) {
    const std::size_t col = static_cast<std::size_t>(j);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += x(i, col);
    const double m = sum / static_cast<double>(n);
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = x(i, col) - m;
      sq += d * d;
    }
    mean[col] = m;
    stddev[col] = std::sqrt(sq / static_cast<double>(n));
  }
}

void standardize(const Matrix& x, const std::vector<double>& mean,
                 const std::vector<double>& stddev, Matrix& out) {
  const std::size_t n = x.rows(), c = x.cols();
  out = Matrix(n, c);
  const long long rows = static_cast<long long>(n);
#pragma omp parallel for schedule(static) if (n * c > kMinWork)
  for (long long i = 0; i < rows; ++i) {
    const double* xi = x.row(static_cast<std::size_t>(i));
    double* oi = out.row(static_cast<std::size_t>(i));
    for (std::size_t j = 0; j < c; ++j) oi[j] = (xi[j] - mean[j]) / stddev[j];
  }
}

void squared_error_row_sums(const Matrix& a, const Matrix& b, std::vector<double>& row_sums) {
  if (!a.same_shape(b))
    throw std::invalid_argument("squared_error_row_sums: shape mismatch " + shape_string(a) +
                                " vs " + shape_string(b));
  const std::size_t n = a.rows(), c = a.cols();
  row_sums.assign(n, 0.0);
  const long long rows = static_cast<long long>(n);
#pragma omp parallel for schedule(static) if (n * c > kMinWork)
  for (long long i = 0; i < rows; ++i) {
    const double* ai = a.row(static_cast<std::size_t>(i));
    const double* bi = b.row(static_cast<std::size_t>(i));
    double acc = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double d = ai[j] - bi[j];
      acc += d * d;
    }
    row_sums[static_cast<std::size_t>(i)] = acc;
  }
}

bool openmp_enabled() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace sermet::kernels
