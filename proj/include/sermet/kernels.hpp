#pragma once

#include <vector>

#include "sermet/matrix.hpp"

namespace sermet::kernels {

// Data-parallel inner loops used by the network, the preprocessing pipeline
// and the classifier. Each kernel exists twice: a serial reference under
// kernels::serial, and an OpenMP version at namespace scope. The parallel
// versions assign every output element to exactly one thread and keep the
// per-element accumulation order identical to the serial code, so the two
// paths produce bitwise-identical results for any thread count. Tests and
// the kernel_bench tool compare them.

namespace serial {

// y[b x out] = x[b x in] * w[out x in]^T + bias[out]
void affine_forward(const Matrix& x, const Matrix& w, const std::vector<double>& bias,
                    Matrix& y);

// dw[out x in] = dy[b x out]^T * x[b x in]
void grad_weights(const Matrix& dy, const Matrix& x, Matrix& dw);

// db[out] = column sums of dy
void grad_bias(const Matrix& dy, std::vector<double>& db);

// dx[b x in] = dy[b x out] * w[out x in]
void grad_input(const Matrix& dy, const Matrix& w, Matrix& dx);

// Per-column mean and population standard deviation.
void column_mean_std(const Matrix& x, std::vector<double>& mean, std::vector<double>& stddev);

// out = (x - mean) / stddev, columnwise.
void standardize(const Matrix& x, const std::vector<double>& mean,
                 const std::vector<double>& stddev, Matrix& out);

// row_sums[i] = sum_j (a(i,j) - b(i,j))^2
void squared_error_row_sums(const Matrix& a, const Matrix& b, std::vector<double>& row_sums);

}  // namespace serial

void affine_forward(const Matrix& x, const Matrix& w, const std::vector<double>& bias,
                    Matrix& y);
void grad_weights(const Matrix& dy, const Matrix& x, Matrix& dw);
void grad_bias(const Matrix& dy, std::vector<double>& db);
void grad_input(const Matrix& dy, const Matrix& w, Matrix& dx);
void column_mean_std(const Matrix& x, std::vector<double>& mean, std::vector<double>& stddev);
void standardize(const Matrix& x, const std::vector<double>& mean,
                 const std::vector<double>& stddev, Matrix& out);
void squared_error_row_sums(const Matrix& a, const Matrix& b, std::vector<double>& row_sums);

bool openmp_enabled();
int max_threads();

}  // namespace sermet::kernels
