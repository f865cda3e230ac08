#include <doctest.h>

#include <cstring>

#include "sermet/kernels.hpp"
#include "sermet/rng.hpp"

using sermet::Matrix;
using sermet::Rng;
namespace kernels = sermet::kernels;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-2.0, 2.0);
  return m;
}

bool bitwise(const Matrix& a, const Matrix& b) {
  return a.same_shape(b) && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

bool bitwise(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("affine_forward matches hand arithmetic") {
  Matrix x(1, 2);
  x(0, 0) = 1.0;
  x(0, 1) = 1.0;
  Matrix w(2, 2);
  w(0, 0) = 2.0;
  w(1, 1) = 2.0;
  Matrix y;
  kernels::affine_forward(x, w, {1.0, 1.0}, y);
  CHECK(y(0, 0) == 3.0);
  CHECK(y(0, 1) == 3.0);
}

TEST_CASE("affine_forward rejects shape mismatches") {
  Matrix x(2, 3), w(2, 2);
  Matrix y;
  CHECK_THROWS_AS(kernels::affine_forward(x, w, {0.0, 0.0}, y), std::invalid_argument);
  Matrix w2(2, 3);
  CHECK_THROWS_AS(kernels::affine_forward(x, w2, {0.0}, y), std::invalid_argument);
}

TEST_CASE("parallel kernels are bitwise-identical to the serial reference") {
  Rng rng(4021);
  // Cover sizes both below and above the parallelization threshold.
  const std::size_t sizes[][3] = {{3, 5, 2}, {64, 88, 2}, {300, 88, 64}, {1000, 40, 17}};
  for (const auto& s : sizes) {
    const std::size_t rows = s[0], in = s[1], out = s[2];
    const Matrix x = random_matrix(rows, in, rng);
    const Matrix w = random_matrix(out, in, rng);
    std::vector<double> bias(out);
    for (double& b : bias) b = rng.uniform(-1.0, 1.0);
    const Matrix dy = random_matrix(rows, out, rng);
    const Matrix x2 = random_matrix(rows, in, rng);

    Matrix a, b;
    kernels::serial::affine_forward(x, w, bias, a);
    kernels::affine_forward(x, w, bias, b);
    CHECK(bitwise(a, b));

    kernels::serial::grad_weights(dy, x, a);
    kernels::grad_weights(dy, x, b);
    CHECK(bitwise(a, b));

    std::vector<double> va, vb;
    kernels::serial::grad_bias(dy, va);
    kernels::grad_bias(dy, vb);
    CHECK(bitwise(va, vb));

    kernels::serial::grad_input(dy, w, a);
    kernels::grad_input(dy, w, b);
    CHECK(bitwise(a, b));

    std::vector<double> ma, sa, mb, sb;
    kernels::serial::column_mean_std(x, ma, sa);
    kernels::column_mean_std(x, mb, sb);
    CHECK(bitwise(ma, mb));
    CHECK(bitwise(sa, sb));

    kernels::serial::standardize(x, ma, sa, a);
    kernels::standardize(x, ma, sa, b);
    CHECK(bitwise(a, b));

    kernels::serial::squared_error_row_sums(x, x2, va);
    kernels::squared_error_row_sums(x, x2, vb);
    CHECK(bitwise(va, vb));
  }
}

TEST_CASE("column_mean_std uses population std") {
  Matrix x(2, 1);
  x(0, 0) = 0.0;
  x(1, 0) = 10.0;
  std::vector<double> mean, stddev;
  kernels::column_mean_std(x, mean, stddev);
  CHECK(mean[0] == doctest::Approx(5.0));
  CHECK(stddev[0] == doctest::Approx(5.0));
}

TEST_CASE("grad kernels match hand-computed values") {
  // dy [2x1], x [2x2]: dw = dy^T x, db = colsum(dy), dx = dy w
  Matrix dy(2, 1);
  dy(0, 0) = 1.0;
  dy(1, 0) = 2.0;
  Matrix x(2, 2);
  x(0, 0) = 3.0;
  x(0, 1) = 4.0;
  x(1, 0) = 5.0;
  x(1, 1) = 6.0;
  Matrix dw;
  kernels::grad_weights(dy, x, dw);
  CHECK(dw(0, 0) == 13.0);  // 1*3 + 2*5
  CHECK(dw(0, 1) == 16.0);  // 1*4 + 2*6
  std::vector<double> db;
  kernels::grad_bias(dy, db);
  CHECK(db[0] == 3.0);
  Matrix w(1, 2);
  w(0, 0) = 7.0;
  w(0, 1) = 8.0;
  Matrix dx;
  kernels::grad_input(dy, w, dx);
  CHECK(dx(0, 0) == 7.0);
  CHECK(dx(1, 1) == 16.0);
}
