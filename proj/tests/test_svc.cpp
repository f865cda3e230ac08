#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "sermet/rng.hpp"
#include "sermet/svc.hpp"

using namespace sermet;

namespace {

// Two Gaussian blobs in 2-D, centers 4 apart, sigma 0.1.
void blobs(std::size_t n_per_class, Rng& rng, Matrix& x, std::vector<int>& y) {
  x = Matrix(2 * n_per_class, 2);
  y.assign(2 * n_per_class, 0);
  for (std::size_t i = 0; i < 2 * n_per_class; ++i) {
    const int cls = i < n_per_class ? 0 : 1;
    const double cx = cls == 0 ? -2.0 : 2.0;
    x(i, 0) = cx + 0.1 * rng.gaussian();
    x(i, 1) = 0.1 * rng.gaussian();
    y[i] = cls;
  }
}

}  // namespace

TEST_CASE("svc_train: 1-D separable points put the boundary near zero") {
  Matrix x(2, 1);
  x(0, 0) = -1.0;
  x(1, 0) = 1.0;
  const svc::LinearSvcModel model = svc::svc_train(x, {0, 1});
  const std::vector<int> on_train = svc::svc_predict(model, x);
  CHECK(on_train == std::vector<int>{0, 1});

  Matrix probe(2, 1);
  probe(0, 0) = -0.05;
  probe(1, 0) = 0.05;
  const std::vector<int> near_zero = svc::svc_predict(model, probe);
  CHECK(near_zero == std::vector<int>{0, 1});
}

TEST_CASE("svc_train: separable blobs generalize to held-out draws") {
  Rng rng(71);
  Matrix x_train, x_eval;
  std::vector<int> y_train, y_eval;
  blobs(50, rng, x_train, y_train);
  blobs(50, rng, x_eval, y_eval);
  const svc::LinearSvcModel model = svc::svc_train(x_train, y_train);
  const std::vector<int> predicted = svc::svc_predict(model, x_eval);
  CHECK(svc::balanced_accuracy(y_eval, predicted) >= 0.98);
}

TEST_CASE("svc_train: duplicating every sample leaves the decision function alone") {
  Rng rng(72);
  Matrix x(40, 2);
  std::vector<int> y(40);
  for (std::size_t i = 0; i < 40; ++i) {
    const int cls = static_cast<int>(i % 2);
    x(i, 0) = (cls == 0 ? -1.0 : 1.0) + 0.3 * rng.gaussian();
    x(i, 1) = rng.gaussian();
    y[i] = cls;
  }
  Matrix x2(80, 2);
  std::vector<int> y2(80);
  for (std::size_t i = 0; i < 80; ++i) {
    for (std::size_t j = 0; j < 2; ++j) x2(i, j) = x(i / 2, j);
    y2[i] = y[i / 2];
  }
  const svc::LinearSvcModel a = svc::svc_train(x, y);
  const svc::LinearSvcModel b = svc::svc_train(x2, y2);
  for (std::size_t c = 0; c < a.class_ids.size(); ++c) {
    for (std::size_t j = 0; j < 2; ++j)
      CHECK(a.weights(c, j) == doctest::Approx(b.weights(c, j)).epsilon(1e-6));
    CHECK(a.bias[c] == doctest::Approx(b.bias[c]).epsilon(1e-6));
  }
}

TEST_CASE("svc_train requires at least two classes") {
  Matrix x(3, 1);
  CHECK_THROWS_AS(svc::svc_train(x, {1, 1, 1}), std::invalid_argument);
}

TEST_CASE("svc_predict: all-zero model ties break to the lowest class id") {
  svc::LinearSvcModel model;
  model.class_ids = {1, 2, 3};
  model.weights = Matrix(3, 2);
  model.bias.assign(3, 0.0);
  Matrix x(4, 2);
  x(0, 0) = 5.0;
  x(1, 1) = -3.0;
  const std::vector<int> predicted = svc::svc_predict(model, x);
  for (int p : predicted) CHECK(p == 1);
}

TEST_CASE("svc_predict recovers the training labels of a separable set") {
  Rng rng(73);
  Matrix x(60, 2);
  std::vector<int> y(60);
  for (std::size_t i = 0; i < 60; ++i) {
    const int cls = static_cast<int>(i % 3);
    x(i, 0) = 3.0 * cls + 0.1 * rng.gaussian();
    x(i, 1) = (cls == 1 ? 2.0 : 0.0) + 0.1 * rng.gaussian();
    y[i] = cls;
  }
  const svc::LinearSvcModel model = svc::svc_train(x, y);
  CHECK(svc::balanced_accuracy(y, svc::svc_predict(model, x)) == 1.0);
}

TEST_CASE("svc_predict: a sample at a class centroid lands in that class") {
  Rng rng(74);
  Matrix x_train, _unused_eval;
  std::vector<int> y_train, _unused;
  blobs(50, rng, x_train, y_train);
  const svc::LinearSvcModel model = svc::svc_train(x_train, y_train);
  Matrix probe(1, 2);
  probe(0, 0) = 2.0;
  CHECK(svc::svc_predict(model, probe)[0] == 1);
}

TEST_CASE("svc_predict is invariant to positive rescaling of scores") {
  Rng rng(75);
  Matrix x_train, x_eval;
  std::vector<int> y_train, y_eval;
  blobs(30, rng, x_train, y_train);
  blobs(20, rng, x_eval, y_eval);
  svc::LinearSvcModel model = svc::svc_train(x_train, y_train);
  const std::vector<int> before = svc::svc_predict(model, x_eval);
  for (std::size_t i = 0; i < model.weights.size(); ++i) model.weights.data()[i] *= 3.5;
  for (double& b : model.bias) b *= 3.5;
  CHECK(svc::svc_predict(model, x_eval) == before);
}

TEST_CASE("svc_predict rejects mismatched dimensions") {
  Rng rng(76);
  Matrix x_train, probe(2, 3);
  std::vector<int> y_train;
  blobs(10, rng, x_train, y_train);
  const svc::LinearSvcModel model = svc::svc_train(x_train, y_train);
  CHECK_THROWS_AS(svc::svc_predict(model, probe), std::invalid_argument);
}

TEST_CASE("balanced_accuracy: perfect, constant, and mixed predictors") {
  CHECK(svc::balanced_accuracy({0, 1, 2, 0}, {0, 1, 2, 0}) == 1.0);
  // Three classes, everything predicted as class 0: recalls 1, 0, 0.
  CHECK(svc::balanced_accuracy({0, 1, 2, 1, 2}, {0, 0, 0, 0, 0}) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  // Recalls 1.0, 0.5 and 0.75 average to 0.75.
  const std::vector<int> truth{0, 0, 1, 1, 2, 2, 2, 2};
  const std::vector<int> pred{0, 0, 1, 0, 2, 2, 2, 0};
  CHECK(svc::balanced_accuracy(truth, pred) == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("balanced_accuracy is invariant to duplicating one class") {
  const std::vector<int> truth{0, 0, 1, 1, 1, 1};
  const std::vector<int> pred{0, 1, 1, 1, 0, 1};
  const double base = svc::balanced_accuracy(truth, pred);
  std::vector<int> truth2 = truth, pred2 = pred;
  truth2.insert(truth2.end(), {0, 0});  // duplicate class 0 with same recall
  pred2.insert(pred2.end(), {0, 1});
  CHECK(svc::balanced_accuracy(truth2, pred2) == doctest::Approx(base).epsilon(1e-15));
}

TEST_CASE("classification_report: confusion rows sum to class counts") {
  const std::vector<int> truth{0, 0, 1, 2, 2, 2};
  const std::vector<int> pred{0, 1, 1, 2, 0, 2};
  const svc::ClassificationReport report = svc::classification_report(truth, pred);
  REQUIRE(report.class_list == std::vector<int>{0, 1, 2});
  for (std::size_t r = 0; r < 3; ++r) {
    double row_sum = 0.0;
    for (std::size_t c = 0; c < 3; ++c) row_sum += report.confusion(r, c);
    const double expected = std::count(truth.begin(), truth.end(), report.class_list[r]);
    CHECK(row_sum == expected);
  }
}

TEST_CASE("balanced_accuracy rejects empty or unequal inputs") {
  CHECK_THROWS_AS(svc::balanced_accuracy({}, {}), std::invalid_argument);
  CHECK_THROWS_AS(svc::balanced_accuracy({1}, {1, 2}), std::invalid_argument);
}
