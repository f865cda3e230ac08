#include "sermet/svc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "sermet/kernels.hpp"

namespace sermet::svc {

namespace {

struct BinaryFit {
  std::vector<double> w;
  double b = 0.0;
  int iterations = 0;
  double objective = 0.0;
};

double binary_objective(const Matrix& x, const std::vector<double>& y,
                        const std::vector<double>& w, double b, double lambda,
                        std::vector<double>& margins) {
  const std::size_t n = x.rows(), dim = x.cols();
  double hinge_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = x.row(i);
    double score = b;
    for (std::size_t j = 0; j < dim; ++j) score += w[j] * xi[j];
    margins[i] = y[i] * score;
    hinge_sum += std::max(0.0, 1.0 - margins[i]);
  }
  double reg = b * b;
  for (double v : w) reg += v * v;
  return 0.5 * lambda * reg + hinge_sum / static_cast<double>(n);
}

BinaryFit train_binary(const Matrix& x, const std::vector<double>& y, double lambda,
                       int max_iterations, double tolerance) {
  const std::size_t n = x.rows(), dim = x.cols();
  BinaryFit fit;
  fit.w.assign(dim, 0.0);

  std::vector<double> w = fit.w;
  double b = 0.0;
  std::vector<double> margins(n, 0.0);
  std::vector<double> grad_w(dim, 0.0);

  double prev = binary_objective(x, y, w, b, lambda, margins);
  fit.objective = prev;

  for (int t = 0; t < max_iterations; ++t) {
    // Subgradient of the mean hinge plus the quadratic term.
    std::fill(grad_w.begin(), grad_w.end(), 0.0);
    double grad_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (margins[i] >= 1.0) continue;
      const double* xi = x.row(i);
      for (std::size_t j = 0; j < dim; ++j) grad_w[j] -= y[i] * xi[j];
      grad_b -= y[i];
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t j = 0; j < dim; ++j) grad_w[j] = lambda * w[j] + grad_w[j] * inv_n;
    grad_b = lambda * b + grad_b * inv_n;

    const double step = 1.0 / (lambda * static_cast<double>(t + 2));
    for (std::size_t j = 0; j < dim; ++j) w[j] -= step * grad_w[j];
    b -= step * grad_b;

    const double obj = binary_objective(x, y, w, b, lambda, margins);
    fit.iterations = t + 1;
    if (obj < fit.objective) {
      fit.objective = obj;
      fit.w = w;
      fit.b = b;
    }
    if (std::fabs(prev - obj) < tolerance * std::max(1.0, std::fabs(prev))) break;
    prev = obj;
  }
  return fit;
}

}  // namespace

LinearSvcModel svc_train(const Matrix& x, const std::vector<int>& class_ids, double reg_c,
                         int max_iterations, double tolerance) {
  const std::size_t n = x.rows();
  if (class_ids.size() != n) throw std::invalid_argument("svc_train: class id count mismatch");
  if (n == 0) throw std::invalid_argument("svc_train: empty training set");
  if (reg_c <= 0.0) throw std::invalid_argument("svc_train: regularization C must be > 0");

  std::set<int> present(class_ids.begin(), class_ids.end());
  if (present.size() < 2)
    throw std::invalid_argument("svc_train: need at least 2 classes, got " +
                                std::to_string(present.size()));

  LinearSvcModel model;
  model.class_ids.assign(present.begin(), present.end());
  model.weights = Matrix(model.class_ids.size(), x.cols());
  model.bias.assign(model.class_ids.size(), 0.0);
  model.reg_c = reg_c;

  const double lambda = 1.0 / reg_c;
  std::vector<double> y(n);
  for (std::size_t c = 0; c < model.class_ids.size(); ++c) {
    for (std::size_t i = 0; i < n; ++i)
      y[i] = class_ids[i] == model.class_ids[c] ? 1.0 : -1.0;
    BinaryFit fit = train_binary(x, y, lambda, max_iterations, tolerance);
    for (std::size_t j = 0; j < x.cols(); ++j) model.weights(c, j) = fit.w[j];
    model.bias[c] = fit.b;
    model.iterations = std::max(model.iterations, fit.iterations);
    model.objective += fit.objective;
  }
  return model;
}

std::vector<int> svc_predict(const LinearSvcModel& model, const Matrix& x) {
  if (x.cols() != model.weights.cols())
    throw std::invalid_argument("svc_predict: feature dimension " + std::to_string(x.cols()) +
                                " does not match model " + std::to_string(model.weights.cols()));
  Matrix scores;
  kernels::affine_forward(x, model.weights, model.bias, scores);
  std::vector<int> predictions(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < model.class_ids.size(); ++c)
      if (scores(i, c) > scores(i, best)) best = c;
    predictions[i] = model.class_ids[best];
  }
  return predictions;
}

ClassificationReport classification_report(const std::vector<int>& truth,
                                           const std::vector<int>& predicted) {
  if (truth.empty() || truth.size() != predicted.size())
    throw std::invalid_argument("classification_report: inputs must be non-empty, equal length");

  std::set<int> ids(truth.begin(), truth.end());
  ids.insert(predicted.begin(), predicted.end());

  ClassificationReport report;
  report.class_list.assign(ids.begin(), ids.end());
  const std::size_t c = report.class_list.size();
  auto index_of = [&](int id) {
    return static_cast<std::size_t>(
        std::lower_bound(report.class_list.begin(), report.class_list.end(), id) -
        report.class_list.begin());
  };

  report.confusion = Matrix(c, c);
  for (std::size_t i = 0; i < truth.size(); ++i)
    report.confusion(index_of(truth[i]), index_of(predicted[i])) += 1.0;

  report.recall.assign(c, std::numeric_limits<double>::quiet_NaN());
  double recall_sum = 0.0;
  std::size_t present = 0;
  for (std::size_t r = 0; r < c; ++r) {
    double row_total = 0.0;
    for (std::size_t col = 0; col < c; ++col) row_total += report.confusion(r, col);
    if (row_total > 0.0) {
      report.recall[r] = report.confusion(r, r) / row_total;
      recall_sum += report.recall[r];
      ++present;
    }
  }
  report.balanced_accuracy = recall_sum / static_cast<double>(present);
  return report;
}

double balanced_accuracy(const std::vector<int>& truth, const std::vector<int>& predicted) {
  return classification_report(truth, predicted).balanced_accuracy;
}

}  // namespace sermet::svc
