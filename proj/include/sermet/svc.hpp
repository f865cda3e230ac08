#pragma once

#include <vector>

#include "sermet/matrix.hpp"

namespace sermet::svc {

// One-vs-rest linear max-margin classifier trained by deterministic
// full-batch subgradient descent on the L2-regularized mean hinge loss
//   J(w, b) = (1 / (2 C)) (|w|^2 + b^2) + mean_i max(0, 1 - y_i (w.x_i + b)).
// The mean keeps the objective invariant under duplicating the sample set.
struct LinearSvcModel {
  std::vector<int> class_ids;  // ascending
  Matrix weights;              // [classes x dim]
  std::vector<double> bias;    // [classes]
  double reg_c = 1.0;
  int iterations = 0;          // worst per-class iteration count
  double objective = 0.0;      // summed per-class best objectives
};

LinearSvcModel svc_train(const Matrix& x, const std::vector<int>& class_ids, double reg_c = 1.0,
                         int max_iterations = 10000, double tolerance = 1e-6);

// Argmax of per-class scores; ties break toward the lowest class id.
std::vector<int> svc_predict(const LinearSvcModel& model, const Matrix& x);

struct ClassificationReport {
  std::vector<int> class_list;       // sorted union of true and predicted ids
  Matrix confusion;                  // rows true, columns predicted
  std::vector<double> recall;        // per class in class_list; NaN when absent from truth
  double balanced_accuracy = 0.0;    // mean recall over classes present in truth
};

ClassificationReport classification_report(const std::vector<int>& truth,
                                           const std::vector<int>& predicted);

double balanced_accuracy(const std::vector<int>& truth, const std::vector<int>& predicted);

}  // namespace sermet::svc
