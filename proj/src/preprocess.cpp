#include "sermet/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "sermet/kernels.hpp"
#include "sermet/rng.hpp"

namespace sermet::prep {

Scaler fit_scaler(const Matrix& x) {
  if (x.rows() < 2) throw std::invalid_argument("fit_scaler: need at least 2 rows");
  Scaler s;
  kernels::column_mean_std(x, s.mean, s.stddev);
  s.constant.assign(x.cols(), 0);
  for (std::size_t j = 0; j < x.cols(); ++j) {
    if (s.stddev[j] <= 0.0) {
      s.stddev[j] = 1.0;
      s.constant[j] = 1;
    }
  }
  return s;
}

Matrix apply_scaler(const Scaler& scaler, const Matrix& x) {
  if (x.cols() != scaler.mean.size())
    throw std::invalid_argument("apply_scaler: matrix has " + std::to_string(x.cols()) +
                                " columns, scaler " + std::to_string(scaler.mean.size()));
  Matrix out;
  kernels::standardize(x, scaler.mean, scaler.stddev, out);
  return out;
}

OutlierResult remove_outliers(const Matrix& x, double threshold) {
  if (threshold <= 0.0) throw std::invalid_argument("remove_outliers: threshold must be > 0");
  std::vector<double> mean, stddev;
  kernels::column_mean_std(x, mean, stddev);

  OutlierResult result;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    bool extreme = false;
    for (std::size_t j = 0; j < x.cols() && !extreme; ++j) {
      if (stddev[j] <= 0.0) continue;  // constant feature, z treated as 0
      const double z = (x(i, j) - mean[j]) / stddev[j];
      if (z > threshold || z < -threshold) extreme = true;
    }
    if (extreme)
      result.removed_indices.push_back(i);
    else
      result.kept_indices.push_back(i);
  }
  result.kept = take_rows(x, result.kept_indices);
  return result;
}

TransferSplit transfer_standardize(const Matrix& x, const std::vector<int>& class_ids,
                                   double fit_fraction, std::uint64_t seed) {
  const std::size_t n = x.rows();
  if (fit_fraction <= 0.0 || fit_fraction >= 1.0)
    throw std::invalid_argument("transfer_standardize: fit fraction must be in (0, 1)");
  if (!class_ids.empty() && class_ids.size() != n)
    throw std::invalid_argument("transfer_standardize: class id count mismatch");

  const std::size_t fit_total =
      static_cast<std::size_t>(std::llround(fit_fraction * static_cast<double>(n)));
  if (fit_total < 2)
    throw std::invalid_argument("transfer_standardize: fit part would have " +
                                std::to_string(fit_total) + " rows, need >= 2");

  // Group rows by class (a single group when unlabeled), shuffle each group,
  // then hand out the fit quota by largest remainder so the total is exact.
  std::map<int, std::vector<std::size_t>> groups;
  if (class_ids.empty()) {
    for (std::size_t i = 0; i < n; ++i) groups[0].push_back(i);
  } else {
    for (std::size_t i = 0; i < n; ++i) groups[class_ids[i]].push_back(i);
  }
  Rng rng(mix_seed(seed, 0x7261'7473ULL));
  for (auto& [cls, idx] : groups) rng.shuffle(idx);

  struct Quota {
    int cls;
    std::size_t take;
    double remainder;
  };
  std::vector<Quota> quotas;
  std::size_t assigned = 0;
  for (const auto& [cls, idx] : groups) {
    const double exact =
        static_cast<double>(fit_total) * static_cast<double>(idx.size()) / static_cast<double>(n);
    const std::size_t base = std::min(static_cast<std::size_t>(exact), idx.size());
    quotas.push_back({cls, base, exact - static_cast<double>(base)});
    assigned += base;
  }
  std::stable_sort(quotas.begin(), quotas.end(), [](const Quota& a, const Quota& b) {
    if (a.remainder != b.remainder) return a.remainder > b.remainder;
    return a.cls < b.cls;
  });
  while (assigned < fit_total) {
    bool progressed = false;
    for (auto& q : quotas) {
      if (assigned >= fit_total) break;
      if (q.take < groups[q.cls].size()) {
        ++q.take;
        ++assigned;
        progressed = true;
      }
    }
    if (!progressed) break;
  }

  TransferSplit split;
  std::map<int, std::size_t> take_of;
  for (const auto& q : quotas) take_of[q.cls] = q.take;
  for (const auto& [cls, idx] : groups) {
    const std::size_t take_count = take_of[cls];
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (i < take_count)
        split.fit_indices.push_back(idx[i]);
      else
        split.eval_indices.push_back(idx[i]);
    }
  }
  std::sort(split.fit_indices.begin(), split.fit_indices.end());
  std::sort(split.eval_indices.begin(), split.eval_indices.end());

  if (split.fit_indices.size() < 2)
    throw std::invalid_argument("transfer_standardize: fit part ended up with " +
                                std::to_string(split.fit_indices.size()) + " rows");

  const Matrix fit_part = take_rows(x, split.fit_indices);
  split.scaler = fit_scaler(fit_part);
  split.eval_standardized = apply_scaler(split.scaler, take_rows(x, split.eval_indices));
  return split;
}

}  // namespace sermet::prep
