#pragma once

#include <cstdint>
#include <vector>

#include "sermet/matrix.hpp"

namespace sermet::prep {

struct Scaler {
  std::vector<double> mean;
  std::vector<double> stddev;             // strictly positive after fitting
  std::vector<std::uint8_t> constant;     // features whose std was replaced by 1

  bool any_constant() const {
    for (auto c : constant)
      if (c) return true;
    return false;
  }
};

// Per-feature mean and population standard deviation. Zero-variance features
// get std 1 and are flagged. Throws for fewer than 2 rows.
Scaler fit_scaler(const Matrix& x);

Matrix apply_scaler(const Scaler& scaler, const Matrix& x);

struct OutlierResult {
  Matrix kept;
  std::vector<std::size_t> kept_indices;
  std::vector<std::size_t> removed_indices;
};

// Drops a row iff any feature's z-score (against this matrix's own column
// stats) lies strictly outside [-threshold, +threshold]. Constant columns
// contribute z = 0.
OutlierResult remove_outliers(const Matrix& x, double threshold = 10.0);

struct TransferSplit {
  std::vector<std::size_t> fit_indices;
  std::vector<std::size_t> eval_indices;
  Scaler scaler;            // fitted on the fit part only
  Matrix eval_standardized; // eval part standardized with that scaler
};

// Seeded split of a transfer dataset: a fit fraction supplies the
// standardization statistics, the remainder is standardized with them and
// used for evaluation. Stratified by class when class_ids is non-empty.
TransferSplit transfer_standardize(const Matrix& x, const std::vector<int>& class_ids,
                                   double fit_fraction, std::uint64_t seed);

}  // namespace sermet::prep
