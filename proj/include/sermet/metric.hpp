#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sermet/matrix.hpp"
#include "sermet/nn.hpp"

namespace sermet::metric {

// Distances between consecutive rows of a (shuffled) batch: latent[i] is the
// Euclidean distance between embedding rows i and i+1, label[i] the absolute
// difference of their labels.
struct PairDistances {
  std::vector<double> latent;  // length b-1, >= 0
  std::vector<double> label;   // length b-1, >= 0
};

PairDistances pair_distances(const Matrix& z, const std::vector<double>& labels);

// Least-squares slope through the origin of latent distances onto label
// distances. nullopt when sum(label^2) falls below the degeneracy threshold
// (all labels equal), in which case the loss is skipped.
std::optional<double> fit_slope(const PairDistances& pd, double eps_degenerate = 1e-12);

struct MetricOptions {
  // When false the slope is treated as a constant in the gradient (the
  // residual gradient is unaffected: the slope is the least-squares minimizer,
  // so its first-order contribution to the residual term vanishes).
  bool slope_gradient = true;
  double eps_degenerate = 1e-12;
  // Smoothing added under the square root in the *gradient* denominator only;
  // loss values use exact distances.
  double grad_eps = 1e-12;
};

struct MetricLossResult {
  double slope = 0.0;          // fitted p
  double residual_loss = 0.0;  // mean squared residual of latent vs p*label distances
  double slope_loss = 0.0;     // |p - 1|
  double total_loss = 0.0;     // residual_loss + slope_loss
  Matrix grad_z;               // d(total)/dz, same shape as z
  bool skipped = false;        // degenerate labels: zero loss, zero gradient
  std::uint64_t kink_signature = 0;  // sign branches taken (for fd checks)
};

// Distance-preservation loss on a latent batch: fits the slope, penalizes the
// residual (mean squared) and the slope's deviation from 1, and returns the
// exact gradient with respect to every latent coordinate.
MetricLossResult metric_loss(const Matrix& z, const std::vector<double>& labels,
                             const MetricOptions& options = {});

// Finite-difference verification of grad_z on random batches with distances
// bounded away from zero. Returns the worst relative error.
double metric_grad_max_rel_error(std::size_t batch, std::uint64_t seed, double step = 1e-5);

}  // namespace sermet::metric
