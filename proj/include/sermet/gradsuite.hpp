#pragma once

#include <cstdint>

namespace sermet::gradsuite {

// Finite-difference sweeps over randomly initialized models and batches.
// Batch sizes cycle through 2..64; architectures alternate between the plain
// linear autoencoder and one with a hidden ReLU layer. Each returns the worst
// relative error seen.
double reconstruction_suite(int seeds, std::uint64_t base_seed = 77);
double metric_suite(int seeds, std::uint64_t base_seed = 77);
double joint_suite(int seeds, std::uint64_t base_seed = 77);

}  // namespace sermet::gradsuite
