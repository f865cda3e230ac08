#pragma once

#include <string>
#include <vector>

#include "sermet/matrix.hpp"
#include "sermet/nn.hpp"
#include "sermet/preprocess.hpp"
#include "sermet/rng.hpp"

namespace sermet::dae {

struct DaeConfig {
  std::size_t input_dim = 88;
  std::size_t latent_dim = 2;
  // Hidden layer sizes of the encoder; the decoder mirrors them. Hidden
  // layers use ReLU; the latent and the reconstruction are linear.
  std::vector<std::size_t> encoder_hidden;
  double noise_std = 1.0;
  double metric_weight = 1.0;
  // Fraction of entries corrupted; 1.0 corrupts everything.
  double corrupt_fraction = 1.0;
};

struct DaeModel {
  nn::Mlp encoder;  // input_dim -> ... -> latent_dim
  nn::Mlp decoder;  // latent_dim -> ... -> input_dim
  DaeConfig config;
};

DaeModel make_dae(const DaeConfig& config, Rng& rng);

// x plus independent Gaussian noise per entry; the input is left untouched.
// noise_std == 0 returns a plain copy without consuming the generator.
Matrix corrupt(const Matrix& x, double noise_std, Rng& rng, double fraction = 1.0);

Matrix encode(const DaeModel& model, const Matrix& x);

struct ReconstructionResult {
  double loss = 0.0;  // mean over batch and features of squared error
  nn::Gradients encoder_grad;
  nn::Gradients decoder_grad;
};

ReconstructionResult reconstruction_loss(const DaeModel& model, const Matrix& x_clean,
                                         const Matrix& x_noisy);

// Loss value and the gradient with respect to the reconstruction, shared by
// reconstruction_loss and the trainer.
double reconstruction_error(const Matrix& x_clean, const Matrix& reconstruction,
                            Matrix* grad_reconstruction);

// Text checkpoint: versioned header, the standardization scaler the model
// was trained behind, and every layer's shape and parameters at full
// precision.
void save_checkpoint(const std::string& path, const DaeModel& model, const prep::Scaler& scaler);

struct Checkpoint {
  DaeModel model;
  prep::Scaler scaler;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace sermet::dae
