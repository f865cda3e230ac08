#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "sermet/matrix.hpp"
#include "sermet/rng.hpp"

namespace sermet::nn {

enum class Activation { kIdentity, kRelu };

struct Layer {
  Matrix weight;             // [out x in]
  std::vector<double> bias;  // [out]
  Activation activation = Activation::kIdentity;

  std::size_t in_size() const { return weight.cols(); }
  std::size_t out_size() const { return weight.rows(); }
};

struct Mlp {
  std::vector<Layer> layers;

  std::size_t input_size() const { return layers.empty() ? 0 : layers.front().in_size(); }
  std::size_t output_size() const { return layers.empty() ? 0 : layers.back().out_size(); }

  // Checks dimension chaining and finiteness; throws on violation.
  void validate() const;
};

// Glorot-style uniform init in [-s, s], s = sqrt(6 / (fan_in + fan_out)),
// biases zero. dims = {in, h1, ..., out}; activations has dims.size()-1 entries.
Mlp make_mlp(const std::vector<std::size_t>& dims, const std::vector<Activation>& activations,
             Rng& rng);

// Activation record from forward, consumed by backward.
struct Tape {
  std::vector<Matrix> inputs;   // input to each layer
  std::vector<Matrix> preacts;  // pre-activation of each layer
};

Matrix forward(const Mlp& mlp, const Matrix& batch, Tape* tape = nullptr);

struct Gradients {
  std::vector<Matrix> weight;
  std::vector<std::vector<double>> bias;

  static Gradients zeros_like(const Mlp& mlp);
  void add_scaled(const Gradients& other, double scale);
  bool all_finite() const;
  std::size_t scalar_count() const;
};

// Exact reverse-mode gradients of the scalar whose output-gradient is
// `upstream`. ReLU subgradient at 0 is 0. input_grad, when non-null,
// receives d(scalar)/d(batch).
Gradients backward(const Mlp& mlp, const Tape& tape, const Matrix& upstream,
                   Matrix* input_grad = nullptr);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Matrix> m_weight, v_weight;
  std::vector<std::vector<double>> m_bias, v_bias;
  long long step = 0;
  AdamConfig config;

  static AdamState init(const Mlp& mlp, const AdamConfig& config);
};

// Standard Adam update with bias correction. Throws on non-finite gradients.
void adam_step(Mlp& mlp, const Gradients& grads, AdamState& state);

std::size_t count_params(const Mlp& mlp);

// --- finite-difference verification -----------------------------------------

struct LossEval {
  double value = 0.0;
  // Hash of every non-smooth branch taken while evaluating the loss (ReLU
  // pre-activation signs, slope-penalty sign). Parameters whose +/-h
  // evaluations land on different branches are excluded from the check.
  std::uint64_t kink_signature = 0;
};

inline void sig_push(std::uint64_t& sig, bool bit) {
  sig = (sig ^ (bit ? 0x9E3779B97F4A7C15ULL : 0x2545F4914F6CDD1DULL)) * 0x100000001B3ULL;
}

// Signature of the ReLU branches recorded in a tape.
std::uint64_t relu_signature(const Mlp& mlp, const Tape& tape);

// Central finite differences over every parameter of `models` against the
// supplied analytic gradients. `loss` must re-evaluate from the models'
// current contents. Returns the worst relative error, with
// rel(a, n) = |a - n| / max(1, |a|, |n|).
double grad_check(const std::vector<Mlp*>& models, const std::vector<Gradients>& analytic,
                  const std::function<LossEval()>& loss, double step = 1e-5);

}  // namespace sermet::nn
