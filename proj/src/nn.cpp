#include "sermet/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "sermet/kernels.hpp"

namespace sermet::nn {

void Mlp::validate() const {
  for (std::size_t k = 0; k + 1 < layers.size(); ++k) {
    if (layers[k].out_size() != layers[k + 1].in_size())
      throw std::invalid_argument("mlp: layer " + std::to_string(k) + " output " +
                                  std::to_string(layers[k].out_size()) +
                                  " does not chain into layer " + std::to_string(k + 1) +
                                  " input " + std::to_string(layers[k + 1].in_size()));
  }
  for (std::size_t k = 0; k < layers.size(); ++k) {
    if (!layers[k].weight.all_finite())
      throw std::invalid_argument("mlp: non-finite weight in layer " + std::to_string(k));
    for (double b : layers[k].bias)
      if (!std::isfinite(b))
        throw std::invalid_argument("mlp: non-finite bias in layer " + std::to_string(k));
    if (layers[k].bias.size() != layers[k].out_size())
      throw std::invalid_argument("mlp: bias size mismatch in layer " + std::to_string(k));
  }
}

Mlp make_mlp(const std::vector<std::size_t>& dims, const std::vector<Activation>& activations,
             Rng& rng) {
  if (dims.size() < 2) throw std::invalid_argument("make_mlp: need at least in and out dims");
  if (activations.size() != dims.size() - 1)
    throw std::invalid_argument("make_mlp: one activation per layer required");
  Mlp mlp;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    Layer layer;
    const std::size_t in = dims[k], out = dims[k + 1];
    const double s = std::sqrt(6.0 / static_cast<double>(in + out));
    layer.weight = Matrix(out, in);
    for (std::size_t i = 0; i < out; ++i)
      for (std::size_t j = 0; j < in; ++j) layer.weight(i, j) = rng.uniform(-s, s);
    layer.bias.assign(out, 0.0);
    layer.activation = activations[k];
    mlp.layers.push_back(std::move(layer));
  }
  return mlp;
}

Matrix forward(const Mlp& mlp, const Matrix& batch, Tape* tape) {
  if (batch.cols() != mlp.input_size())
    throw std::invalid_argument("forward: batch " + shape_string(batch) +
                                " does not match network input size " +
                                std::to_string(mlp.input_size()));
  if (tape) {
    tape->inputs.clear();
    tape->preacts.clear();
  }
  Matrix current = batch;
  for (const Layer& layer : mlp.layers) {
    if (tape) tape->inputs.push_back(current);
    Matrix pre;
    kernels::affine_forward(current, layer.weight, layer.bias, pre);
    if (tape) tape->preacts.push_back(pre);
    if (layer.activation == Activation::kRelu) {
      for (std::size_t i = 0; i < pre.size(); ++i)
        if (pre.data()[i] < 0.0) pre.data()[i] = 0.0;
    }
    current = std::move(pre);
  }
  return current;
}

Gradients Gradients::zeros_like(const Mlp& mlp) {
  Gradients g;
  for (const Layer& layer : mlp.layers) {
    g.weight.emplace_back(layer.out_size(), layer.in_size());
    g.bias.emplace_back(layer.out_size(), 0.0);
  }
  return g;
}

void Gradients::add_scaled(const Gradients& other, double scale) {
  for (std::size_t k = 0; k < weight.size(); ++k) {
    for (std::size_t i = 0; i < weight[k].size(); ++i)
      weight[k].data()[i] += scale * other.weight[k].data()[i];
    for (std::size_t i = 0; i < bias[k].size(); ++i) bias[k][i] += scale * other.bias[k][i];
  }
}

bool Gradients::all_finite() const {
  for (const Matrix& w : weight)
    if (!w.all_finite()) return false;
  for (const auto& b : bias)
    for (double v : b)
      if (!std::isfinite(v)) return false;
  return true;
}

std::size_t Gradients::scalar_count() const {
  std::size_t n = 0;
  for (const Matrix& w : weight) n += w.size();
  for (const auto& b : bias) n += b.size();
  return n;
}

Gradients backward(const Mlp& mlp, const Tape& tape, const Matrix& upstream,
                   Matrix* input_grad) {
  const std::size_t n_layers = mlp.layers.size();
  if (tape.inputs.size() != n_layers || tape.preacts.size() != n_layers)
    throw std::invalid_argument("backward: tape does not match network layer count");
  for (std::size_t k = 0; k < n_layers; ++k) {
    if (tape.inputs[k].cols() != mlp.layers[k].in_size() ||
        tape.preacts[k].cols() != mlp.layers[k].out_size())
      throw std::invalid_argument("backward: tape shapes do not match layer " +
                                  std::to_string(k));
  }
  if (n_layers > 0 &&
      (upstream.rows() != tape.preacts.back().rows() ||
       upstream.cols() != mlp.layers.back().out_size()))
    throw std::invalid_argument("backward: upstream gradient " + shape_string(upstream) +
                                " does not match network output");

  Gradients grads = Gradients::zeros_like(mlp);
  Matrix delta = upstream;
  for (std::size_t k = n_layers; k-- > 0;) {
    const Layer& layer = mlp.layers[k];
    if (layer.activation == Activation::kRelu) {
      const Matrix& pre = tape.preacts[k];
      for (std::size_t i = 0; i < delta.size(); ++i)
        if (pre.data()[i] <= 0.0) delta.data()[i] = 0.0;
    }
    kernels::grad_weights(delta, tape.inputs[k], grads.weight[k]);
    kernels::grad_bias(delta, grads.bias[k]);
    if (k > 0 || input_grad) {
      Matrix next;
      kernels::grad_input(delta, layer.weight, next);
      delta = std::move(next);
    }
  }
  if (input_grad) *input_grad = std::move(delta);
  return grads;
}

AdamState AdamState::init(const Mlp& mlp, const AdamConfig& config) {
  AdamState s;
  s.config = config;
  for (const Layer& layer : mlp.layers) {
    s.m_weight.emplace_back(layer.out_size(), layer.in_size());
    s.v_weight.emplace_back(layer.out_size(), layer.in_size());
    s.m_bias.emplace_back(layer.out_size(), 0.0);
    s.v_bias.emplace_back(layer.out_size(), 0.0);
  }
  return s;
}

namespace {

void adam_update(double* param, double* m, double* v, const double* grad, std::size_t n,
                 const AdamConfig& c, double bc1, double bc2) {
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad[i];
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    param[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

}  // namespace

void adam_step(Mlp& mlp, const Gradients& grads, AdamState& state) {
  if (grads.weight.size() != mlp.layers.size())
    throw std::invalid_argument("adam_step: gradient layer count mismatch");
  if (!grads.all_finite()) throw std::runtime_error("adam_step: non-finite gradient entries");
  state.step += 1;
  const AdamConfig& c = state.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < mlp.layers.size(); ++k) {
    Layer& layer = mlp.layers[k];
    if (!grads.weight[k].same_shape(layer.weight) ||
        grads.bias[k].size() != layer.bias.size())
      throw std::invalid_argument("adam_step: gradient shape mismatch in layer " +
                                  std::to_string(k));
    adam_update(layer.weight.data(), state.m_weight[k].data(), state.v_weight[k].data(),
                grads.weight[k].data(), layer.weight.size(), c, bc1, bc2);
    adam_update(layer.bias.data(), state.m_bias[k].data(), state.v_bias[k].data(),
                grads.bias[k].data(), layer.bias.size(), c, bc1, bc2);
  }
}

std::size_t count_params(const Mlp& mlp) {
  std::size_t n = 0;
  for (const Layer& layer : mlp.layers) n += layer.out_size() * layer.in_size() + layer.out_size();
  return n;
}

std::uint64_t relu_signature(const Mlp& mlp, const Tape& tape) {
  std::uint64_t sig = 0xCBF29CE484222325ULL;
  for (std::size_t k = 0; k < mlp.layers.size(); ++k) {
    if (mlp.layers[k].activation != Activation::kRelu) continue;
    const Matrix& pre = tape.preacts[k];
    for (std::size_t i = 0; i < pre.size(); ++i) sig_push(sig, pre.data()[i] > 0.0);
  }
  return sig;
}

namespace {

double rel_error(double a, double n) {
  const double denom = std::max({1.0, std::fabs(a), std::fabs(n)});
  return std::fabs(a - n) / denom;
}

}  // namespace

double grad_check(const std::vector<Mlp*>& models, const std::vector<Gradients>& analytic,
                  const std::function<LossEval()>& loss, double step) {
  if (models.size() != analytic.size())
    throw std::invalid_argument("grad_check: one gradient set per model required");
  double worst = 0.0;
  for (std::size_t m = 0; m < models.size(); ++m) {
    Mlp& mlp = *models[m];
    for (std::size_t k = 0; k < mlp.layers.size(); ++k) {
      auto probe = [&](double* param, double analytic_grad) {
        const double saved = *param;
        *param = saved + step;
        const LossEval up = loss();
        *param = saved - step;
        const LossEval down = loss();
        *param = saved;
        if (up.kink_signature != down.kink_signature) return;  // crossed a kink
        const double numeric = (up.value - down.value) / (2.0 * step);
        worst = std::max(worst, rel_error(analytic_grad, numeric));
      };
      Layer& layer = mlp.layers[k];
      for (std::size_t i = 0; i < layer.weight.size(); ++i)
        probe(layer.weight.data() + i, analytic[m].weight[k].data()[i]);
      for (std::size_t i = 0; i < layer.bias.size(); ++i)
        probe(layer.bias.data() + i, analytic[m].bias[k][i]);
    }
  }
  return worst;
}

}  // namespace sermet::nn
