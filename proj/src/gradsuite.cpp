#include "sermet/gradsuite.hpp"

#include <algorithm>
#include <vector>

#include "sermet/dae.hpp"
#include "sermet/matrix.hpp"
#include "sermet/metric.hpp"
#include "sermet/nn.hpp"
#include "sermet/rng.hpp"

namespace sermet::gradsuite {

namespace {

constexpr std::size_t kInputDim = 12;  // small enough for dense fd sweeps

struct Case {
  dae::DaeModel model;
  Matrix x_clean, x_noisy;
  std::vector<double> labels;
};

Case make_case(int seed, std::uint64_t base_seed) {
  Rng rng(mix_seed(base_seed, static_cast<std::uint64_t>(seed)));
  dae::DaeConfig cfg;
  cfg.input_dim = kInputDim;
  cfg.latent_dim = 2;
  if (seed % 3 == 2) cfg.encoder_hidden = {6};  // exercise the ReLU path

  Case c;
  c.model = dae::make_dae(cfg, rng);
  const std::size_t batch = 2 + static_cast<std::size_t>(seed) % 63;
  c.x_clean = Matrix(batch, kInputDim);
  for (std::size_t i = 0; i < c.x_clean.size(); ++i)
    c.x_clean.data()[i] = rng.uniform(-1.5, 1.5);
  c.x_noisy = dae::corrupt(c.x_clean, 1.0, rng);
  c.labels.resize(batch);
  for (double& l : c.labels) l = rng.uniform(0.0, 1.0);
  return c;
}

nn::LossEval eval_reconstruction(const Case& c) {
  nn::Tape enc_tape, dec_tape;
  const Matrix z = nn::forward(c.model.encoder, c.x_noisy, &enc_tape);
  const Matrix rec = nn::forward(c.model.decoder, z, &dec_tape);
  nn::LossEval e;
  e.value = dae::reconstruction_error(c.x_clean, rec, nullptr);
  e.kink_signature = nn::relu_signature(c.model.encoder, enc_tape) ^
                     (nn::relu_signature(c.model.decoder, dec_tape) * 0x100000001B3ULL);
  return e;
}

nn::LossEval eval_joint(const Case& c, double metric_weight) {
  nn::Tape enc_tape, dec_tape;
  const Matrix z = nn::forward(c.model.encoder, c.x_noisy, &enc_tape);
  const Matrix rec = nn::forward(c.model.decoder, z, &dec_tape);
  const metric::MetricLossResult ml = metric::metric_loss(z, c.labels);
  nn::LossEval e;
  e.value = dae::reconstruction_error(c.x_clean, rec, nullptr) + metric_weight * ml.total_loss;
  e.kink_signature = nn::relu_signature(c.model.encoder, enc_tape) ^
                     (nn::relu_signature(c.model.decoder, dec_tape) * 0x100000001B3ULL) ^
                     ml.kink_signature;
  return e;
}

}  // namespace

double reconstruction_suite(int seeds, std::uint64_t base_seed) {
  double worst = 0.0;
  for (int s = 0; s < seeds; ++s) {
    Case c = make_case(s, base_seed);
    const dae::ReconstructionResult rr =
        dae::reconstruction_loss(c.model, c.x_clean, c.x_noisy);
    const double err = nn::grad_check(
        {&c.model.encoder, &c.model.decoder}, {rr.encoder_grad, rr.decoder_grad},
        [&] { return eval_reconstruction(c); });
    worst = std::max(worst, err);
  }
  return worst;
}

double metric_suite(int seeds, std::uint64_t base_seed) {
  double worst = 0.0;
  for (int s = 0; s < seeds; ++s) {
    const std::size_t batch = 2 + static_cast<std::size_t>(s) % 63;
    worst = std::max(worst, metric::metric_grad_max_rel_error(
                                batch, mix_seed(base_seed, 0xAB00 + s)));
  }
  return worst;
}

double joint_suite(int seeds, std::uint64_t base_seed) {
  const double metric_weight = 1.0;
  double worst = 0.0;
  for (int s = 0; s < seeds; ++s) {
    Case c = make_case(s, base_seed);

    // Analytic gradients of reconstruction + metric through the shared latent.
    nn::Tape enc_tape, dec_tape;
    const Matrix z = nn::forward(c.model.encoder, c.x_noisy, &enc_tape);
    const Matrix rec = nn::forward(c.model.decoder, z, &dec_tape);
    Matrix grad_rec;
    dae::reconstruction_error(c.x_clean, rec, &grad_rec);
    Matrix dz;
    const nn::Gradients dec_grads = nn::backward(c.model.decoder, dec_tape, grad_rec, &dz);
    const metric::MetricLossResult ml = metric::metric_loss(z, c.labels);
    if (!ml.skipped)
      for (std::size_t i = 0; i < dz.size(); ++i)
        dz.data()[i] += metric_weight * ml.grad_z.data()[i];
    const nn::Gradients enc_grads = nn::backward(c.model.encoder, enc_tape, dz);

    const double err =
        nn::grad_check({&c.model.encoder, &c.model.decoder}, {enc_grads, dec_grads},
                       [&] { return eval_joint(c, metric_weight); });
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace sermet::gradsuite
