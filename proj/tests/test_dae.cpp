#include <doctest.h>

#include <cmath>

#include "fd_oracle.hpp"
#include "sermet/dae.hpp"
#include "sermet/rng.hpp"
#include "temp_dir.hpp"

using namespace sermet;

namespace {

dae::DaeModel identity_pair() {
  // 2 -> 2 -> 2 with identity weights: reconstructs its input exactly.
  dae::DaeConfig cfg;
  cfg.input_dim = 2;
  cfg.latent_dim = 2;
  Rng rng(1);
  dae::DaeModel model = dae::make_dae(cfg, rng);
  for (nn::Mlp* net : {&model.encoder, &model.decoder}) {
    net->layers[0].weight = Matrix(2, 2);
    net->layers[0].weight(0, 0) = 1.0;
    net->layers[0].weight(1, 1) = 1.0;
    net->layers[0].bias = {0.0, 0.0};
  }
  return model;
}

}  // namespace

TEST_CASE("corrupt: zero noise returns the input exactly") {
  Rng rng(10);
  Matrix x(4, 88);
  for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1.0, 1.0);
  Rng noise_rng(11);
  const Matrix noisy = dae::corrupt(x, 0.0, noise_rng);
  CHECK(noisy == x);
}

TEST_CASE("corrupt is reproducible bitwise under a fixed seed") {
  Rng rng(12);
  Matrix x(4, 88);
  for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1.0, 1.0);
  Rng a(99), b(99);
  CHECK(dae::corrupt(x, 1.0, a) == dae::corrupt(x, 1.0, b));
}

TEST_CASE("corrupt: sample statistics of the noise match the law of large numbers") {
  const std::size_t rows = 1200;  // 1200 * 88 > 1e5 entries
  Matrix x(rows, 88, 0.0);
  Rng rng(13);
  const Matrix noisy = dae::corrupt(x, 1.0, rng);
  double mean = 0.0;
  for (std::size_t i = 0; i < noisy.size(); ++i) mean += noisy.data()[i];
  mean /= static_cast<double>(noisy.size());
  double var = 0.0;
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    const double d = noisy.data()[i] - mean;
    var += d * d;
  }
  var /= static_cast<double>(noisy.size());
  CHECK(std::fabs(mean) < 0.02);
  CHECK(std::fabs(std::sqrt(var) - 1.0) < 0.02);
}

TEST_CASE("corrupt: partial fraction leaves some entries untouched") {
  Matrix x(50, 88, 0.0);
  Rng rng(14);
  const Matrix noisy = dae::corrupt(x, 1.0, rng, 0.25);
  std::size_t touched = 0;
  for (std::size_t i = 0; i < noisy.size(); ++i)
    if (noisy.data()[i] != 0.0) ++touched;
  const double fraction = static_cast<double>(touched) / static_cast<double>(noisy.size());
  CHECK(fraction > 0.2);
  CHECK(fraction < 0.3);
}

TEST_CASE("encode: zero weights give a zero embedding") {
  Rng rng(15);
  dae::DaeConfig cfg;
  dae::DaeModel model = dae::make_dae(cfg, rng);
  model.encoder.layers[0].weight = Matrix(2, 88);
  model.encoder.layers[0].bias = {0.0, 0.0};
  Matrix x(3, 88, 0.7);
  const Matrix z = dae::encode(model, x);
  for (std::size_t i = 0; i < z.size(); ++i) CHECK(z.data()[i] == 0.0);
}

TEST_CASE("encode: identity-like encoder on the 2-dim toy config") {
  const dae::DaeModel model = identity_pair();
  Matrix x(2, 2);
  x(0, 0) = 0.3;
  x(0, 1) = -0.4;
  x(1, 0) = 1.5;
  x(1, 1) = 2.5;
  const Matrix z = dae::encode(model, x);
  CHECK(z == x);
}

TEST_CASE("encode: golden snapshot for the default config") {
  Rng rng(2001);
  const dae::DaeModel model = dae::make_dae({}, rng);
  Matrix x(3, 88);
  Rng data_rng(2002);
  for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = data_rng.uniform(-1.0, 1.0);
  const Matrix z = dae::encode(model, x);
  const double golden[3][2] = {
      {1.5379207730954403, -0.24849597285075636},
      {0.57805295128292278, -0.056429089123372779},
      {-0.28565279863496862, 0.028414566898224872},
  };
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) CHECK(z(i, j) == golden[i][j]);
}

TEST_CASE("encode applies no corruption and is repeatable") {
  Rng rng(16);
  const dae::DaeModel model = dae::make_dae({}, rng);
  Matrix x(5, 88);
  for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1.0, 1.0);
  CHECK(dae::encode(model, x) == dae::encode(model, x));
}

TEST_CASE("reconstruction_loss: perfect autoencoder on clean input is zero") {
  const dae::DaeModel model = identity_pair();
  Matrix x(3, 2);
  x(0, 0) = 0.1;
  x(1, 1) = -0.2;
  x(2, 0) = 0.9;
  const dae::ReconstructionResult r = dae::reconstruction_loss(model, x, x);
  CHECK(r.loss == 0.0);
}

TEST_CASE("reconstruction_loss: zero decoder against all-ones target is one") {
  Rng rng(17);
  dae::DaeConfig cfg;
  dae::DaeModel model = dae::make_dae(cfg, rng);
  model.decoder.layers[0].weight = Matrix(88, 2);
  model.decoder.layers[0].bias.assign(88, 0.0);
  Matrix clean(4, 88, 1.0);
  Matrix noisy(4, 88, 0.3);
  const dae::ReconstructionResult r = dae::reconstruction_loss(model, clean, noisy);
  CHECK(r.loss == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("reconstruction_loss is nonnegative and zero only at exact reconstruction") {
  Rng rng(18);
  const dae::DaeModel model = dae::make_dae({}, rng);
  Matrix clean(6, 88), noisy(6, 88);
  for (std::size_t i = 0; i < clean.size(); ++i) {
    clean.data()[i] = rng.uniform(-1.0, 1.0);
    noisy.data()[i] = clean.data()[i] + 0.1 * rng.gaussian();
  }
  const dae::ReconstructionResult r = dae::reconstruction_loss(model, clean, noisy);
  CHECK(r.loss > 0.0);
}

TEST_CASE("reconstruction gradients match finite differences") {
  Rng rng(19);
  dae::DaeConfig cfg;
  cfg.input_dim = 6;
  dae::DaeModel model = dae::make_dae(cfg, rng);
  Matrix clean(3, 6), noisy(3, 6);
  for (std::size_t i = 0; i < clean.size(); ++i) {
    clean.data()[i] = rng.uniform(-1.0, 1.0);
    noisy.data()[i] = clean.data()[i] + 0.5 * rng.gaussian();
  }
  const dae::ReconstructionResult r = dae::reconstruction_loss(model, clean, noisy);
  auto loss_value = [&] { return dae::reconstruction_loss(model, clean, noisy).loss; };

  double worst = 0.0;
  for (nn::Mlp* net : {&model.encoder, &model.decoder}) {
    const nn::Gradients& grads =
        net == &model.encoder ? r.encoder_grad : r.decoder_grad;
    for (std::size_t k = 0; k < net->layers.size(); ++k) {
      for (std::size_t i = 0; i < net->layers[k].weight.size(); ++i) {
        const double numeric =
            testutil::central_diff(net->layers[k].weight.data()[i], loss_value);
        worst = std::max(worst, testutil::rel_err(grads.weight[k].data()[i], numeric));
      }
      for (std::size_t i = 0; i < net->layers[k].bias.size(); ++i) {
        const double numeric = testutil::central_diff(net->layers[k].bias[i], loss_value);
        worst = std::max(worst, testutil::rel_err(grads.bias[k][i], numeric));
      }
    }
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("checkpoint save/load round-trips parameters and scaler exactly") {
  testutil::TempDir tmp;
  Rng rng(20);
  dae::DaeConfig cfg;
  cfg.encoder_hidden = {8};
  cfg.noise_std = 0.5;
  cfg.metric_weight = 2.0;
  dae::DaeModel model = dae::make_dae(cfg, rng);

  prep::Scaler scaler;
  scaler.mean.resize(88);
  scaler.stddev.resize(88);
  scaler.constant.assign(88, 0);
  for (std::size_t j = 0; j < 88; ++j) {
    scaler.mean[j] = rng.uniform(-5.0, 5.0);
    scaler.stddev[j] = rng.uniform(0.1, 3.0);
  }

  const std::string path = tmp.file("model.ckpt");
  dae::save_checkpoint(path, model, scaler);
  const dae::Checkpoint loaded = dae::load_checkpoint(path);

  CHECK(loaded.model.config.input_dim == 88);
  CHECK(loaded.model.config.latent_dim == 2);
  CHECK(loaded.model.config.noise_std == 0.5);
  CHECK(loaded.model.config.metric_weight == 2.0);
  CHECK(loaded.model.config.encoder_hidden == std::vector<std::size_t>{8});
  CHECK(loaded.scaler.mean == scaler.mean);
  CHECK(loaded.scaler.stddev == scaler.stddev);
  REQUIRE(loaded.model.encoder.layers.size() == model.encoder.layers.size());
  for (std::size_t k = 0; k < model.encoder.layers.size(); ++k) {
    CHECK(loaded.model.encoder.layers[k].weight == model.encoder.layers[k].weight);
    CHECK(loaded.model.encoder.layers[k].bias == model.encoder.layers[k].bias);
    CHECK(loaded.model.encoder.layers[k].activation == model.encoder.layers[k].activation);
  }
  for (std::size_t k = 0; k < model.decoder.layers.size(); ++k)
    CHECK(loaded.model.decoder.layers[k].weight == model.decoder.layers[k].weight);

  const Matrix x(3, 88, 0.25);
  CHECK(dae::encode(loaded.model, x) == dae::encode(model, x));
}

TEST_CASE("load_checkpoint rejects unknown headers") {
  testutil::TempDir tmp;
  testutil::write_file(tmp.file("bad.ckpt"), "not-a-checkpoint v9\n");
  CHECK_THROWS_AS(dae::load_checkpoint(tmp.file("bad.ckpt")), std::runtime_error);
}

TEST_CASE("make_dae validates its config") {
  Rng rng(21);
  dae::DaeConfig cfg;
  cfg.noise_std = -1.0;
  CHECK_THROWS_AS(dae::make_dae(cfg, rng), std::invalid_argument);
}
