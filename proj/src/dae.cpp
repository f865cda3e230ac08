#include "sermet/dae.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "sermet/kernels.hpp"

namespace sermet::dae {

namespace {

std::vector<nn::Activation> hidden_then_identity(std::size_t hidden_count) {
  std::vector<nn::Activation> acts(hidden_count, nn::Activation::kRelu);
  acts.push_back(nn::Activation::kIdentity);
  return acts;
}

}  // namespace

DaeModel make_dae(const DaeConfig& config, Rng& rng) {
  if (config.input_dim == 0 || config.latent_dim == 0)
    throw std::invalid_argument("make_dae: zero dimensions");
  if (config.noise_std < 0.0) throw std::invalid_argument("make_dae: noise std must be >= 0");
  if (config.metric_weight < 0.0)
    throw std::invalid_argument("make_dae: metric weight must be >= 0");

  std::vector<std::size_t> enc_dims{config.input_dim};
  enc_dims.insert(enc_dims.end(), config.encoder_hidden.begin(), config.encoder_hidden.end());
  enc_dims.push_back(config.latent_dim);

  std::vector<std::size_t> dec_dims{config.latent_dim};
  dec_dims.insert(dec_dims.end(), config.encoder_hidden.rbegin(), config.encoder_hidden.rend());
  dec_dims.push_back(config.input_dim);

  DaeModel model;
  model.config = config;
  model.encoder = nn::make_mlp(enc_dims, hidden_then_identity(config.encoder_hidden.size()), rng);
  model.decoder = nn::make_mlp(dec_dims, hidden_then_identity(config.encoder_hidden.size()), rng);
  return model;
}

Matrix corrupt(const Matrix& x, double noise_std, Rng& rng, double fraction) {
  if (noise_std < 0.0) throw std::invalid_argument("corrupt: noise std must be >= 0");
  if (!x.all_finite()) throw std::invalid_argument("corrupt: non-finite input");
  Matrix noisy = x;
  if (noise_std == 0.0) return noisy;
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    if (fraction < 1.0 && rng.uniform() >= fraction) continue;
    noisy.data()[i] += noise_std * rng.gaussian();
  }
  return noisy;
}

Matrix encode(const DaeModel& model, const Matrix& x) {
  return nn::forward(model.encoder, x);
}

double reconstruction_error(const Matrix& x_clean, const Matrix& reconstruction,
                            Matrix* grad_reconstruction) {
  if (!x_clean.same_shape(reconstruction))
    throw std::invalid_argument("reconstruction_error: shape mismatch " + shape_string(x_clean) +
                                " vs " + shape_string(reconstruction));
  std::vector<double> row_sums;
  kernels::squared_error_row_sums(x_clean, reconstruction, row_sums);
  double total = 0.0;
  for (double v : row_sums) total += v;
  const double scale = 1.0 / static_cast<double>(x_clean.size());
  if (grad_reconstruction) {
    *grad_reconstruction = Matrix(x_clean.rows(), x_clean.cols());
    for (std::size_t i = 0; i < x_clean.size(); ++i)
      grad_reconstruction->data()[i] =
          2.0 * scale * (reconstruction.data()[i] - x_clean.data()[i]);
  }
  return total * scale;
}

ReconstructionResult reconstruction_loss(const DaeModel& model, const Matrix& x_clean,
                                         const Matrix& x_noisy) {
  nn::Tape enc_tape, dec_tape;
  const Matrix z = nn::forward(model.encoder, x_noisy, &enc_tape);
  const Matrix reconstruction = nn::forward(model.decoder, z, &dec_tape);

  Matrix grad_rec;
  ReconstructionResult result;
  result.loss = reconstruction_error(x_clean, reconstruction, &grad_rec);
  Matrix grad_z;
  result.decoder_grad = nn::backward(model.decoder, dec_tape, grad_rec, &grad_z);
  result.encoder_grad = nn::backward(model.encoder, enc_tape, grad_z);
  return result;
}

namespace {

constexpr const char* kCheckpointHeader = "sermet-dae-checkpoint v1";

void write_values(std::FILE* f, const char* tag, const double* values, std::size_t n) {
  std::fprintf(f, "%s", tag);
  for (std::size_t i = 0; i < n; ++i) std::fprintf(f, " %.17g", values[i]);
  std::fprintf(f, "\n");
}

void write_mlp(std::FILE* f, const char* name, const nn::Mlp& mlp) {
  std::fprintf(f, "%s_layers %zu\n", name, mlp.layers.size());
  for (const nn::Layer& layer : mlp.layers) {
    std::fprintf(f, "layer %zu %zu %s\n", layer.out_size(), layer.in_size(),
                 layer.activation == nn::Activation::kRelu ? "relu" : "identity");
    for (std::size_t r = 0; r < layer.out_size(); ++r)
      write_values(f, "w", layer.weight.row(r), layer.in_size());
    write_values(f, "b", layer.bias.data(), layer.bias.size());
  }
}

std::vector<double> read_values(std::istream& in, const std::string& tag, std::size_t n) {
  std::string seen;
  if (!(in >> seen) || seen != tag)
    throw std::runtime_error("checkpoint: expected '" + tag + "', found '" + seen + "'");
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i)
    if (!(in >> values[i])) throw std::runtime_error("checkpoint: truncated " + tag + " values");
  return values;
}

nn::Mlp read_mlp(std::istream& in, const std::string& name) {
  std::string tag;
  std::size_t count = 0;
  if (!(in >> tag >> count) || tag != name + "_layers")
    throw std::runtime_error("checkpoint: missing " + name + " layer count");
  nn::Mlp mlp;
  for (std::size_t k = 0; k < count; ++k) {
    std::size_t out = 0, in_size = 0;
    std::string act;
    if (!(in >> tag >> out >> in_size >> act) || tag != "layer")
      throw std::runtime_error("checkpoint: malformed layer header");
    nn::Layer layer;
    layer.weight = Matrix(out, in_size);
    layer.activation = act == "relu" ? nn::Activation::kRelu : nn::Activation::kIdentity;
    for (std::size_t r = 0; r < out; ++r) {
      const std::vector<double> row = read_values(in, "w", in_size);
      for (std::size_t c = 0; c < in_size; ++c) layer.weight(r, c) = row[c];
    }
    layer.bias = read_values(in, "b", out);
    mlp.layers.push_back(std::move(layer));
  }
  mlp.validate();
  return mlp;
}

}  // namespace

void save_checkpoint(const std::string& path, const DaeModel& model, const prep::Scaler& scaler) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
  std::fprintf(f, "%s\n", kCheckpointHeader);
  std::fprintf(f, "input_dim %zu\n", model.config.input_dim);
  std::fprintf(f, "latent_dim %zu\n", model.config.latent_dim);
  std::fprintf(f, "noise_std %.17g\n", model.config.noise_std);
  std::fprintf(f, "metric_weight %.17g\n", model.config.metric_weight);
  std::fprintf(f, "corrupt_fraction %.17g\n", model.config.corrupt_fraction);
  write_values(f, "scaler_mean", scaler.mean.data(), scaler.mean.size());
  write_values(f, "scaler_std", scaler.stddev.data(), scaler.stddev.size());
  write_mlp(f, "encoder", model.encoder);
  write_mlp(f, "decoder", model.decoder);
  std::fclose(f);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  std::string header;
  std::getline(in, header);
  if (header != kCheckpointHeader)
    throw std::runtime_error("load_checkpoint: unsupported header '" + header + "'");

  Checkpoint ckpt;
  auto read_scalar = [&](const std::string& name, auto& value) {
    std::string tag;
    if (!(in >> tag >> value) || tag != name)
      throw std::runtime_error("load_checkpoint: missing field " + name);
  };
  read_scalar("input_dim", ckpt.model.config.input_dim);
  read_scalar("latent_dim", ckpt.model.config.latent_dim);
  read_scalar("noise_std", ckpt.model.config.noise_std);
  read_scalar("metric_weight", ckpt.model.config.metric_weight);
  read_scalar("corrupt_fraction", ckpt.model.config.corrupt_fraction);
  ckpt.scaler.mean = read_values(in, "scaler_mean", ckpt.model.config.input_dim);
  ckpt.scaler.stddev = read_values(in, "scaler_std", ckpt.model.config.input_dim);
  ckpt.scaler.constant.assign(ckpt.model.config.input_dim, 0);
  ckpt.model.encoder = read_mlp(in, "encoder");
  ckpt.model.decoder = read_mlp(in, "decoder");
  for (std::size_t k = 0; k + 1 < ckpt.model.encoder.layers.size(); ++k)
    ckpt.model.config.encoder_hidden.push_back(ckpt.model.encoder.layers[k].out_size());
  return ckpt;
}

}  // namespace sermet::dae
