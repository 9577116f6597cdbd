#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>

#include "essc/error.hpp"
#include "essc/hht.hpp"
#include "essc/rng.hpp"

namespace essc::hht {

Autoencoder::Autoencoder(std::size_t time_bins, std::size_t freq_bins, std::size_t latent_dim, double leaky_alpha,
                         std::uint64_t seed)
    : time_bins_(time_bins), freq_bins_(freq_bins) {
  const std::size_t in = time_bins * freq_bins;
  if (in == 0) fail(ErrorKind::InvalidArgument, "autoencoder input must be non-empty");
  if (latent_dim == 0 || latent_dim >= in) {
    fail(ErrorKind::InvalidLatentDim,
         "latent_dim " + std::to_string(latent_dim) + " must be in [1, " + std::to_string(in) + ")");
  }
  encoder = nn::DenseLayer(in, latent_dim, nn::Activation::leaky_relu(leaky_alpha));
  decoder = nn::DenseLayer(latent_dim, in, nn::Activation::identity());
  encoder.init_orthogonal(derive_seed(seed, 1));
  decoder.init_orthogonal(derive_seed(seed, 2));
}

std::size_t Autoencoder::latent_height() const {
  const std::size_t n = latent_dim();
  if (time_bins_ % 4 == 0 && freq_bins_ % 2 == 0 && (time_bins_ / 4) * (freq_bins_ / 2) == n) return time_bins_ / 4;
  std::size_t best = 1;
  for (std::size_t d = 1; d * d <= n; ++d) {
    if (n % d == 0) best = d;
  }
  return best;
}

std::vector<double> Autoencoder::reconstruct(std::span<const double> image) const {
  return decoder.infer(encoder.infer(image));
}

double Autoencoder::reconstruction_mse(std::span<const double> image) const {
  const auto rec = reconstruct(image);
  double s = 0.0;
  for (std::size_t i = 0; i < rec.size(); ++i) s += (rec[i] - image[i]) * (rec[i] - image[i]);
  return s / static_cast<double>(rec.size());
}

std::size_t default_latent_dim(std::size_t time_bins, std::size_t freq_bins) {
  return std::max<std::size_t>(1, time_bins * freq_bins / 8);
}

namespace {

double dataset_mse(const Autoencoder& ae, std::span<const TimeFrequencyImage> images) {
  double s = 0.0;
  for (const auto& img : images) s += ae.reconstruction_mse(img.cells());
  return s / static_cast<double>(images.size());
}

}  // namespace

Autoencoder train_autoencoder(std::span<const TimeFrequencyImage> images, std::size_t latent_dim,
                              std::size_t epochs, std::uint64_t seed, const AutoencoderOptions& options) {
  if (images.empty()) fail(ErrorKind::EmptyDataset, "autoencoder training needs at least one image");
  const std::size_t T = images.front().time_bins(), F = images.front().freq_bins();
  for (const auto& img : images) {
    if (img.time_bins() != T || img.freq_bins() != F) {
      fail(ErrorKind::DimensionMismatch, "autoencoder training images differ in shape");
    }
  }
  Autoencoder ae(T, F, latent_dim, options.leaky_alpha, seed);
  optim::AdamState state(options.adam);
  const std::array<ParamView, 4> params{ae.encoder.weight.view(), ae.encoder.bias.view(), ae.decoder.weight.view(),
                                        ae.decoder.bias.view()};
  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
  const double inv_dim = 1.0 / static_cast<double>(ae.input_dim());

  std::vector<std::size_t> order(images.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 3));

  ae.loss_history.push_back(dataset_mse(ae, images));
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      const double scale = 2.0 * inv_dim / static_cast<double>(stop - start);
      for (auto& p : params) std::fill(p.grad.begin(), p.grad.end(), 0.0);
      for (std::size_t b = start; b < stop; ++b) {
        const auto x = images[order[b]].cells();
        const auto rec = ae.decoder.forward(ae.encoder.forward(x));
        std::vector<double> g(rec.size());
        for (std::size_t i = 0; i < rec.size(); ++i) g[i] = scale * (rec[i] - x[i]);
        ae.encoder.backward(ae.decoder.backward(g));
      }
      optim::adam_step(params, state);
    }
    const double loss = dataset_mse(ae, images);
    if (!std::isfinite(loss)) fail(ErrorKind::NonFinite, "autoencoder loss diverged");
    ae.loss_history.push_back(loss);
  }
  return ae;
}

std::vector<double> encode(const Autoencoder& ae, const TimeFrequencyImage& image) {
  if (image.time_bins() != ae.time_bins() || image.freq_bins() != ae.freq_bins()) {
    fail(ErrorKind::DimensionMismatch, "image is " + std::to_string(image.time_bins()) + "x" +
                                           std::to_string(image.freq_bins()) + " but the autoencoder expects " +
                                           std::to_string(ae.time_bins()) + "x" + std::to_string(ae.freq_bins()));
  }
  return ae.encoder.infer(image.cells());
}

}  // namespace essc::hht
