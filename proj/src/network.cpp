#include <algorithm>

#include "essc/error.hpp"
#include "essc/nn.hpp"
#include "essc/rng.hpp"

namespace essc::nn {

Network::Network(const NetworkConfig& config, std::uint64_t seed) : config_(config) {
  if (config.input_channels == 0 || config.input_height == 0 || config.input_width == 0) {
    fail(ErrorKind::InvalidArgument, "network input dimensions must be >= 1");
  }
  if (config.num_classes < 2) fail(ErrorKind::InvalidArgument, "network needs at least two classes");
  // The SE squeeze path is ReLU-family; a sigmoid trunk keeps plain ReLU there.
  const Activation hidden = config.activation.rectifier() ? config.activation : Activation::relu();
  const double gate_alpha =
      config.activation.type == ActivationType::LeakyReLU ? config.activation.alpha : 0.1;

  Shape3 shape = input_shape();
  for (std::size_t i = 0; i < kConvLayers; ++i) {
    ConvLayer conv(shape.c, config.channels[i], config.kernel, config.strides[i], config.kernel / 2,
                   config.activation);
    conv.init_orthogonal(derive_seed(seed, 100 + i));
    shape = conv.output_shape(shape);
    convs_.push_back(std::move(conv));
    if (config.se_enabled) {
      SeBlock se(shape.c, config.se_ratio, hidden, config.gate, gate_alpha);
      se.init_orthogonal(derive_seed(seed, 200 + i));
      ses_.push_back(std::move(se));
    }
  }
  final_shape_ = shape;
  head_ = DenseLayer(shape.size(), config.num_classes, Activation::identity());
  head_.init_orthogonal(derive_seed(seed, 300));
}

void Network::check_input(const Tensor& input) const {
  const Shape3 s = input_shape();
  if (input.shape.size() != 3 || input.shape[0] != s.c || input.shape[1] != s.h || input.shape[2] != s.w) {
    std::string got;
    for (auto d : input.shape) got += (got.empty() ? "" : "x") + std::to_string(d);
    fail(ErrorKind::DimensionMismatch, "network expects input " + std::to_string(s.c) + "x" + std::to_string(s.h) +
                                           "x" + std::to_string(s.w) + ", got " + got);
  }
}

std::vector<double> Network::forward(const Tensor& input) {
  check_input(input);
  Tensor x = input;
  for (std::size_t i = 0; i < kConvLayers; ++i) {
    x = convs_[i].forward(x);
    if (config_.se_enabled) x = ses_[i].forward(x);
  }
  probs_ = softmax(head_.forward(x.values));
  cached_ = true;
  return probs_;
}

Tensor Network::backward(std::span<const double> grad_probs) {
  if (!cached_) fail(ErrorKind::NoForwardCache, "network backward called before forward");
  if (grad_probs.size() != probs_.size()) fail(ErrorKind::ShapeMismatch, "gradient does not match class count");
  // Softmax Jacobian: dz_i = p_i (g_i - sum_j p_j g_j).
  double dot = 0.0;
  for (std::size_t i = 0; i < probs_.size(); ++i) dot += probs_[i] * grad_probs[i];
  std::vector<double> grad_logits(probs_.size());
  for (std::size_t i = 0; i < probs_.size(); ++i) grad_logits[i] = probs_[i] * (grad_probs[i] - dot);

  Tensor g({final_shape_.c, final_shape_.h, final_shape_.w}, head_.backward(grad_logits));
  for (std::size_t i = kConvLayers; i-- > 0;) {
    if (config_.se_enabled) g = ses_[i].backward(g);
    g = convs_[i].backward(g);
  }
  return g;
}

std::vector<double> Network::predict(const Tensor& input) const {
  check_input(input);
  Tensor x = input;
  for (std::size_t i = 0; i < kConvLayers; ++i) {
    x = convs_[i].infer(x);
    if (config_.se_enabled) x = ses_[i].infer(x);
  }
  return softmax(head_.infer(x.values));
}

std::vector<Tensor*> Network::parameter_tensors() {
  std::vector<Tensor*> out;
  for (std::size_t i = 0; i < kConvLayers; ++i) {
    out.push_back(&convs_[i].weight);
    out.push_back(&convs_[i].bias);
    if (config_.se_enabled) {
      out.push_back(&ses_[i].fc1.weight);
      out.push_back(&ses_[i].fc1.bias);
      out.push_back(&ses_[i].fc2.weight);
      out.push_back(&ses_[i].fc2.bias);
    }
  }
  out.push_back(&head_.weight);
  out.push_back(&head_.bias);
  return out;
}

std::vector<const Tensor*> Network::parameter_tensors() const {
  auto mutable_view = const_cast<Network*>(this)->parameter_tensors();
  return {mutable_view.begin(), mutable_view.end()};
}

std::vector<ParamView> Network::parameters() {
  std::vector<ParamView> out;
  for (auto* t : parameter_tensors()) out.push_back(t->view());
  return out;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto* t : parameter_tensors()) n += t->size();
  return n;
}

void Network::zero_grad() {
  for (auto* t : parameter_tensors()) t->zero_grad();
}

double Network::apply_orthogonal_regularization(double lambda) {
  if (lambda == 0.0) return 0.0;
  double total = 0.0;
  for (auto& conv : convs_) {
    auto reg = orthogonal_regularization(conv.weight.values, conv.out_channels(), conv.fan_in(), lambda);
    total += reg.penalty;
    for (std::size_t i = 0; i < reg.grad.size(); ++i) conv.weight.grad[i] += reg.grad[i];
  }
  return total;
}

double Network::orthogonal_penalty(double lambda) const {
  if (lambda == 0.0) return 0.0;
  double total = 0.0;
  for (const auto& conv : convs_) {
    total += orthogonal_regularization(conv.weight.values, conv.out_channels(), conv.fan_in(), lambda).penalty;
  }
  return total;
}

}  // namespace essc::nn
