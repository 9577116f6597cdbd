#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "essc/param.hpp"

namespace essc::nn {

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;
  std::vector<double> grad;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0);
  Tensor(std::vector<std::size_t> dims, std::vector<double> data);

  std::size_t size() const { return values.size(); }
  void zero_grad();
  ParamView view() { return {values, grad}; }
};

std::size_t shape_product(std::span<const std::size_t> shape);

double sigmoid(double x);
double relu(double x);
double leaky_relu(double x, double alpha);

enum class ActivationType : std::uint8_t { Identity = 0, Sigmoid = 1, ReLU = 2, LeakyReLU = 3 };

struct Activation {
  ActivationType type = ActivationType::Identity;
  double alpha = 0.0;  // negative-branch slope, LeakyReLU only

  static Activation identity() { return {ActivationType::Identity, 0.0}; }
  static Activation sigmoid() { return {ActivationType::Sigmoid, 0.0}; }
  static Activation relu() { return {ActivationType::ReLU, 0.0}; }
  static Activation leaky_relu(double alpha);

  double apply(double pre) const;
  // d activation / d pre-activation. At exactly 0 the rectifiers take the
  // negative-branch slope.
  double derivative(double pre) const;
  bool rectifier() const { return type == ActivationType::ReLU || type == ActivationType::LeakyReLU; }
  std::string name() const;

  bool operator==(const Activation&) const = default;
};

// rows x cols, row-major, with orthonormal rows (rows <= cols) or orthonormal
// columns (rows > cols). Each orthonormal vector is signed so that its first
// non-zero entry is positive.
std::vector<double> orthogonal_init(std::size_t rows, std::size_t cols, std::uint64_t seed);

struct OrthoPenalty {
  double penalty = 0.0;
  std::vector<double> grad;  // same layout as the weights
};

// lambda * ||W W^T - I||_F^2 on the smaller Gram side (W^T W when rows > cols).
OrthoPenalty orthogonal_regularization(std::span<const double> weights, std::size_t rows,
                                       std::size_t cols, double lambda);

std::vector<double> softmax(std::span<const double> logits);

inline constexpr double kCrossEntropyEps = 1e-12;
double cross_entropy(std::span<const double> probs, std::size_t label);
// d loss / d probs.
std::vector<double> cross_entropy_grad(std::span<const double> probs, std::size_t label);

class DenseLayer {
 public:
  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out, Activation activation);

  void init_orthogonal(std::uint64_t seed);

  std::vector<double> forward(std::span<const double> x);
  // Accumulates parameter gradients; returns d loss / d input.
  std::vector<double> backward(std::span<const double> grad_out);
  std::vector<double> infer(std::span<const double> x) const;

  std::size_t in() const { return in_; }
  std::size_t out() const { return out_; }
  std::span<const double> last_preactivation() const { return pre_; }

  Tensor weight;  // [out, in]
  Tensor bias;    // [out]
  Activation activation;

 private:
  void affine(std::span<const double> x, std::span<double> pre) const;

  std::size_t in_ = 0;
  std::size_t out_ = 0;
  std::vector<double> input_;
  std::vector<double> pre_;
  bool cached_ = false;
};

struct Shape3 {
  std::size_t c = 0, h = 0, w = 0;
  std::size_t size() const { return c * h * w; }
  bool operator==(const Shape3&) const = default;
};

class ConvLayer {
 public:
  ConvLayer() = default;
  ConvLayer(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride,
            std::size_t padding, Activation activation);

  void init_orthogonal(std::uint64_t seed);

  Shape3 output_shape(Shape3 input) const;

  // Input and output tensors are [C, H, W].
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out);
  Tensor infer(const Tensor& x) const;

  std::size_t in_channels() const { return in_c_; }
  std::size_t out_channels() const { return out_c_; }
  std::size_t kernel() const { return k_; }
  std::size_t stride() const { return stride_; }
  std::size_t padding() const { return pad_; }
  std::size_t fan_in() const { return in_c_ * k_ * k_; }
  std::span<const double> last_preactivation() const { return pre_.values; }

  Tensor weight;  // [out, in, k, k]
  Tensor bias;    // [out]
  Activation activation;

 private:
  Shape3 checked_output(const Tensor& x) const;
  void im2col(const Tensor& x, Shape3 out_shape, std::vector<double>& col) const;
  void correlate(std::span<const double> col, Shape3 out_shape, std::vector<double>& pre) const;

  std::size_t in_c_ = 0, out_c_ = 0, k_ = 1, stride_ = 1, pad_ = 0;
  Shape3 in_shape_;
  std::vector<double> col_;
  Tensor pre_;
  bool cached_ = false;
};

enum class GateType : std::uint8_t { Sigmoid = 0, ClampedLeaky = 1 };

// Squeeze (global average pool) -> fc1 -> hidden activation -> fc2 -> gate,
// then channel-wise rescaling of the input.
class SeBlock {
 public:
  SeBlock() = default;
  SeBlock(std::size_t channels, std::size_t reduction, Activation hidden, GateType gate, double gate_alpha);

  void init_orthogonal(std::uint64_t seed);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out);
  Tensor infer(const Tensor& x) const;

  double gate_value(double u) const;
  double gate_derivative(double u) const;

  std::size_t channels() const { return channels_; }
  std::size_t reduction() const { return reduction_; }
  GateType gate() const { return gate_; }
  double gate_alpha() const { return gate_alpha_; }
  std::span<const double> last_gate_preactivation() const { return gate_pre_; }

  DenseLayer fc1;
  DenseLayer fc2;

 private:
  std::size_t channels_ = 0;
  std::size_t reduction_ = 1;
  GateType gate_ = GateType::Sigmoid;
  double gate_alpha_ = 0.1;
  Tensor input_;
  std::vector<double> gate_pre_;
  std::vector<double> gates_;
  bool cached_ = false;
};

inline constexpr std::size_t kConvLayers = 7;

struct NetworkConfig {
  std::size_t input_channels = 1;
  std::size_t input_height = 16;
  std::size_t input_width = 16;
  std::array<std::size_t, kConvLayers> channels = {8, 16, 16, 32, 32, 64, 64};
  std::array<std::size_t, kConvLayers> strides = {1, 1, 1, 1, 1, 2, 2};
  std::size_t kernel = 3;
  Activation activation = Activation::leaky_relu(0.1);
  bool se_enabled = true;
  std::size_t se_ratio = 4;
  GateType gate = GateType::ClampedLeaky;
  std::size_t num_classes = 5;

  bool operator==(const NetworkConfig&) const = default;
};

// Seven convolutions (each optionally followed by an SE block), one dense
// layer and a softmax head.
class Network {
 public:
  Network(const NetworkConfig& config, std::uint64_t seed);

  const NetworkConfig& config() const { return config_; }
  Shape3 input_shape() const { return {config_.input_channels, config_.input_height, config_.input_width}; }

  // Class probabilities; caches activations for backward().
  std::vector<double> forward(const Tensor& input);
  // Takes d loss / d probabilities; accumulates every parameter gradient and
  // returns d loss / d input.
  Tensor backward(std::span<const double> grad_probs);
  // Cache-free forward, safe to call concurrently on a shared network.
  std::vector<double> predict(const Tensor& input) const;

  void zero_grad();
  std::vector<ParamView> parameters();
  std::vector<const Tensor*> parameter_tensors() const;
  std::vector<Tensor*> parameter_tensors();
  std::size_t parameter_count() const;

  // Adds the penalty gradient of every convolution kernel (viewed as
  // [out, in*k*k]) into its grad buffer and returns the summed penalty.
  double apply_orthogonal_regularization(double lambda);
  double orthogonal_penalty(double lambda) const;

  ConvLayer& conv(std::size_t i) { return convs_.at(i); }
  const ConvLayer& conv(std::size_t i) const { return convs_.at(i); }
  SeBlock& se(std::size_t i) { return ses_.at(i); }
  const SeBlock& se(std::size_t i) const { return ses_.at(i); }
  DenseLayer& head() { return head_; }
  const DenseLayer& head() const { return head_; }

 private:
  void check_input(const Tensor& input) const;

  NetworkConfig config_;
  std::vector<ConvLayer> convs_;
  std::vector<SeBlock> ses_;
  DenseLayer head_;
  Shape3 final_shape_;
  std::vector<double> probs_;
  bool cached_ = false;
};

}  // namespace essc::nn
