#include "essc/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "essc/error.hpp"
#include "essc/rng.hpp"

namespace essc::nn {

Tensor::Tensor(std::vector<std::size_t> dims, double fill)
    : shape(std::move(dims)), values(shape_product(shape), fill), grad(values.size(), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> dims, std::vector<double> data)
    : shape(std::move(dims)), values(std::move(data)), grad(values.size(), 0.0) {
  if (values.size() != shape_product(shape)) fail(ErrorKind::ShapeMismatch, "tensor data does not match its shape");
}

void Tensor::zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

std::size_t shape_product(std::span<const std::size_t> shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double relu(double x) { return x > 0.0 ? x : 0.0; }

double leaky_relu(double x, double alpha) { return x > 0.0 ? x : alpha * x; }

Activation Activation::leaky_relu(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    fail(ErrorKind::InvalidArgument, "LeakyReLU alpha must lie in (0, 1)");
  }
  return {ActivationType::LeakyReLU, alpha};
}

double Activation::apply(double pre) const {
  switch (type) {
    case ActivationType::Identity: return pre;
    case ActivationType::Sigmoid: return nn::sigmoid(pre);
    case ActivationType::ReLU: return nn::relu(pre);
    case ActivationType::LeakyReLU: return nn::leaky_relu(pre, alpha);
  }
  return pre;
}

double Activation::derivative(double pre) const {
  switch (type) {
    case ActivationType::Identity: return 1.0;
    case ActivationType::Sigmoid: {
      const double s = nn::sigmoid(pre);
      return s * (1.0 - s);
    }
    case ActivationType::ReLU: return pre > 0.0 ? 1.0 : 0.0;
    case ActivationType::LeakyReLU: return pre > 0.0 ? 1.0 : alpha;
  }
  return 1.0;
}

std::string Activation::name() const {
  switch (type) {
    case ActivationType::Identity: return "identity";
    case ActivationType::Sigmoid: return "sigmoid";
    case ActivationType::ReLU: return "relu";
    case ActivationType::LeakyReLU: {
      char buffer[48];
      std::snprintf(buffer, sizeof(buffer), "leaky_relu(%g)", alpha);
      return buffer;
    }
  }
  return "?";
}

std::vector<double> orthogonal_init(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  if (rows == 0 || cols == 0) fail(ErrorKind::InvalidArgument, "orthogonal_init needs rows, cols >= 1");
  // Orthonormalize `count` Gaussian vectors of length `dim`.
  const std::size_t count = std::min(rows, cols);
  const std::size_t dim = std::max(rows, cols);
  Rng rng(seed);
  std::vector<std::vector<double>> basis(count, std::vector<double>(dim));
  for (auto& v : basis) {
    for (auto& x : v) x = rng.normal();
  }
  for (std::size_t j = 0; j < count; ++j) {
    auto& v = basis[j];
    // Two Gram-Schmidt passes bring the Gram error down to round-off.
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t i = 0; i < j; ++i) {
        const auto& q = basis[i];
        double dot = 0.0;
        for (std::size_t d = 0; d < dim; ++d) dot += q[d] * v[d];
        for (std::size_t d = 0; d < dim; ++d) v[d] -= dot * q[d];
      }
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-12) fail(ErrorKind::NonFinite, "degenerate Gaussian draw in orthogonal_init");
    for (auto& x : v) x /= norm;
    auto first = std::find_if(v.begin(), v.end(), [](double x) { return x != 0.0; });
    if (first != v.end() && *first < 0.0) {
      for (auto& x : v) x = -x;
    }
  }
  std::vector<double> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      out[r * cols + c] = rows <= cols ? basis[r][c] : basis[c][r];
    }
  }
  return out;
}

OrthoPenalty orthogonal_regularization(std::span<const double> w, std::size_t rows, std::size_t cols,
                                       double lambda) {
  if (w.size() != rows * cols) fail(ErrorKind::ShapeMismatch, "weight view does not match rows x cols");
  if (lambda < 0.0) fail(ErrorKind::InvalidArgument, "lambda must be >= 0");
  OrthoPenalty out;
  out.grad.assign(w.size(), 0.0);
  if (lambda == 0.0) return out;

  const bool row_side = rows <= cols;
  const std::size_t g = row_side ? rows : cols;
  // gram = W W^T - I (row side) or W^T W - I (column side).
  std::vector<double> gram(g * g, 0.0);
  for (std::size_t a = 0; a < g; ++a) {
    for (std::size_t b = a; b < g; ++b) {
      double dot = 0.0;
      if (row_side) {
        for (std::size_t k = 0; k < cols; ++k) dot += w[a * cols + k] * w[b * cols + k];
      } else {
        for (std::size_t k = 0; k < rows; ++k) dot += w[k * cols + a] * w[k * cols + b];
      }
      if (a == b) dot -= 1.0;
      gram[a * g + b] = dot;
      gram[b * g + a] = dot;
    }
  }
  double sq = 0.0;
  for (double x : gram) sq += x * x;
  out.penalty = lambda * sq;

  const double scale = 4.0 * lambda;
  if (row_side) {
    // 4 lambda (W W^T - I) W
    for (std::size_t a = 0; a < rows; ++a) {
      for (std::size_t b = 0; b < rows; ++b) {
        const double m = gram[a * g + b];
        if (m == 0.0) continue;
        for (std::size_t k = 0; k < cols; ++k) out.grad[a * cols + k] += scale * m * w[b * cols + k];
      }
    }
  } else {
    // 4 lambda W (W^T W - I)
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t a = 0; a < cols; ++a) {
        double acc = 0.0;
        for (std::size_t b = 0; b < cols; ++b) acc += w[r * cols + b] * gram[b * g + a];
        out.grad[r * cols + a] = scale * acc;
      }
    }
  }
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) return {};
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    sum += out[i];
  }
  for (auto& p : out) p /= sum;
  return out;
}

double cross_entropy(std::span<const double> probs, std::size_t label) {
  if (label >= probs.size()) {
    fail(ErrorKind::IndexOutOfRange,
         "label " + std::to_string(label) + " outside " + std::to_string(probs.size()) + " classes");
  }
  return -std::log(probs[label] + kCrossEntropyEps);
}

std::vector<double> cross_entropy_grad(std::span<const double> probs, std::size_t label) {
  if (label >= probs.size()) {
    fail(ErrorKind::IndexOutOfRange,
         "label " + std::to_string(label) + " outside " + std::to_string(probs.size()) + " classes");
  }
  std::vector<double> grad(probs.size(), 0.0);
  grad[label] = -1.0 / (probs[label] + kCrossEntropyEps);
  return grad;
}

// ---------------------------------------------------------------- DenseLayer

DenseLayer::DenseLayer(std::size_t in, std::size_t out, Activation act)
    : weight({out, in}), bias({out}), activation(act), in_(in), out_(out) {
  if (in == 0 || out == 0) fail(ErrorKind::InvalidArgument, "dense layer dimensions must be >= 1");
}

void DenseLayer::init_orthogonal(std::uint64_t seed) {
  weight.values = orthogonal_init(out_, in_, seed);
  std::fill(bias.values.begin(), bias.values.end(), 0.0);
}

void DenseLayer::affine(std::span<const double> x, std::span<double> pre) const {
  for (std::size_t o = 0; o < out_; ++o) {
    const double* row = weight.values.data() + o * in_;
    double acc = bias.values[o];
    for (std::size_t i = 0; i < in_; ++i) acc += row[i] * x[i];
    pre[o] = acc;
  }
}

std::vector<double> DenseLayer::forward(std::span<const double> x) {
  if (x.size() != in_) {
    fail(ErrorKind::ShapeMismatch,
         "dense layer expects " + std::to_string(in_) + " inputs, got " + std::to_string(x.size()));
  }
  input_.assign(x.begin(), x.end());
  pre_.assign(out_, 0.0);
  affine(x, pre_);
  std::vector<double> out(out_);
  for (std::size_t o = 0; o < out_; ++o) out[o] = activation.apply(pre_[o]);
  cached_ = true;
  return out;
}

std::vector<double> DenseLayer::backward(std::span<const double> grad_out) {
  if (!cached_) fail(ErrorKind::NoForwardCache, "dense backward called before forward");
  if (grad_out.size() != out_) fail(ErrorKind::ShapeMismatch, "dense backward gradient has the wrong size");
  std::vector<double> grad_in(in_, 0.0);
  for (std::size_t o = 0; o < out_; ++o) {
    const double d = grad_out[o] * activation.derivative(pre_[o]);
    if (d == 0.0) continue;
    bias.grad[o] += d;
    double* wg = weight.grad.data() + o * in_;
    const double* w = weight.values.data() + o * in_;
    for (std::size_t i = 0; i < in_; ++i) {
      wg[i] += d * input_[i];
      grad_in[i] += d * w[i];
    }
  }
  return grad_in;
}

std::vector<double> DenseLayer::infer(std::span<const double> x) const {
  if (x.size() != in_) {
    fail(ErrorKind::ShapeMismatch,
         "dense layer expects " + std::to_string(in_) + " inputs, got " + std::to_string(x.size()));
  }
  std::vector<double> out(out_);
  affine(x, out);
  for (auto& v : out) v = activation.apply(v);
  return out;
}

// ----------------------------------------------------------------- ConvLayer

ConvLayer::ConvLayer(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride,
                     std::size_t padding, Activation act)
    : weight({out_channels, in_channels, kernel, kernel}),
      bias({out_channels}),
      activation(act),
      in_c_(in_channels),
      out_c_(out_channels),
      k_(kernel),
      stride_(stride),
      pad_(padding) {
  if (in_channels == 0 || out_channels == 0 || kernel == 0 || stride == 0) {
    fail(ErrorKind::InvalidArgument, "convolution dimensions must be >= 1");
  }
}

void ConvLayer::init_orthogonal(std::uint64_t seed) {
  weight.values = orthogonal_init(out_c_, fan_in(), seed);
  std::fill(bias.values.begin(), bias.values.end(), 0.0);
}

Shape3 ConvLayer::output_shape(Shape3 in) const {
  if (in.c != in_c_) {
    fail(ErrorKind::ShapeMismatch,
         "convolution expects " + std::to_string(in_c_) + " channels, got " + std::to_string(in.c));
  }
  if (in.h + 2 * pad_ < k_ || in.w + 2 * pad_ < k_) {
    fail(ErrorKind::ShapeMismatch, "input smaller than the convolution kernel");
  }
  return {out_c_, (in.h + 2 * pad_ - k_) / stride_ + 1, (in.w + 2 * pad_ - k_) / stride_ + 1};
}

Shape3 ConvLayer::checked_output(const Tensor& x) const {
  if (x.shape.size() != 3 || x.values.size() != shape_product(x.shape)) {
    fail(ErrorKind::ShapeMismatch, "convolution input must be a [C, H, W] tensor");
  }
  return output_shape({x.shape[0], x.shape[1], x.shape[2]});
}

namespace {

// Output positions o in [lo, hi) whose input index o*stride + offset lies in
// [0, extent).
void valid_range(std::size_t out_extent, std::size_t in_extent, std::size_t stride, long offset,
                 std::size_t& lo, std::size_t& hi) {
  long first = offset >= 0 ? 0 : (-offset + static_cast<long>(stride) - 1) / static_cast<long>(stride);
  long last_excl = (static_cast<long>(in_extent) - 1 - offset) >= 0
                       ? (static_cast<long>(in_extent) - 1 - offset) / static_cast<long>(stride) + 1
                       : 0;
  last_excl = std::min<long>(last_excl, static_cast<long>(out_extent));
  first = std::min<long>(first, last_excl);
  lo = static_cast<std::size_t>(first);
  hi = static_cast<std::size_t>(std::max<long>(first, last_excl));
}

}  // namespace

// Patch matrix [fan_in, out_h*out_w]; zero where the kernel overhangs.
void ConvLayer::im2col(const Tensor& x, Shape3 os, std::vector<double>& col) const {
  const std::size_t ih = x.shape[1], iw = x.shape[2];
  const std::size_t plane = os.h * os.w;
  col.assign(fan_in() * plane, 0.0);
  for (std::size_t ic = 0; ic < in_c_; ++ic) {
    const double* in = x.values.data() + ic * ih * iw;
    for (std::size_t ky = 0; ky < k_; ++ky) {
      std::size_t oy_lo, oy_hi;
      valid_range(os.h, ih, stride_, static_cast<long>(ky) - static_cast<long>(pad_), oy_lo, oy_hi);
      for (std::size_t kx = 0; kx < k_; ++kx) {
        double* row = col.data() + ((ic * k_ + ky) * k_ + kx) * plane;
        std::size_t ox_lo, ox_hi;
        const long x_off = static_cast<long>(kx) - static_cast<long>(pad_);
        valid_range(os.w, iw, stride_, x_off, ox_lo, ox_hi);
        for (std::size_t oy = oy_lo; oy < oy_hi; ++oy) {
          const double* in_row = in + (oy * stride_ + ky - pad_) * iw;
          double* out_row = row + oy * os.w;
          for (std::size_t ox = ox_lo; ox < ox_hi; ++ox) out_row[ox] = in_row[static_cast<long>(ox * stride_) + x_off];
        }
      }
    }
  }
}

void ConvLayer::correlate(std::span<const double> col, Shape3 os, std::vector<double>& pre) const {
  const std::size_t plane = os.h * os.w;
  const std::size_t fan = fan_in();
  pre.assign(os.size(), 0.0);
  for (std::size_t oc = 0; oc < out_c_; ++oc) {
    double* out = pre.data() + oc * plane;
    std::fill(out, out + plane, bias.values[oc]);
    const double* w = weight.values.data() + oc * fan;
    for (std::size_t f = 0; f < fan; ++f) {
      const double wf = w[f];
      const double* c = col.data() + f * plane;
      for (std::size_t p = 0; p < plane; ++p) out[p] += wf * c[p];
    }
  }
}

Tensor ConvLayer::forward(const Tensor& x) {
  const Shape3 os = checked_output(x);
  in_shape_ = {x.shape[0], x.shape[1], x.shape[2]};
  im2col(x, os, col_);
  pre_.shape = {os.c, os.h, os.w};
  correlate(col_, os, pre_.values);
  Tensor out({os.c, os.h, os.w});
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = activation.apply(pre_.values[i]);
  cached_ = true;
  return out;
}

Tensor ConvLayer::infer(const Tensor& x) const {
  const Shape3 os = checked_output(x);
  std::vector<double> col;
  im2col(x, os, col);
  Tensor out({os.c, os.h, os.w});
  correlate(col, os, out.values);
  for (auto& v : out.values) v = activation.apply(v);
  return out;
}

Tensor ConvLayer::backward(const Tensor& grad_out) {
  if (!cached_) fail(ErrorKind::NoForwardCache, "convolution backward called before forward");
  if (grad_out.values.size() != pre_.values.size()) {
    fail(ErrorKind::ShapeMismatch, "convolution backward gradient has the wrong size");
  }
  const std::size_t ih = in_shape_.h, iw = in_shape_.w;
  const Shape3 os{pre_.shape[0], pre_.shape[1], pre_.shape[2]};
  const std::size_t plane = os.h * os.w;
  const std::size_t fan = fan_in();

  std::vector<double> dpre(pre_.values.size());
  for (std::size_t i = 0; i < dpre.size(); ++i) dpre[i] = grad_out.values[i] * activation.derivative(pre_.values[i]);

  std::vector<double> dcol(fan * plane, 0.0);
  for (std::size_t oc = 0; oc < out_c_; ++oc) {
    const double* d = dpre.data() + oc * plane;
    double bsum = 0.0;
    for (std::size_t p = 0; p < plane; ++p) bsum += d[p];
    bias.grad[oc] += bsum;
    const double* w = weight.values.data() + oc * fan;
    double* wg = weight.grad.data() + oc * fan;
    for (std::size_t f = 0; f < fan; ++f) {
      const double* c = col_.data() + f * plane;
      double* dc = dcol.data() + f * plane;
      const double wf = w[f];
      double acc = 0.0;
      for (std::size_t p = 0; p < plane; ++p) {
        acc += d[p] * c[p];
        dc[p] += wf * d[p];
      }
      wg[f] += acc;
    }
  }

  // col2im
  Tensor grad_in({in_c_, ih, iw});
  for (std::size_t ic = 0; ic < in_c_; ++ic) {
    double* gin = grad_in.values.data() + ic * ih * iw;
    for (std::size_t ky = 0; ky < k_; ++ky) {
      std::size_t oy_lo, oy_hi;
      valid_range(os.h, ih, stride_, static_cast<long>(ky) - static_cast<long>(pad_), oy_lo, oy_hi);
      for (std::size_t kx = 0; kx < k_; ++kx) {
        const double* row = dcol.data() + ((ic * k_ + ky) * k_ + kx) * plane;
        std::size_t ox_lo, ox_hi;
        const long x_off = static_cast<long>(kx) - static_cast<long>(pad_);
        valid_range(os.w, iw, stride_, x_off, ox_lo, ox_hi);
        for (std::size_t oy = oy_lo; oy < oy_hi; ++oy) {
          double* gin_row = gin + (oy * stride_ + ky - pad_) * iw;
          const double* r = row + oy * os.w;
          for (std::size_t ox = ox_lo; ox < ox_hi; ++ox) gin_row[static_cast<long>(ox * stride_) + x_off] += r[ox];
        }
      }
    }
  }
  return grad_in;
}

// ------------------------------------------------------------------- SeBlock

SeBlock::SeBlock(std::size_t channels, std::size_t reduction, Activation hidden, GateType gate, double gate_alpha)
    : fc1(channels, std::max<std::size_t>(1, channels / std::max<std::size_t>(1, reduction)), hidden),
      fc2(std::max<std::size_t>(1, channels / std::max<std::size_t>(1, reduction)), channels, Activation::identity()),
      channels_(channels),
      reduction_(std::max<std::size_t>(1, reduction)),
      gate_(gate),
      gate_alpha_(gate_alpha) {}

void SeBlock::init_orthogonal(std::uint64_t seed) {
  fc1.init_orthogonal(derive_seed(seed, 1));
  fc2.init_orthogonal(derive_seed(seed, 2));
  // The clamped gate starts just below its ceiling: close to pass-through, but
  // still inside the region where it has a gradient.
  const double start = gate_ == GateType::ClampedLeaky ? 0.9 : 0.0;
  std::fill(fc2.bias.values.begin(), fc2.bias.values.end(), start);
}

double SeBlock::gate_value(double u) const {
  if (gate_ == GateType::Sigmoid) return sigmoid(u);
  return std::clamp(leaky_relu(u, gate_alpha_), 0.0, 1.0);
}

double SeBlock::gate_derivative(double u) const {
  if (gate_ == GateType::Sigmoid) {
    const double s = sigmoid(u);
    return s * (1.0 - s);
  }
  const double v = leaky_relu(u, gate_alpha_);
  if (v <= 0.0 || v >= 1.0) return 0.0;
  return u > 0.0 ? 1.0 : gate_alpha_;
}

namespace {

std::vector<double> channel_means(const Tensor& x) {
  const std::size_t c = x.shape[0];
  const std::size_t plane = x.shape[1] * x.shape[2];
  std::vector<double> s(c, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* p = x.values.data() + ch * plane;
    double acc = 0.0;
    for (std::size_t i = 0; i < plane; ++i) acc += p[i];
    s[ch] = acc / static_cast<double>(plane);
  }
  return s;
}

void check_se_input(const Tensor& x, std::size_t channels) {
  if (x.shape.size() != 3 || x.shape[0] != channels) {
    fail(ErrorKind::ShapeMismatch, "SE block expects a [" + std::to_string(channels) + ", H, W] tensor");
  }
}

}  // namespace

Tensor SeBlock::forward(const Tensor& x) {
  check_se_input(x, channels_);
  input_ = x;
  auto hidden = fc1.forward(channel_means(x));
  gate_pre_ = fc2.forward(hidden);
  gates_.resize(channels_);
  for (std::size_t c = 0; c < channels_; ++c) gates_[c] = gate_value(gate_pre_[c]);
  Tensor out(x.shape);
  const std::size_t plane = x.shape[1] * x.shape[2];
  for (std::size_t c = 0; c < channels_; ++c) {
    for (std::size_t i = 0; i < plane; ++i) out.values[c * plane + i] = x.values[c * plane + i] * gates_[c];
  }
  cached_ = true;
  return out;
}

Tensor SeBlock::infer(const Tensor& x) const {
  check_se_input(x, channels_);
  auto u = fc2.infer(fc1.infer(channel_means(x)));
  Tensor out(x.shape);
  const std::size_t plane = x.shape[1] * x.shape[2];
  for (std::size_t c = 0; c < channels_; ++c) {
    const double g = gate_value(u[c]);
    for (std::size_t i = 0; i < plane; ++i) out.values[c * plane + i] = x.values[c * plane + i] * g;
  }
  return out;
}

Tensor SeBlock::backward(const Tensor& grad_out) {
  if (!cached_) fail(ErrorKind::NoForwardCache, "SE backward called before forward");
  if (grad_out.values.size() != input_.values.size()) fail(ErrorKind::ShapeMismatch, "SE backward gradient has the wrong size");
  const std::size_t plane = input_.shape[1] * input_.shape[2];
  Tensor grad_in(input_.shape);
  std::vector<double> d_gate_pre(channels_);
  for (std::size_t c = 0; c < channels_; ++c) {
    double dg = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      const std::size_t idx = c * plane + i;
      dg += grad_out.values[idx] * input_.values[idx];
      grad_in.values[idx] = grad_out.values[idx] * gates_[c];
    }
    d_gate_pre[c] = dg * gate_derivative(gate_pre_[c]);
  }
  auto d_hidden = fc2.backward(d_gate_pre);
  auto d_means = fc1.backward(d_hidden);
  for (std::size_t c = 0; c < channels_; ++c) {
    const double share = d_means[c] / static_cast<double>(plane);
    for (std::size_t i = 0; i < plane; ++i) grad_in.values[c * plane + i] += share;
  }
  return grad_in;
}

}  // namespace essc::nn
