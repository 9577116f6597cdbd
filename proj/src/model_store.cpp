#include "essc/model_store.hpp"

#include <algorithm>
#include <string>

#include "bytes.hpp"
#include "essc/error.hpp"

namespace essc::model_store {

namespace {

// Shared envelope: magic | version | flags | payload length | payload | crc32.
// The checksum covers everything between the magic and itself.
std::vector<std::uint8_t> seal(const char (&magic)[8], std::uint32_t flags, std::span<const std::uint8_t> payload) {
  detail::ByteWriter w;
  w.raw(magic, 8);
  w.u32(kFormatVersion);
  w.u32(flags);
  w.u64(payload.size());
  w.raw(payload.data(), payload.size());
  w.u32(detail::crc32_of(std::span<const std::uint8_t>(w.bytes()).subspan(8)));
  return std::move(w.bytes());
}

struct Envelope {
  std::uint32_t flags = 0;
  std::span<const std::uint8_t> payload;
};

Envelope unseal(const char (&magic)[8], std::span<const std::uint8_t> bytes, const char* what) {
  if (bytes.size() < 8 || !std::equal(magic, magic + 8, bytes.begin())) {
    fail(ErrorKind::BadMagic, std::string("not an ") + std::string(magic, 8) + " " + what);
  }
  detail::ByteReader r(bytes.subspan(8));
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion) {
    fail(ErrorKind::VersionUnsupported, std::string(what) + " format version " + std::to_string(version) +
                                            " is not supported (expected " + std::to_string(kFormatVersion) + ")");
  }
  const std::uint32_t flags = r.u32();
  const std::uint64_t len = r.u64();
  const std::size_t header = 8 + 4 + 4 + 8;
  if (bytes.size() < header + 4 || len > bytes.size() - header - 4) {
    fail(ErrorKind::TruncatedData, std::string(what) + " is truncated");
  }
  if (len != bytes.size() - header - 4) {
    fail(ErrorKind::MalformedHeader, std::string(what) + " has bytes beyond its declared payload");
  }
  detail::ByteReader tail(bytes.last(4));
  if (detail::crc32_of(bytes.subspan(8, bytes.size() - 12)) != tail.u32()) {
    fail(ErrorKind::ChecksumMismatch, std::string(what) + " checksum mismatch");
  }
  return {flags, bytes.subspan(header, len)};
}

void write_activation(detail::ByteWriter& w, const nn::Activation& a) {
  w.u8(static_cast<std::uint8_t>(a.type));
  w.f64(a.alpha);
}

nn::Activation read_activation(detail::ByteReader& r) {
  const auto type = r.u8();
  const double alpha = r.f64();
  switch (type) {
    case 0: return nn::Activation::identity();
    case 1: return nn::Activation::sigmoid();
    case 2: return nn::Activation::relu();
    case 3: return nn::Activation::leaky_relu(alpha);
  }
  fail(ErrorKind::MalformedHeader, "unknown activation code " + std::to_string(type));
}

void write_tensor(detail::ByteWriter& w, const nn::Tensor& t) {
  w.u32(static_cast<std::uint32_t>(t.shape.size()));
  for (auto d : t.shape) w.u32(static_cast<std::uint32_t>(d));
  for (double v : t.values) w.f64(v);
}

void read_tensor_into(detail::ByteReader& r, nn::Tensor& t, const char* what) {
  const std::uint32_t rank = r.u32();
  std::vector<std::size_t> shape(rank);
  for (auto& d : shape) d = r.u32();
  if (shape != t.shape) {
    std::string got, want;
    for (auto d : shape) got += (got.empty() ? "" : "x") + std::to_string(d);
    for (auto d : t.shape) want += (want.empty() ? "" : "x") + std::to_string(d);
    fail(ErrorKind::ShapeMismatch, std::string(what) + " blob is " + got + " but the architecture needs " + want);
  }
  r.need(t.values.size() * 8);
  for (auto& v : t.values) v = r.f64();
}

void write_array(detail::ByteWriter& w, std::span<const double> xs) {
  w.u64(xs.size());
  for (double v : xs) w.f64(v);
}

std::vector<double> read_array(detail::ByteReader& r) {
  const std::uint64_t n = r.u64();
  r.need(n * 8);
  std::vector<double> xs(n);
  for (auto& v : xs) v = r.f64();
  return xs;
}

}  // namespace

std::vector<std::uint8_t> save(const nn::Network& net, const optim::AdamState* adam) {
  const auto& c = net.config();
  detail::ByteWriter w;
  w.u32(static_cast<std::uint32_t>(c.input_channels));
  w.u32(static_cast<std::uint32_t>(c.input_height));
  w.u32(static_cast<std::uint32_t>(c.input_width));
  w.u32(static_cast<std::uint32_t>(nn::kConvLayers));
  w.u32(static_cast<std::uint32_t>(c.kernel));
  for (std::size_t i = 0; i < nn::kConvLayers; ++i) {
    w.u32(static_cast<std::uint32_t>(c.channels[i]));
    w.u32(static_cast<std::uint32_t>(c.strides[i]));
  }
  write_activation(w, c.activation);
  w.u8(c.se_enabled ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(c.se_ratio));
  w.u8(static_cast<std::uint8_t>(c.gate));
  w.u32(static_cast<std::uint32_t>(c.num_classes));

  const auto tensors = net.parameter_tensors();
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto* t : tensors) write_tensor(w, *t);

  if (adam) {
    w.f64(adam->config.lr);
    w.f64(adam->config.beta1);
    w.f64(adam->config.beta2);
    w.f64(adam->config.eps);
    w.u64(adam->t);
    w.u32(static_cast<std::uint32_t>(adam->m.size()));
    for (std::size_t i = 0; i < adam->m.size(); ++i) {
      write_array(w, adam->m[i]);
      write_array(w, adam->v[i]);
    }
  }
  return seal(kModelMagic, adam ? kFlagAdamState : 0u, w.bytes());
}

LoadedModel load(std::span<const std::uint8_t> bytes) {
  const auto env = unseal(kModelMagic, bytes, "model file");
  if (env.flags & ~kFlagAdamState) fail(ErrorKind::MalformedHeader, "model file has unknown flags");
  detail::ByteReader r(env.payload);
  nn::NetworkConfig c;
  c.input_channels = r.u32();
  c.input_height = r.u32();
  c.input_width = r.u32();
  if (r.u32() != nn::kConvLayers) fail(ErrorKind::ShapeMismatch, "model file does not describe a 7-layer network");
  c.kernel = r.u32();
  for (std::size_t i = 0; i < nn::kConvLayers; ++i) {
    c.channels[i] = r.u32();
    c.strides[i] = r.u32();
  }
  c.activation = read_activation(r);
  c.se_enabled = r.u8() != 0;
  c.se_ratio = r.u32();
  const auto gate = r.u8();
  if (gate > 1) fail(ErrorKind::MalformedHeader, "unknown gate code " + std::to_string(gate));
  c.gate = static_cast<nn::GateType>(gate);
  c.num_classes = r.u32();

  LoadedModel out{nn::Network(c, 0), std::nullopt};
  auto tensors = out.network.parameter_tensors();
  const std::uint32_t count = r.u32();
  if (count != tensors.size()) {
    fail(ErrorKind::ShapeMismatch, "model file holds " + std::to_string(count) + " parameter blobs, architecture has " +
                                       std::to_string(tensors.size()));
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    read_tensor_into(r, *tensors[i], ("parameter " + std::to_string(i)).c_str());
  }

  if (env.flags & kFlagAdamState) {
    optim::AdamConfig ac;
    ac.lr = r.f64();
    ac.beta1 = r.f64();
    ac.beta2 = r.f64();
    ac.eps = r.f64();
    optim::AdamState st(ac);
    st.t = r.u64();
    const std::uint32_t n = r.u32();
    if (n != 0 && n != tensors.size()) fail(ErrorKind::ShapeMismatch, "optimizer state does not match parameters");
    for (std::uint32_t i = 0; i < n; ++i) {
      st.m.push_back(read_array(r));
      st.v.push_back(read_array(r));
      if (st.m.back().size() != tensors[i]->size() || st.v.back().size() != tensors[i]->size()) {
        fail(ErrorKind::ShapeMismatch, "optimizer moment " + std::to_string(i) + " has the wrong length");
      }
    }
    out.adam = std::move(st);
  }
  if (r.remaining() != 0) fail(ErrorKind::MalformedHeader, "model file has trailing payload bytes");
  return out;
}

void save_file(const std::filesystem::path& path, const nn::Network& net, const optim::AdamState* adam) {
  detail::write_file(path.string(), save(net, adam));
}

LoadedModel load_file(const std::filesystem::path& path) { return load(detail::read_file(path.string())); }

std::vector<std::uint8_t> save_autoencoder(const hht::Autoencoder& ae) {
  detail::ByteWriter w;
  w.u32(static_cast<std::uint32_t>(ae.time_bins()));
  w.u32(static_cast<std::uint32_t>(ae.freq_bins()));
  w.u32(static_cast<std::uint32_t>(ae.latent_dim()));
  write_activation(w, ae.encoder.activation);
  write_tensor(w, ae.encoder.weight);
  write_tensor(w, ae.encoder.bias);
  write_tensor(w, ae.decoder.weight);
  write_tensor(w, ae.decoder.bias);
  write_array(w, ae.loss_history);
  return seal(kAutoencoderMagic, 0u, w.bytes());
}

hht::Autoencoder load_autoencoder(std::span<const std::uint8_t> bytes) {
  const auto env = unseal(kAutoencoderMagic, bytes, "autoencoder file");
  detail::ByteReader r(env.payload);
  const std::size_t t = r.u32(), f = r.u32(), latent = r.u32();
  const auto act = read_activation(r);
  if (act.type != nn::ActivationType::LeakyReLU) fail(ErrorKind::MalformedHeader, "autoencoder encoder must be leaky");
  hht::Autoencoder ae(t, f, latent, act.alpha, 0);
  read_tensor_into(r, ae.encoder.weight, "encoder weight");
  read_tensor_into(r, ae.encoder.bias, "encoder bias");
  read_tensor_into(r, ae.decoder.weight, "decoder weight");
  read_tensor_into(r, ae.decoder.bias, "decoder bias");
  ae.loss_history = read_array(r);
  if (r.remaining() != 0) fail(ErrorKind::MalformedHeader, "autoencoder file has trailing payload bytes");
  return ae;
}

void save_autoencoder_file(const std::filesystem::path& path, const hht::Autoencoder& ae) {
  detail::write_file(path.string(), save_autoencoder(ae));
}

hht::Autoencoder load_autoencoder_file(const std::filesystem::path& path) {
  return load_autoencoder(detail::read_file(path.string()));
}

}  // namespace essc::model_store
