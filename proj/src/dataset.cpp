#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "bytes.hpp"
#include "essc/error.hpp"
#include "essc/pipeline.hpp"

namespace essc {

namespace io {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorKind::IoError, "failed reading " + path);
  return bytes;
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::IoError, "cannot create " + tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::IoError, "failed writing " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::IoError, "cannot move " + tmp + " to " + path + ": " + ec.message());
}

std::string read_text(const std::string& path) {
  const auto bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

void write_text(const std::string& path, std::string_view text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace io

namespace pipeline {

namespace {
constexpr std::uint32_t kFlagLabeled = 1u << 0;
constexpr std::uint32_t kFlagReduced = 1u << 1;
}  // namespace

nn::Tensor Dataset::tensor(std::size_t i) const {
  const auto& img = images.at(i);
  return nn::Tensor({channels, height, width}, std::vector<double>(img.begin(), img.end()));
}

std::array<std::size_t, kNumStages> Dataset::class_counts() const {
  std::array<std::size_t, kNumStages> counts{};
  for (auto s : labels) ++counts[stage_index(s)];
  return counts;
}

void Dataset::validate() const {
  if (channels == 0 || height == 0 || width == 0) fail(ErrorKind::InvalidArgument, "dataset image shape is empty");
  for (const auto& img : images) {
    if (img.size() != image_size()) fail(ErrorKind::DimensionMismatch, "dataset images differ in size");
    for (float v : img) {
      if (!std::isfinite(v)) fail(ErrorKind::NonFinite, "dataset image contains a non-finite value");
    }
  }
  if (!labels.empty() && labels.size() != images.size()) {
    fail(ErrorKind::DimensionMismatch, "dataset has " + std::to_string(images.size()) + " images but " +
                                           std::to_string(labels.size()) + " labels");
  }
  for (auto s : labels) {
    if (stage_index(s) >= kNumStages) fail(ErrorKind::UnknownLabel, "dataset label out of range");
  }
}

std::vector<std::uint8_t> serialize_dataset(const Dataset& ds) {
  ds.validate();
  detail::ByteWriter w;
  w.raw(kDatasetMagic, sizeof kDatasetMagic);
  w.u32(kDatasetVersion);
  w.u32((ds.labeled() ? kFlagLabeled : 0u) | (ds.reduced ? kFlagReduced : 0u));
  w.u32(static_cast<std::uint32_t>(ds.size()));
  w.u32(static_cast<std::uint32_t>(ds.channels));
  w.u32(static_cast<std::uint32_t>(ds.height));
  w.u32(static_cast<std::uint32_t>(ds.width));
  w.u64(ds.seed);
  w.str(ds.provenance);
  for (const auto& img : ds.images) {
    for (float v : img) w.f32(v);
  }
  for (auto s : ds.labels) w.u8(static_cast<std::uint8_t>(stage_index(s)));
  w.u32(detail::crc32_of(w.bytes()));
  return std::move(w.bytes());
}

Dataset deserialize_dataset(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof kDatasetMagic || !std::equal(kDatasetMagic, kDatasetMagic + 8, bytes.begin())) {
    fail(ErrorKind::BadMagic, "not an ESSCDS01 dataset cache");
  }
  if (bytes.size() < 12) fail(ErrorKind::TruncatedData, "dataset cache truncated");
  detail::ByteReader r(bytes);
  for (int i = 0; i < 8; ++i) r.u8();
  const std::uint32_t version = r.u32();
  if (version != kDatasetVersion) {
    fail(ErrorKind::VersionUnsupported, "dataset cache version " + std::to_string(version) + " is not supported");
  }
  if (bytes.size() < 16) fail(ErrorKind::TruncatedData, "dataset cache truncated");
  const std::uint32_t stored = static_cast<std::uint32_t>(bytes[bytes.size() - 4]) |
                               static_cast<std::uint32_t>(bytes[bytes.size() - 3]) << 8 |
                               static_cast<std::uint32_t>(bytes[bytes.size() - 2]) << 16 |
                               static_cast<std::uint32_t>(bytes[bytes.size() - 1]) << 24;
  if (detail::crc32_of(bytes.first(bytes.size() - 4)) != stored) {
    fail(ErrorKind::ChecksumMismatch, "dataset cache checksum mismatch");
  }
  Dataset ds;
  const std::uint32_t flags = r.u32();
  const std::uint32_t count = r.u32();
  ds.channels = r.u32();
  ds.height = r.u32();
  ds.width = r.u32();
  ds.seed = r.u64();
  ds.provenance = r.str();
  ds.reduced = (flags & kFlagReduced) != 0;
  const std::size_t per = ds.image_size();
  r.need(static_cast<std::size_t>(count) * per * 4);
  ds.images.resize(count);
  for (auto& img : ds.images) {
    img.resize(per);
    for (auto& v : img) v = r.f32();
  }
  if (flags & kFlagLabeled) {
    ds.labels.resize(count);
    for (auto& s : ds.labels) {
      const auto st = stage_from_index(r.u8());
      if (!st) fail(ErrorKind::UnknownLabel, "dataset cache holds an unknown stage code");
      s = *st;
    }
  }
  if (r.remaining() != 4) fail(ErrorKind::MalformedHeader, "dataset cache has trailing bytes");
  ds.validate();
  return ds;
}

void save_dataset(const std::filesystem::path& path, const Dataset& ds) {
  detail::write_file(path.string(), serialize_dataset(ds));
}

Dataset load_dataset(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path.string());
  return deserialize_dataset(bytes);
}

}  // namespace pipeline
}  // namespace essc
