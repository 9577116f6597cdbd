#include "essc/edf.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <sstream>

#include "essc/error.hpp"

namespace essc::edf {

namespace {

constexpr std::size_t kFixedHeaderBytes = 256;
constexpr std::size_t kSignalHeaderBytes = 256;
constexpr std::string_view kAnnotationsLabel = "EDF Annotations";

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\0')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\0')) s.remove_suffix(1);
  return s;
}

class FieldReader {
 public:
  explicit FieldReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::string_view take(std::size_t width) {
    if (pos_ + width > bytes_.size()) {
      fail(ErrorKind::TruncatedData, "EDF header ends inside a field");
    }
    std::string_view view(reinterpret_cast<const char*>(bytes_.data()) + pos_, width);
    pos_ += width;
    return view;
  }

  std::string text(std::size_t width) { return std::string(trim(take(width))); }

  double real(std::size_t width, const char* field) {
    auto s = trim(take(width));
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(value)) {
      fail(ErrorKind::MalformedHeader,
           std::string("non-numeric value '") + std::string(s) + "' in field " + field);
    }
    return value;
  }

  long integer(std::size_t width, const char* field) {
    auto s = trim(take(width));
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    long value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
      fail(ErrorKind::MalformedHeader,
           std::string("non-integer value '") + std::string(s) + "' in field " + field);
    }
    return value;
  }

  std::size_t position() const { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

// Parses "dd.mm.yy" / "hh.mm.ss".
void parse_triplet(std::string_view s, int& a, int& b, int& c, const char* field) {
  s = trim(s);
  int values[3] = {0, 0, 0};
  std::size_t part = 0;
  std::size_t i = 0;
  while (part < 3) {
    std::size_t start = i;
    while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i;
    if (i == start || i - start > 2) {
      fail(ErrorKind::MalformedHeader, std::string("malformed ") + field + " '" + std::string(s) + "'");
    }
    std::from_chars(s.data() + start, s.data() + i, values[part]);
    ++part;
    if (part < 3) {
      if (i >= s.size() || (s[i] != '.' && s[i] != ':')) {
        fail(ErrorKind::MalformedHeader, std::string("malformed ") + field + " '" + std::string(s) + "'");
      }
      ++i;
    }
  }
  if (i != s.size()) {
    fail(ErrorKind::MalformedHeader, std::string("malformed ") + field + " '" + std::string(s) + "'");
  }
  a = values[0];
  b = values[1];
  c = values[2];
}

void put_text(std::vector<std::uint8_t>& out, std::string_view s, std::size_t width) {
  for (std::size_t i = 0; i < width; ++i) {
    char c = i < s.size() ? s[i] : ' ';
    // EDF headers are printable ASCII only.
    if (static_cast<unsigned char>(c) < 32 || static_cast<unsigned char>(c) > 126) c = ' ';
    out.push_back(static_cast<std::uint8_t>(c));
  }
}

// Shortest decimal representation of value that fits in width characters.
std::string format_number(double value, std::size_t width) {
  if (value == std::floor(value) && std::fabs(value) < 1e15) {
    std::string s = std::to_string(static_cast<long long>(value));
    if (s.size() <= width) return s;
  }
  char buffer[64];
  for (int precision = static_cast<int>(width); precision >= 1; --precision) {
    std::snprintf(buffer, sizeof(buffer), "%.*g", precision, value);
    if (std::strlen(buffer) <= width) return buffer;
  }
  fail(ErrorKind::RangeOverflow, "value does not fit an EDF header field");
}

void put_number(std::vector<std::uint8_t>& out, double value, std::size_t width) {
  put_text(out, format_number(value, width), width);
}

std::string two_digits(int v) {
  char buffer[8];
  std::snprintf(buffer, sizeof(buffer), "%02d", v % 100);
  return buffer;
}

bool is_annotation(const SignalSpec& s) { return s.label == kAnnotationsLabel; }

}  // namespace

double Recording::sample_rate(std::size_t channel) const {
  return header.signals.at(channel).samples_per_record / header.record_duration_s;
}

void validate(const Recording& rec) {
  const auto& h = rec.header;
  if (h.signals.empty()) fail(ErrorKind::InvalidSpec, "recording has no signals");
  if (!(h.record_duration_s > 0.0) || !std::isfinite(h.record_duration_s)) {
    fail(ErrorKind::InvalidSpec, "record duration must be positive");
  }
  if (h.num_data_records < 0) fail(ErrorKind::InvalidSpec, "record count must be known to write");
  if (rec.channels.size() != h.signals.size()) {
    fail(ErrorKind::InvalidSpec, "channel count does not match signal count");
  }
  for (std::size_t i = 0; i < h.signals.size(); ++i) {
    const auto& s = h.signals[i];
    if (!(s.physical_max > s.physical_min)) {
      fail(ErrorKind::InvalidSpec, "signal " + std::to_string(i) + ": physical_max <= physical_min");
    }
    if (s.digital_max <= s.digital_min || s.digital_min < -32768 || s.digital_max > 32767) {
      fail(ErrorKind::InvalidSpec, "signal " + std::to_string(i) + ": invalid digital range");
    }
    if (s.samples_per_record <= 0) {
      fail(ErrorKind::InvalidSpec, "signal " + std::to_string(i) + ": samples_per_record must be > 0");
    }
    auto expected = static_cast<std::size_t>(h.num_data_records) * static_cast<std::size_t>(s.samples_per_record);
    if (rec.channels[i].size() != expected) {
      fail(ErrorKind::InvalidSpec, "signal " + std::to_string(i) + ": channel length " +
                                       std::to_string(rec.channels[i].size()) + " != " +
                                       std::to_string(expected));
    }
  }
}

Recording parse_edf(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFixedHeaderBytes) {
    fail(ErrorKind::TruncatedData, "EDF input shorter than the 256-byte fixed header");
  }
  FieldReader reader(bytes);
  EdfHeader header;
  header.version_tag = reader.text(8);
  header.patient_id = reader.text(80);
  header.recording_id = reader.text(80);
  parse_triplet(reader.take(8), header.start.day, header.start.month, header.start.year, "start date");
  parse_triplet(reader.take(8), header.start.hour, header.start.minute, header.start.second, "start time");
  long header_bytes = reader.integer(8, "header bytes");
  reader.take(44);
  header.num_data_records = reader.integer(8, "number of data records");
  header.record_duration_s = reader.real(8, "record duration");
  long ns = reader.integer(4, "number of signals");

  if (ns < 1) fail(ErrorKind::MalformedHeader, "signal count must be >= 1");
  if (header_bytes != static_cast<long>(kFixedHeaderBytes + kSignalHeaderBytes * ns)) {
    fail(ErrorKind::MalformedHeader, "header byte count " + std::to_string(header_bytes) +
                                         " does not match 256 + 256 x " + std::to_string(ns));
  }
  if (header.num_data_records < -1) fail(ErrorKind::MalformedHeader, "negative record count");
  if (!(header.record_duration_s > 0.0)) fail(ErrorKind::MalformedHeader, "record duration must be > 0");
  if (bytes.size() < static_cast<std::size_t>(header_bytes)) {
    fail(ErrorKind::TruncatedData, "EDF input shorter than its signal headers");
  }

  auto n = static_cast<std::size_t>(ns);
  std::vector<SignalSpec> all(n);
  for (auto& s : all) s.label = reader.text(16);
  for (auto& s : all) s.transducer = reader.text(80);
  for (auto& s : all) s.physical_dim = reader.text(8);
  for (auto& s : all) s.physical_min = reader.real(8, "physical minimum");
  for (auto& s : all) s.physical_max = reader.real(8, "physical maximum");
  for (auto& s : all) s.digital_min = static_cast<int>(reader.integer(8, "digital minimum"));
  for (auto& s : all) s.digital_max = static_cast<int>(reader.integer(8, "digital maximum"));
  for (auto& s : all) s.prefiltering = reader.text(80);
  for (auto& s : all) s.samples_per_record = static_cast<int>(reader.integer(8, "samples per record"));
  for (std::size_t i = 0; i < n; ++i) reader.take(32);

  std::size_t record_samples = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = all[i];
    if (s.samples_per_record <= 0) {
      fail(ErrorKind::MalformedHeader, "signal " + std::to_string(i) + ": samples per record must be > 0");
    }
    if (is_annotation(s)) {
      record_samples += static_cast<std::size_t>(s.samples_per_record);
      continue;
    }
    if (s.digital_max <= s.digital_min || s.digital_min < -32768 || s.digital_max > 32767) {
      fail(ErrorKind::MalformedHeader, "signal " + std::to_string(i) + ": invalid digital range");
    }
    if (!(s.physical_max > s.physical_min)) {
      fail(ErrorKind::MalformedHeader, "signal " + std::to_string(i) + ": invalid physical range");
    }
    record_samples += static_cast<std::size_t>(s.samples_per_record);
  }
  const std::size_t record_bytes = 2 * record_samples;
  const std::size_t data_bytes = bytes.size() - static_cast<std::size_t>(header_bytes);
  if (header.num_data_records == -1) {
    header.num_data_records = static_cast<long>(data_bytes / record_bytes);
  }
  const auto records = static_cast<std::size_t>(header.num_data_records);
  if (data_bytes < records * record_bytes) {
    fail(ErrorKind::TruncatedData, "EDF data holds " + std::to_string(data_bytes) + " bytes, expected " +
                                       std::to_string(records * record_bytes));
  }

  Recording rec;
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_annotation(all[i])) keep.push_back(i);
  }
  if (keep.empty()) fail(ErrorKind::MalformedHeader, "EDF file contains only annotation signals");
  for (std::size_t i : keep) header.signals.push_back(all[i]);
  header.header_bytes = static_cast<int>(kFixedHeaderBytes + kSignalHeaderBytes * keep.size());
  rec.channels.resize(keep.size());
  for (std::size_t c = 0; c < keep.size(); ++c) {
    rec.channels[c].reserve(records * static_cast<std::size_t>(all[keep[c]].samples_per_record));
  }

  const std::uint8_t* data = bytes.data() + header_bytes;
  for (std::size_t r = 0; r < records; ++r) {
    std::size_t out_index = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& s = all[i];
      const bool wanted = !is_annotation(s);
      for (int k = 0; k < s.samples_per_record; ++k) {
        if (wanted) {
          auto raw = static_cast<std::int16_t>(static_cast<std::uint16_t>(data[0]) |
                                               (static_cast<std::uint16_t>(data[1]) << 8));
          rec.channels[out_index].push_back(s.to_physical(raw));
        }
        data += 2;
      }
      if (wanted) ++out_index;
    }
  }
  rec.header = std::move(header);
  return rec;
}

std::vector<std::uint8_t> write_edf(const Recording& rec) {
  validate(rec);
  const auto& h = rec.header;
  const std::size_t ns = h.signals.size();
  std::vector<std::uint8_t> out;
  std::size_t record_samples = 0;
  for (const auto& s : h.signals) record_samples += static_cast<std::size_t>(s.samples_per_record);
  out.reserve(kFixedHeaderBytes * (1 + ns) +
              2 * record_samples * static_cast<std::size_t>(h.num_data_records));

  put_text(out, h.version_tag.empty() ? "0" : h.version_tag, 8);
  put_text(out, h.patient_id, 80);
  put_text(out, h.recording_id, 80);
  put_text(out, two_digits(h.start.day) + "." + two_digits(h.start.month) + "." + two_digits(h.start.year), 8);
  put_text(out, two_digits(h.start.hour) + "." + two_digits(h.start.minute) + "." + two_digits(h.start.second), 8);
  put_number(out, static_cast<double>(kFixedHeaderBytes + kSignalHeaderBytes * ns), 8);
  put_text(out, "", 44);
  put_number(out, static_cast<double>(h.num_data_records), 8);
  put_number(out, h.record_duration_s, 8);
  put_number(out, static_cast<double>(ns), 4);

  for (const auto& s : h.signals) put_text(out, s.label, 16);
  for (const auto& s : h.signals) put_text(out, s.transducer, 80);
  for (const auto& s : h.signals) put_text(out, s.physical_dim, 8);
  for (const auto& s : h.signals) put_number(out, s.physical_min, 8);
  for (const auto& s : h.signals) put_number(out, s.physical_max, 8);
  for (const auto& s : h.signals) put_number(out, s.digital_min, 8);
  for (const auto& s : h.signals) put_number(out, s.digital_max, 8);
  for (const auto& s : h.signals) put_text(out, s.prefiltering, 80);
  for (const auto& s : h.signals) put_number(out, s.samples_per_record, 8);
  for (std::size_t i = 0; i < ns; ++i) put_text(out, "", 32);

  for (long r = 0; r < h.num_data_records; ++r) {
    for (std::size_t c = 0; c < ns; ++c) {
      const auto& s = h.signals[c];
      // Encode against the range a reader will see in the 8-character fields.
      const double pmin = std::stod(format_number(s.physical_min, 8));
      const double pmax = std::stod(format_number(s.physical_max, 8));
      const double scale = static_cast<double>(s.digital_max - s.digital_min) / (pmax - pmin);
      const double limit = static_cast<double>(s.digital_max - s.digital_min) /
                           (s.physical_max - s.physical_min);
      const std::size_t base = static_cast<std::size_t>(r) * static_cast<std::size_t>(s.samples_per_record);
      for (int k = 0; k < s.samples_per_record; ++k) {
        double phys = rec.channels[c][base + static_cast<std::size_t>(k)];
        if (!std::isfinite(phys)) fail(ErrorKind::RangeOverflow, "non-finite sample in channel " + std::to_string(c));
        const double nominal = std::round((phys - s.physical_min) * limit + s.digital_min);
        if (nominal < s.digital_min || nominal > s.digital_max) {
          fail(ErrorKind::RangeOverflow, "sample " + std::to_string(phys) + " of channel " + std::to_string(c) +
                                             " maps outside the digital range");
        }
        const double code = std::clamp(std::round((phys - pmin) * scale + s.digital_min),
                                       static_cast<double>(s.digital_min), static_cast<double>(s.digital_max));
        auto value = static_cast<std::uint16_t>(static_cast<std::int16_t>(code));
        out.push_back(static_cast<std::uint8_t>(value & 0xFF));
        out.push_back(static_cast<std::uint8_t>(value >> 8));
      }
    }
  }
  return out;
}

Hypnogram load_hypnogram(std::string_view text) {
  Hypnogram hyp;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    // UTF-8 byte order mark on the first line.
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.remove_prefix(3);
    line = trim(line);
    while (!line.empty() && line.back() == '\t') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') {
      if (end == text.size()) break;
      continue;
    }
    auto stage = parse_stage(line);
    if (!stage) {
      fail(ErrorKind::UnknownLabel,
           "unknown stage label '" + std::string(line) + "' at line " + std::to_string(line_no));
    }
    hyp.stages.push_back(*stage);
    if (end == text.size()) break;
  }
  return hyp;
}

std::string format_hypnogram(const Hypnogram& hyp) {
  std::string out;
  for (auto s : hyp.stages) {
    out += stage_name(s);
    out += '\n';
  }
  return out;
}

}  // namespace essc::edf
