#include "essc/stage.hpp"

#include <algorithm>
#include <cctype>
#include <string>

namespace essc {

std::string_view stage_name(SleepStage stage) {
  switch (stage) {
    case SleepStage::Wake: return "W";
    case SleepStage::S1: return "S1";
    case SleepStage::S2: return "S2";
    case SleepStage::SWS: return "SWS";
    case SleepStage::REM: return "REM";
  }
  return "?";
}

std::optional<SleepStage> parse_stage(std::string_view label) {
  std::string upper(label);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (upper == "W" || upper == "WAKE") return SleepStage::Wake;
  if (upper == "S1") return SleepStage::S1;
  if (upper == "S2") return SleepStage::S2;
  if (upper == "S3" || upper == "S4" || upper == "SWS") return SleepStage::SWS;
  if (upper == "REM" || upper == "R") return SleepStage::REM;
  return std::nullopt;
}

std::optional<SleepStage> stage_from_index(std::size_t index) {
  if (index >= kNumStages) return std::nullopt;
  return static_cast<SleepStage>(index);
}

}  // namespace essc
