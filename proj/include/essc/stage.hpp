#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace essc {

// R&K scoring with S3 and S4 merged into slow-wave sleep.
enum class SleepStage : std::uint8_t { Wake = 0, S1 = 1, S2 = 2, SWS = 3, REM = 4 };

inline constexpr std::size_t kNumStages = 5;

inline constexpr std::array<SleepStage, kNumStages> kAllStages = {
    SleepStage::Wake, SleepStage::S1, SleepStage::S2, SleepStage::SWS, SleepStage::REM};

constexpr std::size_t stage_index(SleepStage s) { return static_cast<std::size_t>(s); }

std::string_view stage_name(SleepStage stage);

// Accepts W, WAKE, S1, S2, S3, S4, SWS, REM, R (case-insensitive).
std::optional<SleepStage> parse_stage(std::string_view label);

std::optional<SleepStage> stage_from_index(std::size_t index);

}  // namespace essc
