#pragma once

#include <span>

namespace essc {

// A trainable array and its accumulated gradient, as seen by optimizers.
struct ParamView {
  std::span<double> value;
  std::span<double> grad;
};

}  // namespace essc
