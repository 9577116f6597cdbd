#pragma once

#include <complex>
#include <vector>

namespace essc::fft {

// In-place DFT of any length (radix-2 when the length is a power of two,
// Bluestein's chirp-z otherwise). The inverse transform is scaled by 1/N.
void transform(std::vector<std::complex<double>>& data, bool inverse = false);

}  // namespace essc::fft
