#pragma once

#include <cstddef>
#include <vector>

namespace svvad {

// In-place radix-2 complex FFT; re/im sizes must be a power of two.
void fft(std::vector<double>& re, std::vector<double>& im, bool inverse);

size_t next_pow2(size_t n);

// Full linear convolution (length a + b - 1) via FFT.
std::vector<double> fft_convolve(const std::vector<double>& a,
                                 const std::vector<double>& b);

// Power spectrum |FFT(x)|^2 of a real frame zero-padded to n_fft; returns
// n_fft / 2 + 1 bins.
std::vector<double> power_spectrum(const std::vector<double>& frame,
                                   size_t n_fft);

}  // namespace svvad
