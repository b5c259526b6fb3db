#pragma once

#include <span>

#include "bnad/tensor.hpp"

namespace bnad {

// Forward transforms are unnormalized: F(u,v) = sum_{x,y} f(x,y) e^{-2πi(ux/H + vy/W)},
// with the DC term at (0,0). Power-of-two axes use an iterative radix-2
// Cooley-Tukey pass; any other length falls back to a direct DFT along that axis.

/// 2-D DFT of a single H×W channel. Throws NumericsError on non-finite input.
ComplexGrid fft2(std::span<const float> plane, int height, int width);
ComplexGrid fft2(const Tensor& channel);

/// In-place 1-D transform; exposed for the row/column passes and tests.
void fft1d(std::span<std::complex<double>> line);

SpectrumGrid amplitude(const ComplexGrid& grid);

/// Moves bin (0,0) to (⌊H/2⌋, ⌊W/2⌋).
SpectrumGrid fftshift(const SpectrumGrid& grid);

bool is_power_of_two(int n);

}  // namespace bnad
