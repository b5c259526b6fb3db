#include "bnad/fft.hpp"

#include <numbers>
#include <vector>

namespace bnad {

std::string shape_string(std::span<const int> shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

namespace {

void radix2_inplace(std::span<std::complex<double>> a) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double angle = -2.0 * std::numbers::pi / static_cast<double>(len);
        const std::size_t half = len / 2;
        std::vector<std::complex<double>> twiddle(half);
        for (std::size_t k = 0; k < half; ++k)
            twiddle[k] = std::polar(1.0, angle * static_cast<double>(k));
        for (std::size_t start = 0; start < n; start += len) {
            for (std::size_t k = 0; k < half; ++k) {
                const auto u = a[start + k];
                const auto v = a[start + k + half] * twiddle[k];
                a[start + k] = u + v;
                a[start + k + half] = u - v;
            }
        }
    }
}

void direct_dft_inplace(std::span<std::complex<double>> a) {
    const std::size_t n = a.size();
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t j = 0; j < n; ++j) {
            // Reduce the index product mod n so the angle stays small.
            const double angle = -2.0 * std::numbers::pi * static_cast<double>((k * j) % n) /
                                 static_cast<double>(n);
            acc += a[j] * std::polar(1.0, angle);
        }
        out[k] = acc;
    }
    std::copy(out.begin(), out.end(), a.begin());
}

}  // namespace

void fft1d(std::span<std::complex<double>> line) {
    if (line.empty()) return;
    if (is_power_of_two(static_cast<int>(line.size())))
        radix2_inplace(line);
    else
        direct_dft_inplace(line);
}

ComplexGrid fft2(std::span<const float> plane, int height, int width) {
    if (height < 1 || width < 1) throw NumericsError("fft2: empty grid");
    if (plane.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width))
        throw NumericsError("fft2: plane length does not match geometry");

    ComplexGrid g;
    g.height = height;
    g.width = width;
    g.values.resize(plane.size());
    for (std::size_t i = 0; i < plane.size(); ++i) {
        if (!std::isfinite(plane[i])) throw NumericsError("fft2: non-finite input value");
        g.values[i] = {static_cast<double>(plane[i]), 0.0};
    }

    for (int r = 0; r < height; ++r)
        fft1d(std::span(g.values).subspan(static_cast<std::size_t>(r) * width, width));

    std::vector<std::complex<double>> column(height);
    for (int c = 0; c < width; ++c) {
        for (int r = 0; r < height; ++r) column[r] = g.at(r, c);
        fft1d(column);
        for (int r = 0; r < height; ++r) g.at(r, c) = column[r];
    }
    return g;
}

ComplexGrid fft2(const Tensor& channel) {
    require_rank(channel, 2, "fft2");
    return fft2(channel.values(), channel.dim(0), channel.dim(1));
}

SpectrumGrid amplitude(const ComplexGrid& grid) {
    SpectrumGrid out(grid.height, grid.width);
    for (std::size_t i = 0; i < grid.values.size(); ++i) out.values[i] = std::abs(grid.values[i]);
    return out;
}

SpectrumGrid fftshift(const SpectrumGrid& grid) {
    SpectrumGrid out(grid.height, grid.width);
    const int dr = grid.height / 2;
    const int dc = grid.width / 2;
    for (int r = 0; r < grid.height; ++r)
        for (int c = 0; c < grid.width; ++c)
            out.at((r + dr) % grid.height, (c + dc) % grid.width) = grid.at(r, c);
    return out;
}

}  // namespace bnad
