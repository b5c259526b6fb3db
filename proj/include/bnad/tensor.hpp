#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bnad {

/// Raised for shape mismatches, non-finite inputs and other argument errors
/// inside the numerics kernel.
class NumericsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::size_t element_count(std::span<const int> shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d < 0) throw NumericsError("negative dimension in shape");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

std::string shape_string(std::span<const int> shape);

/// Dense row-major tensor. Parameters and activations use T = float; the
/// gradient checks instantiate the same kernels with T = double.
template <typename T>
struct BasicTensor {
    std::vector<int> shape;
    std::vector<T> data;

    BasicTensor() = default;
    explicit BasicTensor(std::vector<int> dims, T fill = T(0))
        : shape(std::move(dims)), data(element_count(shape), fill) {}
    BasicTensor(std::vector<int> dims, std::vector<T> values)
        : shape(std::move(dims)), data(std::move(values)) {
        if (data.size() != element_count(shape))
            throw NumericsError("tensor data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_string(shape));
    }

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }

    T& operator[](std::size_t i) { return data[i]; }
    const T& operator[](std::size_t i) const { return data[i]; }

    std::span<T> values() { return data; }
    std::span<const T> values() const { return data; }

    bool all_finite() const {
        for (T v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    template <typename U>
    BasicTensor<U> cast() const {
        BasicTensor<U> out;
        out.shape = shape;
        out.data.assign(data.begin(), data.end());
        return out;
    }

    bool operator==(const BasicTensor&) const = default;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

/// An image is a C×H×W tensor with intensities in [0,1].
using Image = Tensor;

template <typename T>
void require_shape(const BasicTensor<T>& t, std::span<const int> expected, const char* what) {
    if (!std::equal(t.shape.begin(), t.shape.end(), expected.begin(), expected.end()))
        throw NumericsError(std::string(what) + ": expected shape " + shape_string(expected) +
                            ", got " + shape_string(t.shape));
}

template <typename T>
void require_rank(const BasicTensor<T>& t, int rank, const char* what) {
    if (t.rank() != rank)
        throw NumericsError(std::string(what) + ": expected rank " + std::to_string(rank) +
                            ", got shape " + shape_string(t.shape));
}

/// Stacks equally shaped C×H×W images into an N×C×H×W batch.
inline Tensor stack_images(std::span<const Image> images) {
    if (images.empty()) throw NumericsError("stack_images: empty batch");
    std::vector<int> shape{static_cast<int>(images.size())};
    shape.insert(shape.end(), images[0].shape.begin(), images[0].shape.end());
    Tensor batch(shape);
    const std::size_t per = images[0].size();
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (images[i].shape != images[0].shape) throw NumericsError("stack_images: mixed image shapes");
        std::copy(images[i].data.begin(), images[i].data.end(), batch.data.begin() + static_cast<std::ptrdiff_t>(i * per));
    }
    return batch;
}

/// Real-valued H×W grid: Fourier amplitudes, normalized spectra, ε_n.
struct SpectrumGrid {
    int height = 0;
    int width = 0;
    std::vector<double> values;

    SpectrumGrid() = default;
    SpectrumGrid(int h, int w, double fill = 0.0)
        : height(h), width(w), values(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), fill) {}

    double& at(int r, int c) { return values[static_cast<std::size_t>(r) * width + c]; }
    double at(int r, int c) const { return values[static_cast<std::size_t>(r) * width + c]; }
    bool same_geometry(const SpectrumGrid& o) const { return height == o.height && width == o.width; }

    bool operator==(const SpectrumGrid&) const = default;
};

/// Complex H×W grid. std::complex<double> is layout-compatible with
/// interleaved (re, im) pairs.
struct ComplexGrid {
    int height = 0;
    int width = 0;
    std::vector<std::complex<double>> values;

    std::complex<double>& at(int r, int c) { return values[static_cast<std::size_t>(r) * width + c]; }
    const std::complex<double>& at(int r, int c) const {
        return values[static_cast<std::size_t>(r) * width + c];
    }
};

}  // namespace bnad
