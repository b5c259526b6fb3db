#pragma once

#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "bnad/corruptions.hpp"
#include "bnad/tensor.hpp"

namespace bnad {

inline constexpr double kSpectrumFloor = 1e-8;

enum class ChannelMode { first, average };

/// How an image is turned into the single H×W plane that gets transformed.
struct SpectrumConfig {
    ChannelMode channels = ChannelMode::first;
    /// 1 or 2; 2 applies a 2×2 stride-2 average pool before the transform
    /// (used for inputs twice the working resolution).
    int pool = 1;
};

/// ε_n: mean amplitude spectrum of natural images, floored to stay positive.
struct NaturalSpectrum {
    SpectrumGrid grid;
    std::size_t count = 0;
    SpectrumConfig config;
};

using FeatureVector = std::vector<float>;

/// Plane fed to the transform: selected/averaged channel after optional pooling.
Tensor spectrum_plane(const Image& img, const SpectrumConfig& cfg);

/// |F| of the image's spectrum plane, unshifted.
SpectrumGrid amplitude_spectrum(const Image& img, const SpectrumConfig& cfg);

/// Elementwise mean of amplitude spectra, each bin floored at 1e-8.
/// Throws std::invalid_argument for an empty set.
NaturalSpectrum mean_amplitude(std::span<const Image> images, const SpectrumConfig& cfg = {});

/// log(amp / eps + 1) per bin. No clamping.
SpectrumGrid normalize_spectrum(const SpectrumGrid& amp, const NaturalSpectrum& eps);

/// Length of the half-spectrum feature for an H×W plane: H·(⌊W/2⌋+1).
inline std::size_t feature_length(int height, int width) {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width / 2 + 1);
}
std::size_t feature_length(const NaturalSpectrum& eps);

/// Columns 0..⌊W/2⌋ of a grid, flattened row-major.
FeatureVector half_spectrum(const SpectrumGrid& grid);

/// fft2 → amplitude → normalize → half spectrum. Throws on geometry mismatch.
FeatureVector extract_feature(const Image& img, const NaturalSpectrum& eps);

/// Full (both halves) normalized spectrum, flattened; used for the
/// half- vs full-spectrum check.
FeatureVector extract_full_feature(const Image& img, const NaturalSpectrum& eps);

/// Flattened first-channel raw pixels; the image-domain control input.
FeatureVector extract_raw_pixels(const Image& img, const SpectrumConfig& cfg);

/// Per-label normalized mean spectrum, fftshifted for display and optionally
/// clamped to [0,1]. Throws std::invalid_argument when a requested label has
/// no records.
std::map<CorruptionLabel, SpectrumGrid> mean_corruption_spectrum(const CorruptedCorpus& corpus,
                                                                 const NaturalSpectrum& eps,
                                                                 std::span<const CorruptionLabel> labels,
                                                                 bool clamp_at_one);

/// Plain-text PGM ("P2"): width height, max 255, integer rows. Values are
/// scaled so `max_value` maps to 255 and clipped at 0.
void write_pgm_text(std::ostream& out, const SpectrumGrid& grid, double max_value);

/// Reshapes a half-spectrum feature back to its H×(⌊W/2⌋+1) grid.
SpectrumGrid half_grid(std::span<const float> feature, int height, int width);

/// Mean of the bins whose radial frequency exceeds `inner_fraction` of the
/// Nyquist radius, on an unshifted grid. `full_width` is the width of the
/// original transform (pass it for half grids; 0 means grid.width).
double outer_annulus_mean(const SpectrumGrid& grid, double inner_fraction = 0.5, int full_width = 0);

}  // namespace bnad
