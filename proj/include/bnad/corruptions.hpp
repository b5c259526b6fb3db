#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bnad/tensor.hpp"

namespace bnad {

/// Corruption type. Codes are dense, stable across serialization, and
/// `natural` is 0.
enum class CorruptionLabel : int {
    natural = 0,
    gaussian_noise,
    shot_noise,
    impulse_noise,
    defocus_blur,
    motion_blur,
    zoom_blur,
    fog,
    brightness,
    contrast,
    elastic,
    pixelate,
};

inline constexpr int kNumLabels = 12;
inline constexpr int kNumCorruptions = 11;
inline constexpr int kMinSeverity = 1;
inline constexpr int kMaxSeverity = 5;
inline constexpr std::array<int, kMaxSeverity> kAllSeverities{1, 2, 3, 4, 5};

enum class CorruptionFamily { none, noise, blur, weather, digital };

class CorruptionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline int code(CorruptionLabel l) { return static_cast<int>(l); }

/// Throws CorruptionError for codes outside 0..11.
CorruptionLabel label_from_code(int code);
std::string_view label_name(CorruptionLabel l);
std::optional<CorruptionLabel> label_from_name(std::string_view name);
CorruptionFamily family_of(CorruptionLabel l);
std::string_view family_name(CorruptionFamily f);

/// All labels in code order, natural first.
std::array<CorruptionLabel, kNumLabels> all_labels();
/// The 11 non-natural labels in code order.
std::array<CorruptionLabel, kNumCorruptions> all_corruptions();

/// Severity in 1..5.
class Severity {
public:
    explicit Severity(int s);
    int value() const { return value_; }
    int index() const { return value_ - 1; }
    auto operator<=>(const Severity&) const = default;

private:
    int value_;
};

/// Per-severity constants of the procedural generators.
struct SeverityTable {
    static constexpr std::array<double, 5> gaussian_sigma{0.04, 0.08, 0.12, 0.18, 0.26};
    static constexpr std::array<double, 5> shot_photons{60, 25, 12, 5, 3};
    static constexpr std::array<double, 5> impulse_fraction{0.03, 0.06, 0.09, 0.17, 0.27};
    static constexpr std::array<double, 5> defocus_radius{0.8, 1.2, 1.6, 2.2, 3.0};
    static constexpr std::array<int, 5> motion_length{3, 5, 7, 9, 11};
    static constexpr std::array<double, 5> zoom_max{1.06, 1.11, 1.16, 1.21, 1.26};
    static constexpr std::array<double, 5> fog_mix{0.15, 0.25, 0.35, 0.45, 0.55};
    static constexpr std::array<double, 5> brightness_shift{0.1, 0.2, 0.3, 0.4, 0.5};
    static constexpr std::array<double, 5> contrast_factor{0.75, 0.5, 0.4, 0.3, 0.15};
    static constexpr std::array<double, 5> elastic_displacement{0.5, 1.0, 1.5, 2.0, 2.5};
    static constexpr std::array<int, 5> pixelate_block{2, 2, 4, 4, 8};
    static constexpr std::array<double, 5> pixelate_weight{0.5, 1.0, 0.5, 1.0, 1.0};
};

/// Applies `label` at severity `s` to a C×H×W image in [0,1]. Output is
/// clamped to [0,1] and is a pure function of (img, label, s, seed).
Image corrupt(const Image& img, CorruptionLabel label, Severity s, std::uint64_t seed);

// ---- kernel builders -------------------------------------------------------

/// Anti-aliased disk; each tap holds the fraction of its pixel covered by the
/// disk, renormalized to sum 1. Radius < 0.5 gives the 1×1 identity kernel.
Tensor disk_kernel(double radius);

/// Line of `length` unit-spaced samples through the center at `angle`
/// radians, bilinearly splatted and cropped to its support.
Tensor motion_kernel(int length, double angle);

/// Diamond-square fractal noise, range-normalized to exactly [0,1].
/// Smaller roughness gives smoother fields.
Tensor plasma_field(int height, int width, double roughness, std::uint64_t seed);

/// Separable Gaussian taps, radius ⌈3σ⌉, normalized.
std::vector<double> gaussian_taps(double sigma);

// ---- primitive image operations (exposed for testing) ----------------------

/// Per-channel 2-D convolution with reflect-101 borders; kernel is kh×kw.
Image filter2d(const Image& img, const Tensor& kernel);

/// Blend of img with its block-pixelated version: (1-w)·img + w·pixelate(img).
/// block = 1 returns img unchanged.
Image pixelate_blocks(const Image& img, int block, double weight);

/// Bilinear sample of one channel with clamp-to-edge borders.
double bilinear_sample(const Image& img, int channel, double y, double x);

Image clamp_unit(Image img);

/// The additive N(0, σ) field used by gaussian_noise: corrupt() returns
/// clamp(img + gaussian_noise_field(img.shape, σ_s, seed)).
Tensor gaussian_noise_field(std::vector<int> shape, double sigma, std::uint64_t seed);

// ---- corpora ---------------------------------------------------------------

struct CorruptedRecord {
    Image image;
    int class_label = 0;
    CorruptionLabel corruption = CorruptionLabel::natural;
    int severity = 1;
};

struct CorruptedCorpus {
    std::vector<CorruptedRecord> records;

    std::size_t size() const { return records.size(); }
    /// Indices of records carrying `label`, in corpus order.
    std::vector<std::size_t> indices_of(CorruptionLabel label) const;
    std::vector<std::size_t> indices_of(CorruptionLabel label, int severity) const;
};

/// For every (label, severity) cell, draws `count_per_cell` distinct source
/// images (seeded per cell) and corrupts them. `natural` cells copy the
/// source image and are tagged with the cell's severity so the severity
/// histogram stays uniform. Throws CorruptionError if the dataset has fewer
/// than `count_per_cell` images.
CorruptedCorpus build_corrupted_dataset(std::span<const Image> images, std::span<const int> class_labels,
                                        std::span<const CorruptionLabel> labels,
                                        std::span<const int> severities, std::size_t count_per_cell,
                                        std::uint64_t seed);

}  // namespace bnad
