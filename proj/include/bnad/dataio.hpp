#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bnad/tensor.hpp"

namespace bnad {

inline constexpr int kImageChannels = 3;
inline constexpr int kImageSide = 32;
inline constexpr int kNumClasses = 10;
inline constexpr std::size_t kCifarPixels = 3072;
inline constexpr std::size_t kCifarRecordBytes = 1 + kCifarPixels;

/// Images are 3×32×32 planar tensors in [0,1]; labels are 0..9.
struct Dataset {
    std::vector<Image> images;
    std::vector<int> labels;
    std::string split;

    std::size_t size() const { return images.size(); }
    /// Throws std::invalid_argument on length mismatch or out-of-range labels.
    void validate() const;
    /// Records [begin, end) as a new dataset.
    Dataset slice(std::size_t begin, std::size_t end, std::string split_name) const;
};

class CifarParseError : public std::runtime_error {
public:
    CifarParseError(const std::string& what, std::size_t record)
        : std::runtime_error(what), record_(record) {}
    std::size_t record_index() const { return record_; }

private:
    std::size_t record_;
};

/// CIFAR-10 binary layout: per record one label byte then 1024 R, 1024 G,
/// 1024 B bytes, each plane row-major. Pixels map to [0,1] by /255.
Dataset parse_cifar10_bin(std::span<const std::uint8_t> bytes, std::string split = {});

/// Inverse of parse_cifar10_bin; pixels are quantized with round(v·255).
std::vector<std::uint8_t> serialize_cifar10_bin(const Dataset& ds);

Dataset load_cifar10_file(const std::filesystem::path& path, std::string split = {});
/// Concatenates several CIFAR binary batch files in order.
Dataset load_cifar10_files(std::span<const std::filesystem::path> paths, std::string split = {});
void save_cifar10_file(const Dataset& ds, const std::filesystem::path& path);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// Procedurally rendered 10-class shape dataset (disk, square, triangle,
/// cross, ring, horizontal bar, vertical bar, checker, diagonal stripes,
/// ramp blob) with random position, scale, rotation and colors plus mild
/// texture noise. Image i has class i mod 10. Pixels are quantized to k/255
/// so the dataset survives a CIFAR-format roundtrip bit-exactly.
struct SyntheticStyle {
    double bg_low = 0.05, bg_high = 0.5;   // per-channel background range
    double gradient = 0.15;                // max background shading slope
    double fg_value_low = 0.1, fg_value_high = 1.0;
    double min_contrast = 0.35;            // |luma(fg) - luma(bg)| lower bound
    double texture = 0.03;                 // additive pixel noise σ
};

Dataset gen_synthetic(std::size_t n, std::uint64_t seed, const SyntheticStyle& style = {});

/// Renders a single synthetic image of the given class.
Image render_synthetic(int class_label, std::uint64_t seed, const SyntheticStyle& style = {});

}  // namespace bnad
