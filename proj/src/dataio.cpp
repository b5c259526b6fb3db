#include "bnad/dataio.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>

#include "bnad/random.hpp"

namespace bnad {

void Dataset::validate() const {
    if (images.size() != labels.size()) throw std::invalid_argument("dataset: image/label count mismatch");
    for (int l : labels)
        if (l < 0 || l >= kNumClasses) throw std::invalid_argument("dataset: label out of range");
}

Dataset Dataset::slice(std::size_t begin, std::size_t end, std::string split_name) const {
    if (begin > end || end > size()) throw std::out_of_range("dataset slice out of range");
    Dataset d;
    d.images.assign(images.begin() + static_cast<std::ptrdiff_t>(begin), images.begin() + static_cast<std::ptrdiff_t>(end));
    d.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(begin), labels.begin() + static_cast<std::ptrdiff_t>(end));
    d.split = std::move(split_name);
    return d;
}

// ---- CIFAR-10 binary -------------------------------------------------------

Dataset parse_cifar10_bin(std::span<const std::uint8_t> bytes, std::string split) {
    const std::size_t records = bytes.size() / kCifarRecordBytes;
    if (bytes.size() % kCifarRecordBytes != 0)
        throw CifarParseError("cifar10: " + std::to_string(bytes.size() % kCifarRecordBytes) +
                                  " trailing bytes after record " + std::to_string(records),
                              records);
    Dataset ds;
    ds.split = std::move(split);
    ds.images.reserve(records);
    ds.labels.reserve(records);
    for (std::size_t r = 0; r < records; ++r) {
        const auto rec = bytes.subspan(r * kCifarRecordBytes, kCifarRecordBytes);
        if (rec[0] > 9)
            throw CifarParseError("cifar10: record " + std::to_string(r) + " has label " + std::to_string(rec[0]), r);
        Image img({kImageChannels, kImageSide, kImageSide});
        for (std::size_t i = 0; i < kCifarPixels; ++i) img.data[i] = static_cast<float>(rec[1 + i]) / 255.0f;
        ds.images.push_back(std::move(img));
        ds.labels.push_back(rec[0]);
    }
    return ds;
}

std::vector<std::uint8_t> serialize_cifar10_bin(const Dataset& ds) {
    ds.validate();
    std::vector<std::uint8_t> out;
    out.reserve(ds.size() * kCifarRecordBytes);
    for (std::size_t r = 0; r < ds.size(); ++r) {
        const Image& img = ds.images[r];
        if (img.size() != kCifarPixels) throw std::invalid_argument("cifar10: image is not 3×32×32");
        out.push_back(static_cast<std::uint8_t>(ds.labels[r]));
        for (float v : img.data)
            out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)));
    }
    return out;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

Dataset load_cifar10_file(const std::filesystem::path& path, std::string split) {
    return parse_cifar10_bin(read_bytes(path), std::move(split));
}

Dataset load_cifar10_files(std::span<const std::filesystem::path> paths, std::string split) {
    Dataset all;
    all.split = split;
    for (const auto& p : paths) {
        Dataset d = load_cifar10_file(p, split);
        std::move(d.images.begin(), d.images.end(), std::back_inserter(all.images));
        all.labels.insert(all.labels.end(), d.labels.begin(), d.labels.end());
    }
    return all;
}

void save_cifar10_file(const Dataset& ds, const std::filesystem::path& path) {
    write_bytes(path, serialize_cifar10_bin(ds));
}

// ---- synthetic shapes ------------------------------------------------------

namespace {

struct Rgb {
    double r, g, b;
};

double luminance(const Rgb& c) { return 0.299 * c.r + 0.587 * c.g + 0.114 * c.b; }

Rgb hsv_to_rgb(double h, double s, double v) {
    const double c = v * s;
    const double hp = std::fmod(h * 6.0, 6.0);
    const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
    Rgb rgb{0, 0, 0};
    if (hp < 1) rgb = {c, x, 0};
    else if (hp < 2) rgb = {x, c, 0};
    else if (hp < 3) rgb = {0, c, x};
    else if (hp < 4) rgb = {0, x, c};
    else if (hp < 5) rgb = {x, 0, c};
    else rgb = {c, 0, x};
    const double m = v - c;
    return {rgb.r + m, rgb.g + m, rgb.b + m};
}

bool inside_triangle(double u, double v) {
    constexpr std::array<std::array<double, 2>, 3> p{{{0.0, -0.95}, {0.9, 0.75}, {-0.9, 0.75}}};
    auto edge = [](const std::array<double, 2>& a, const std::array<double, 2>& b, double x, double y) {
        return (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0]);
    };
    const double e0 = edge(p[0], p[1], u, v), e1 = edge(p[1], p[2], u, v), e2 = edge(p[2], p[0], u, v);
    return (e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0);
}

/// Foreground opacity of class `cls` at shape-local coordinates (u, v).
double shape_alpha(int cls, double u, double v) {
    const double r2 = u * u + v * v;
    switch (cls) {
        case 0: return r2 <= 1.0 ? 1.0 : 0.0;
        case 1: return std::abs(u) <= 0.8 && std::abs(v) <= 0.8 ? 1.0 : 0.0;
        case 2: return inside_triangle(u, v) ? 1.0 : 0.0;
        case 3:
            return (std::abs(u) <= 0.28 && std::abs(v) <= 1.0) || (std::abs(v) <= 0.28 && std::abs(u) <= 1.0) ? 1.0
                                                                                                             : 0.0;
        case 4: return r2 <= 1.0 && r2 >= 0.55 * 0.55 ? 1.0 : 0.0;
        case 5: return std::abs(u) <= 1.1 && std::abs(v) <= 0.3 ? 1.0 : 0.0;
        case 6: return std::abs(u) <= 0.3 && std::abs(v) <= 1.1 ? 1.0 : 0.0;
        case 7: {
            if (std::abs(u) > 0.9 || std::abs(v) > 0.9) return 0.0;
            const int cu = static_cast<int>(std::floor((u + 0.9) / 0.45));
            const int cv = static_cast<int>(std::floor((v + 0.9) / 0.45));
            return (cu + cv) % 2 == 0 ? 1.0 : 0.0;
        }
        case 8: {
            if (std::abs(u) > 0.9 || std::abs(v) > 0.9) return 0.0;
            const double t = (u + v + 4.0) / 0.6;
            return t - std::floor(t) < 0.5 ? 1.0 : 0.0;
        }
        case 9: {
            const double a = std::exp(-r2 / 0.45) * (0.55 + 0.45 * u);
            return std::clamp(a, 0.0, 1.0);
        }
        default: throw std::invalid_argument("synthetic: class out of range");
    }
}

}  // namespace

Image render_synthetic(int cls, std::uint64_t seed, const SyntheticStyle& style) {
    if (cls < 0 || cls >= kNumClasses) throw std::invalid_argument("synthetic: class out of range");
    Rng rng(seed);
    const double cx = uniform(rng, 11.0, 21.0);
    const double cy = uniform(rng, 11.0, 21.0);
    const double scale = uniform(rng, 7.0, 11.5);
    const double angle = uniform(rng, -0.35, 0.35);

    const Rgb bg{uniform(rng, style.bg_low, style.bg_high), uniform(rng, style.bg_low, style.bg_high),
                 uniform(rng, style.bg_low, style.bg_high)};
    const double grad_x = uniform(rng, -style.gradient, style.gradient);
    const double grad_y = uniform(rng, -style.gradient, style.gradient);
    Rgb fg{};
    for (int attempt = 0;; ++attempt) {
        fg = hsv_to_rgb(uniform(rng, 0.0, 1.0), uniform(rng, 0.4, 1.0), uniform(rng, style.fg_value_low, style.fg_value_high));
        if (std::abs(luminance(fg) - luminance(bg)) >= style.min_contrast || attempt > 64) break;
    }
    std::normal_distribution<double> texture(0.0, style.texture);

    const double ca = std::cos(angle), sa = std::sin(angle);
    Image img({kImageChannels, kImageSide, kImageSide});
    constexpr int kSub = 3;
    const std::size_t plane = static_cast<std::size_t>(kImageSide) * kImageSide;
    for (int y = 0; y < kImageSide; ++y)
        for (int x = 0; x < kImageSide; ++x) {
            double alpha = 0.0;
            for (int sy = 0; sy < kSub; ++sy)
                for (int sx = 0; sx < kSub; ++sx) {
                    const double px = x + (sx + 0.5) / kSub - cx;
                    const double py = y + (sy + 0.5) / kSub - cy;
                    const double u = (ca * px + sa * py) / scale;
                    const double v = (-sa * px + ca * py) / scale;
                    alpha += shape_alpha(cls, u, v);
                }
            alpha /= kSub * kSub;
            const double shade = grad_x * (x - 15.5) / 16.0 + grad_y * (y - 15.5) / 16.0;
            const std::array<double, 3> b{bg.r + shade, bg.g + shade, bg.b + shade};
            const std::array<double, 3> f{fg.r, fg.g, fg.b};
            for (int c = 0; c < kImageChannels; ++c) {
                const double val = b[static_cast<std::size_t>(c)] * (1.0 - alpha) +
                                   f[static_cast<std::size_t>(c)] * alpha + texture(rng);
                const double q = std::round(std::clamp(val, 0.0, 1.0) * 255.0);
                img.data[static_cast<std::size_t>(c) * plane + static_cast<std::size_t>(y) * kImageSide + x] =
                    static_cast<float>(q) / 255.0f;
            }
        }
    return img;
}

Dataset gen_synthetic(std::size_t n, std::uint64_t seed, const SyntheticStyle& style) {
    if (n < 1) throw std::invalid_argument("gen_synthetic: n must be ≥ 1");
    Dataset ds;
    ds.split = "synthetic";
    ds.images.reserve(n);
    ds.labels.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int cls = static_cast<int>(i % kNumClasses);
        ds.images.push_back(render_synthetic(cls, derive_seed(seed, {i}), style));
        ds.labels.push_back(cls);
    }
    return ds;
}

}  // namespace bnad
