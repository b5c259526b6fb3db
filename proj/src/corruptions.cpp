#include "bnad/corruptions.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bnad/random.hpp"

namespace bnad {

namespace {

constexpr std::array<std::string_view, kNumLabels> kNames{
    "natural",    "gaussian_noise", "shot_noise", "impulse_noise", "defocus_blur", "motion_blur",
    "zoom_blur",  "fog",            "brightness", "contrast",      "elastic",      "pixelate",
};

struct ImageDims {
    int c, h, w;
};

ImageDims image_dims(const Image& img) {
    if (img.rank() != 3) throw CorruptionError("expected a C×H×W image, got " + shape_string(img.shape));
    return {img.dim(0), img.dim(1), img.dim(2)};
}

int reflect101(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
}

float at(const Image& img, int c, int y, int x) {
    return img.data[(static_cast<std::size_t>(c) * img.dim(1) + y) * img.dim(2) + x];
}

Image add_gaussian(const Image& img, double sigma, std::uint64_t seed) {
    const Tensor field = gaussian_noise_field(img.shape, sigma, seed);
    Image out = img;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += field.data[i];
    return clamp_unit(std::move(out));
}

Image shot(const Image& img, double photons, std::uint64_t seed) {
    Rng rng(seed);
    Image out = img;
    for (float& v : out.data) {
        const double lambda = std::max(0.0, static_cast<double>(v)) * photons;
        const double k = lambda > 0.0 ? static_cast<double>(std::poisson_distribution<int>(lambda)(rng)) : 0.0;
        v = static_cast<float>(k / photons);
    }
    return clamp_unit(std::move(out));
}

Image impulse(const Image& img, double fraction, std::uint64_t seed) {
    Rng rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Image out = img;
    for (float& v : out.data) {
        const double r = u(rng);
        if (r < fraction) v = r < 0.5 * fraction ? 0.0f : 1.0f;
    }
    return out;
}

Image zoom_average(const Image& img, double max_zoom) {
    const auto [c, h, w] = image_dims(img);
    const double cy = 0.5 * (h - 1), cx = 0.5 * (w - 1);
    std::vector<double> acc(img.size(), 0.0);
    int count = 0;
    for (int step = 0;; ++step) {
        const double z = 1.0 + 0.02 * step;
        if (z > max_zoom + 1e-9) break;
        ++count;
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    acc[(static_cast<std::size_t>(ch) * h + y) * w + x] +=
                        bilinear_sample(img, ch, cy + (y - cy) / z, cx + (x - cx) / z);
    }
    Image out(img.shape);
    for (std::size_t i = 0; i < acc.size(); ++i) out.data[i] = static_cast<float>(acc[i] / count);
    return clamp_unit(std::move(out));
}

std::vector<double> blur_field(const std::vector<double>& field, int h, int w, const std::vector<double>& taps) {
    const int radius = static_cast<int>(taps.size() / 2);
    std::vector<double> tmp(field.size()), out(field.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int k = -radius; k <= radius; ++k)
                s += taps[static_cast<std::size_t>(k + radius)] * field[static_cast<std::size_t>(y) * w + reflect101(x + k, w)];
            tmp[static_cast<std::size_t>(y) * w + x] = s;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int k = -radius; k <= radius; ++k)
                s += taps[static_cast<std::size_t>(k + radius)] * tmp[static_cast<std::size_t>(reflect101(y + k, h)) * w + x];
            out[static_cast<std::size_t>(y) * w + x] = s;
        }
    return out;
}

Image elastic_warp(const Image& img, double max_displacement, std::uint64_t seed) {
    const auto [c, h, w] = image_dims(img);
    Rng rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::vector<double> dx(plane), dy(plane);
    for (auto& v : dx) v = u(rng);
    for (auto& v : dy) v = u(rng);
    const auto taps = gaussian_taps(4.0);
    dx = blur_field(dx, h, w, taps);
    dy = blur_field(dy, h, w, taps);
    double peak = 0.0;
    for (std::size_t i = 0; i < plane; ++i) peak = std::max({peak, std::abs(dx[i]), std::abs(dy[i])});
    const double scale = peak > 0.0 ? max_displacement / peak : 0.0;

    Image out(img.shape);
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const std::size_t p = static_cast<std::size_t>(y) * w + x;
                out.data[static_cast<std::size_t>(ch) * plane + p] =
                    static_cast<float>(bilinear_sample(img, ch, y + scale * dy[p], x + scale * dx[p]));
            }
    return clamp_unit(std::move(out));
}

}  // namespace

// ---- labels ----------------------------------------------------------------

CorruptionLabel label_from_code(int c) {
    if (c < 0 || c >= kNumLabels) throw CorruptionError("unknown corruption code " + std::to_string(c));
    return static_cast<CorruptionLabel>(c);
}

std::string_view label_name(CorruptionLabel l) { return kNames.at(static_cast<std::size_t>(code(label_from_code(code(l))))); }

std::optional<CorruptionLabel> label_from_name(std::string_view name) {
    for (int i = 0; i < kNumLabels; ++i)
        if (kNames[static_cast<std::size_t>(i)] == name) return static_cast<CorruptionLabel>(i);
    return std::nullopt;
}

CorruptionFamily family_of(CorruptionLabel l) {
    switch (l) {
        case CorruptionLabel::natural: return CorruptionFamily::none;
        case CorruptionLabel::gaussian_noise:
        case CorruptionLabel::shot_noise:
        case CorruptionLabel::impulse_noise: return CorruptionFamily::noise;
        case CorruptionLabel::defocus_blur:
        case CorruptionLabel::motion_blur:
        case CorruptionLabel::zoom_blur: return CorruptionFamily::blur;
        case CorruptionLabel::fog:
        case CorruptionLabel::brightness: return CorruptionFamily::weather;
        case CorruptionLabel::contrast:
        case CorruptionLabel::elastic:
        case CorruptionLabel::pixelate: return CorruptionFamily::digital;
    }
    throw CorruptionError("unknown corruption label");
}

std::string_view family_name(CorruptionFamily f) {
    switch (f) {
        case CorruptionFamily::none: return "none";
        case CorruptionFamily::noise: return "noise";
        case CorruptionFamily::blur: return "blur";
        case CorruptionFamily::weather: return "weather";
        case CorruptionFamily::digital: return "digital";
    }
    return "?";
}

std::array<CorruptionLabel, kNumLabels> all_labels() {
    std::array<CorruptionLabel, kNumLabels> a{};
    for (int i = 0; i < kNumLabels; ++i) a[static_cast<std::size_t>(i)] = static_cast<CorruptionLabel>(i);
    return a;
}

std::array<CorruptionLabel, kNumCorruptions> all_corruptions() {
    std::array<CorruptionLabel, kNumCorruptions> a{};
    for (int i = 0; i < kNumCorruptions; ++i) a[static_cast<std::size_t>(i)] = static_cast<CorruptionLabel>(i + 1);
    return a;
}

Severity::Severity(int s) : value_(s) {
    if (s < kMinSeverity || s > kMaxSeverity)
        throw CorruptionError("severity " + std::to_string(s) + " outside 1..5");
}

// ---- kernels ---------------------------------------------------------------

Tensor disk_kernel(double radius) {
    if (!(radius > 0.0)) throw CorruptionError("disk_kernel: radius must be positive");
    if (radius < 0.5) return Tensor({1, 1}, std::vector<float>{1.0f});
    const int half = static_cast<int>(std::ceil(radius - 0.5));
    const int side = 2 * half + 1;
    constexpr int kSub = 16;
    std::vector<double> weights(static_cast<std::size_t>(side) * side, 0.0);
    double total = 0.0;
    for (int y = -half; y <= half; ++y)
        for (int x = -half; x <= half; ++x) {
            int inside = 0;
            for (int sy = 0; sy < kSub; ++sy)
                for (int sx = 0; sx < kSub; ++sx) {
                    const double py = y - 0.5 + (sy + 0.5) / kSub;
                    const double px = x - 0.5 + (sx + 0.5) / kSub;
                    if (py * py + px * px <= radius * radius) ++inside;
                }
            const double wgt = static_cast<double>(inside) / (kSub * kSub);
            weights[static_cast<std::size_t>(y + half) * side + (x + half)] = wgt;
            total += wgt;
        }
    Tensor k({side, side});
    for (std::size_t i = 0; i < weights.size(); ++i) k.data[i] = static_cast<float>(weights[i] / total);
    return k;
}

Tensor motion_kernel(int length, double angle) {
    if (length < 1) throw CorruptionError("motion_kernel: length must be positive");
    const int side = length + 2;
    const double center = 0.5 * (side - 1);
    std::vector<double> canvas(static_cast<std::size_t>(side) * side, 0.0);
    const double c = std::cos(angle), s = std::sin(angle);
    for (int k = 0; k < length; ++k) {
        const double t = k - 0.5 * (length - 1);
        const double x = center + t * c;
        const double y = center + t * s;
        const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
        const double fx = x - x0, fy = y - y0;
        const double share = 1.0 / length;
        const auto splat = [&](int yy, int xx, double wgt) {
            if (wgt > 0.0 && yy >= 0 && yy < side && xx >= 0 && xx < side)
                canvas[static_cast<std::size_t>(yy) * side + xx] += share * wgt;
        };
        splat(y0, x0, (1 - fy) * (1 - fx));
        splat(y0, x0 + 1, (1 - fy) * fx);
        splat(y0 + 1, x0, fy * (1 - fx));
        splat(y0 + 1, x0 + 1, fy * fx);
    }
    int top = side, bottom = -1, left = side, right = -1;
    double total = 0.0;
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x)
            if (canvas[static_cast<std::size_t>(y) * side + x] > 0.0) {
                top = std::min(top, y);
                bottom = std::max(bottom, y);
                left = std::min(left, x);
                right = std::max(right, x);
                total += canvas[static_cast<std::size_t>(y) * side + x];
            }
    const int kh = bottom - top + 1, kw = right - left + 1;
    Tensor k({kh, kw});
    for (int y = 0; y < kh; ++y)
        for (int x = 0; x < kw; ++x)
            k.data[static_cast<std::size_t>(y) * kw + x] =
                static_cast<float>(canvas[static_cast<std::size_t>(y + top) * side + (x + left)] / total);
    return k;
}

Tensor plasma_field(int height, int width, double roughness, std::uint64_t seed) {
    if (height < 2 || width < 2) throw CorruptionError("plasma_field: grid must be at least 2×2");
    if (!(roughness > 0.0)) throw CorruptionError("plasma_field: roughness must be positive");
    int n = 2;
    while (n + 1 < std::max(height, width)) n *= 2;
    const int size = n + 1;
    std::vector<double> g(static_cast<std::size_t>(size) * size, 0.0);
    auto cell = [&](int y, int x) -> double& { return g[static_cast<std::size_t>(y) * size + x]; };
    Rng rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    cell(0, 0) = u(rng);
    cell(0, n) = u(rng);
    cell(n, 0) = u(rng);
    cell(n, n) = u(rng);

    double scale = 1.0;
    for (int step = n; step > 1; step /= 2) {
        const int half = step / 2;
        for (int y = half; y < size; y += step)
            for (int x = half; x < size; x += step)
                cell(y, x) = 0.25 * (cell(y - half, x - half) + cell(y - half, x + half) +
                                     cell(y + half, x - half) + cell(y + half, x + half)) +
                             scale * u(rng);
        for (int y = 0; y < size; y += half)
            for (int x = (y / half) % 2 == 0 ? half : 0; x < size; x += step) {
                double sum = 0.0;
                int cnt = 0;
                if (y >= half) sum += cell(y - half, x), ++cnt;
                if (y + half < size) sum += cell(y + half, x), ++cnt;
                if (x >= half) sum += cell(y, x - half), ++cnt;
                if (x + half < size) sum += cell(y, x + half), ++cnt;
                cell(y, x) = sum / cnt + scale * u(rng);
            }
        scale *= roughness;
    }

    double lo = cell(0, 0), hi = cell(0, 0);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            lo = std::min(lo, cell(y, x));
            hi = std::max(hi, cell(y, x));
        }
    Tensor out({height, width});
    const double span = hi > lo ? hi - lo : 1.0;
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            out.data[static_cast<std::size_t>(y) * width + x] = static_cast<float>((cell(y, x) - lo) / span);
    return out;
}

std::vector<double> gaussian_taps(double sigma) {
    if (!(sigma > 0.0)) throw CorruptionError("gaussian_taps: sigma must be positive");
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
    double total = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        const double v = std::exp(-0.5 * k * k / (sigma * sigma));
        taps[static_cast<std::size_t>(k + radius)] = v;
        total += v;
    }
    for (double& v : taps) v /= total;
    return taps;
}

// ---- primitive image ops ---------------------------------------------------

Tensor gaussian_noise_field(std::vector<int> shape, double sigma, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    Tensor field(std::move(shape));
    for (float& v : field.data) v = static_cast<float>(noise(rng));
    return field;
}

Image clamp_unit(Image img) {
    for (float& v : img.data) v = std::clamp(v, 0.0f, 1.0f);
    return img;
}

Image filter2d(const Image& img, const Tensor& kernel) {
    const auto [c, h, w] = image_dims(img);
    require_rank(kernel, 2, "filter2d kernel");
    const int kh = kernel.dim(0), kw = kernel.dim(1);
    const int oy = kh / 2, ox = kw / 2;
    Image out(img.shape);
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double s = 0.0;
                for (int ky = 0; ky < kh; ++ky)
                    for (int kx = 0; kx < kw; ++kx)
                        s += static_cast<double>(kernel.data[static_cast<std::size_t>(ky) * kw + kx]) *
                             at(img, ch, reflect101(y + ky - oy, h), reflect101(x + kx - ox, w));
                out.data[(static_cast<std::size_t>(ch) * h + y) * w + x] = static_cast<float>(s);
            }
    return clamp_unit(std::move(out));
}

Image pixelate_blocks(const Image& img, int block, double weight) {
    if (block < 1) throw CorruptionError("pixelate: block must be ≥ 1");
    if (block == 1) return img;
    const auto [c, h, w] = image_dims(img);
    Image out(img.shape);
    const float keep = static_cast<float>(1.0 - weight), mix = static_cast<float>(weight);
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const int sy = std::min(h - 1, (y / block) * block + block / 2);
                const int sx = std::min(w - 1, (x / block) * block + block / 2);
                const std::size_t idx = (static_cast<std::size_t>(ch) * h + y) * w + x;
                out.data[idx] = keep * img.data[idx] + mix * at(img, ch, sy, sx);
            }
    return clamp_unit(std::move(out));
}

double bilinear_sample(const Image& img, int channel, double y, double x) {
    const int h = img.dim(1), w = img.dim(2);
    y = std::clamp(y, 0.0, static_cast<double>(h - 1));
    x = std::clamp(x, 0.0, static_cast<double>(w - 1));
    const int y0 = static_cast<int>(std::floor(y)), x0 = static_cast<int>(std::floor(x));
    const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
    const double fy = y - y0, fx = x - x0;
    return (1 - fy) * ((1 - fx) * at(img, channel, y0, x0) + fx * at(img, channel, y0, x1)) +
           fy * ((1 - fx) * at(img, channel, y1, x0) + fx * at(img, channel, y1, x1));
}

// ---- dispatch --------------------------------------------------------------

Image corrupt(const Image& img, CorruptionLabel label, Severity s, std::uint64_t seed) {
    image_dims(img);
    const std::size_t i = static_cast<std::size_t>(s.index());
    using T = SeverityTable;
    switch (label) {
        case CorruptionLabel::natural: return img;
        case CorruptionLabel::gaussian_noise: return add_gaussian(img, T::gaussian_sigma[i], seed);
        case CorruptionLabel::shot_noise: return shot(img, T::shot_photons[i], seed);
        case CorruptionLabel::impulse_noise: return impulse(img, T::impulse_fraction[i], seed);
        case CorruptionLabel::defocus_blur: return filter2d(img, disk_kernel(T::defocus_radius[i]));
        case CorruptionLabel::motion_blur: {
            Rng rng(seed);
            const double angle = uniform(rng, 0.0, std::numbers::pi);
            return filter2d(img, motion_kernel(T::motion_length[i], angle));
        }
        case CorruptionLabel::zoom_blur: return zoom_average(img, T::zoom_max[i]);
        case CorruptionLabel::fog: {
            const Tensor plasma = plasma_field(img.dim(1), img.dim(2), 0.55, seed);
            const float t = static_cast<float>(T::fog_mix[i]);
            const std::size_t plane = plasma.size();
            Image out = img;
            for (std::size_t k = 0; k < out.size(); ++k)
                out.data[k] = img.data[k] * (1.0f - t) + t * plasma.data[k % plane];
            return clamp_unit(std::move(out));
        }
        case CorruptionLabel::brightness: {
            Image out = img;
            for (float& v : out.data) v += static_cast<float>(T::brightness_shift[i]);
            return clamp_unit(std::move(out));
        }
        case CorruptionLabel::contrast: {
            const auto [c, h, w] = image_dims(img);
            const std::size_t plane = static_cast<std::size_t>(h) * w;
            const double factor = T::contrast_factor[i];
            Image out = img;
            for (int ch = 0; ch < c; ++ch) {
                double mean = 0.0;
                for (std::size_t k = 0; k < plane; ++k) mean += img.data[static_cast<std::size_t>(ch) * plane + k];
                mean /= static_cast<double>(plane);
                for (std::size_t k = 0; k < plane; ++k) {
                    float& v = out.data[static_cast<std::size_t>(ch) * plane + k];
                    v = static_cast<float>((v - mean) * factor + mean);
                }
            }
            return clamp_unit(std::move(out));
        }
        case CorruptionLabel::elastic: return elastic_warp(img, T::elastic_displacement[i], seed);
        case CorruptionLabel::pixelate: return pixelate_blocks(img, T::pixelate_block[i], T::pixelate_weight[i]);
    }
    throw CorruptionError("unknown corruption label " + std::to_string(static_cast<int>(label)));
}

// ---- corpora ---------------------------------------------------------------

std::vector<std::size_t> CorruptedCorpus::indices_of(CorruptionLabel label) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < records.size(); ++i)
        if (records[i].corruption == label) idx.push_back(i);
    return idx;
}

std::vector<std::size_t> CorruptedCorpus::indices_of(CorruptionLabel label, int severity) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < records.size(); ++i)
        if (records[i].corruption == label && records[i].severity == severity) idx.push_back(i);
    return idx;
}

CorruptedCorpus build_corrupted_dataset(std::span<const Image> images, std::span<const int> class_labels,
                                        std::span<const CorruptionLabel> labels,
                                        std::span<const int> severities, std::size_t count_per_cell,
                                        std::uint64_t seed) {
    if (images.empty()) throw CorruptionError("build_corrupted_dataset: empty dataset");
    if (images.size() != class_labels.size())
        throw CorruptionError("build_corrupted_dataset: image/label count mismatch");
    if (count_per_cell > images.size())
        throw CorruptionError("build_corrupted_dataset: " + std::to_string(count_per_cell) +
                              " images per cell requested but only " + std::to_string(images.size()) +
                              " available");
    CorruptedCorpus corpus;
    corpus.records.reserve(labels.size() * severities.size() * count_per_cell);
    for (CorruptionLabel label : labels) {
        label_from_code(code(label));
        for (int sev : severities) {
            const Severity s(sev);
            Rng cell_rng(derive_seed(seed, {static_cast<std::uint64_t>(code(label)), static_cast<std::uint64_t>(sev)}));
            const auto order = permutation(images.size(), cell_rng);
            for (std::size_t k = 0; k < count_per_cell; ++k) {
                const std::size_t src = order[k];
                const std::uint64_t image_seed =
                    derive_seed(seed, {static_cast<std::uint64_t>(code(label)), static_cast<std::uint64_t>(sev), k, 0xC0});
                corpus.records.push_back({corrupt(images[src], label, s, image_seed), class_labels[src], label, sev});
            }
        }
    }
    return corpus;
}

}  // namespace bnad
