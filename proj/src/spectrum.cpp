#include "bnad/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bnad/fft.hpp"
#include "bnad/layers.hpp"

namespace bnad {

Tensor spectrum_plane(const Image& img, const SpectrumConfig& cfg) {
    require_rank(img, 3, "spectrum image");
    if (cfg.pool != 1 && cfg.pool != 2) throw std::invalid_argument("spectrum: pool must be 1 or 2");
    const Image src = cfg.pool == 2 ? nn::avgpool2d_forward(img, 2, 2) : img;
    const int c = src.dim(0), h = src.dim(1), w = src.dim(2);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    Tensor out({h, w});
    if (cfg.channels == ChannelMode::first) {
        std::copy_n(src.data.begin(), plane, out.data.begin());
    } else {
        for (std::size_t k = 0; k < plane; ++k) {
            double acc = 0.0;
            for (int ch = 0; ch < c; ++ch) acc += src.data[static_cast<std::size_t>(ch) * plane + k];
            out.data[k] = static_cast<float>(acc / c);
        }
    }
    return out;
}

SpectrumGrid amplitude_spectrum(const Image& img, const SpectrumConfig& cfg) {
    return amplitude(fft2(spectrum_plane(img, cfg)));
}

NaturalSpectrum mean_amplitude(std::span<const Image> images, const SpectrumConfig& cfg) {
    if (images.empty()) throw std::invalid_argument("mean_amplitude: empty dataset");
    SpectrumGrid sum;
    for (const Image& img : images) {
        const SpectrumGrid amp = amplitude_spectrum(img, cfg);
        if (sum.values.empty()) sum = SpectrumGrid(amp.height, amp.width);
        if (!sum.same_geometry(amp)) throw std::invalid_argument("mean_amplitude: images differ in geometry");
        for (std::size_t i = 0; i < amp.values.size(); ++i) sum.values[i] += amp.values[i];
    }
    NaturalSpectrum eps;
    eps.grid = std::move(sum);
    eps.count = images.size();
    eps.config = cfg;
    for (double& v : eps.grid.values) v = std::max(v / static_cast<double>(images.size()), kSpectrumFloor);
    return eps;
}

SpectrumGrid normalize_spectrum(const SpectrumGrid& amp, const NaturalSpectrum& eps) {
    if (!amp.same_geometry(eps.grid))
        throw std::invalid_argument("normalize_spectrum: amplitude grid " + std::to_string(amp.height) + "x" +
                                    std::to_string(amp.width) + " vs eps " + std::to_string(eps.grid.height) + "x" +
                                    std::to_string(eps.grid.width));
    SpectrumGrid out(amp.height, amp.width);
    for (std::size_t i = 0; i < amp.values.size(); ++i)
        out.values[i] = std::log(amp.values[i] / eps.grid.values[i] + 1.0);
    return out;
}

std::size_t feature_length(const NaturalSpectrum& eps) { return feature_length(eps.grid.height, eps.grid.width); }

FeatureVector half_spectrum(const SpectrumGrid& grid) {
    const int keep = grid.width / 2 + 1;
    FeatureVector f;
    f.reserve(feature_length(grid.height, grid.width));
    for (int r = 0; r < grid.height; ++r)
        for (int c = 0; c < keep; ++c) f.push_back(static_cast<float>(grid.at(r, c)));
    return f;
}

namespace {

SpectrumGrid normalized_for(const Image& img, const NaturalSpectrum& eps) {
    const SpectrumGrid amp = amplitude_spectrum(img, eps.config);
    if (!amp.same_geometry(eps.grid))
        throw std::invalid_argument("extract_feature: image geometry does not match eps");
    return normalize_spectrum(amp, eps);
}

}  // namespace

FeatureVector extract_feature(const Image& img, const NaturalSpectrum& eps) {
    return half_spectrum(normalized_for(img, eps));
}

FeatureVector extract_full_feature(const Image& img, const NaturalSpectrum& eps) {
    const SpectrumGrid g = normalized_for(img, eps);
    return {g.values.begin(), g.values.end()};
}

FeatureVector extract_raw_pixels(const Image& img, const SpectrumConfig& cfg) {
    const Tensor plane = spectrum_plane(img, cfg);
    return plane.data;
}

std::map<CorruptionLabel, SpectrumGrid> mean_corruption_spectrum(const CorruptedCorpus& corpus,
                                                                 const NaturalSpectrum& eps,
                                                                 std::span<const CorruptionLabel> labels,
                                                                 bool clamp_at_one) {
    std::map<CorruptionLabel, SpectrumGrid> out;
    for (CorruptionLabel label : labels) {
        const auto idx = corpus.indices_of(label);
        if (idx.empty())
            throw std::invalid_argument("mean_corruption_spectrum: no records for " + std::string(label_name(label)));
        SpectrumGrid sum(eps.grid.height, eps.grid.width);
        for (std::size_t i : idx) {
            const SpectrumGrid amp = amplitude_spectrum(corpus.records[i].image, eps.config);
            if (!amp.same_geometry(sum)) throw std::invalid_argument("mean_corruption_spectrum: geometry mismatch");
            for (std::size_t k = 0; k < amp.values.size(); ++k) sum.values[k] += amp.values[k];
        }
        for (double& v : sum.values) v /= static_cast<double>(idx.size());
        SpectrumGrid g = fftshift(normalize_spectrum(sum, eps));
        if (clamp_at_one)
            for (double& v : g.values) v = std::min(v, 1.0);
        out.emplace(label, std::move(g));
    }
    return out;
}

void write_pgm_text(std::ostream& out, const SpectrumGrid& grid, double max_value) {
    if (!(max_value > 0.0)) throw std::invalid_argument("write_pgm_text: max_value must be positive");
    out << "P2\n" << grid.width << ' ' << grid.height << "\n255\n";
    for (int r = 0; r < grid.height; ++r) {
        for (int c = 0; c < grid.width; ++c) {
            const double v = std::clamp(grid.at(r, c) / max_value, 0.0, 1.0);
            out << (c ? " " : "") << static_cast<int>(std::lround(v * 255.0));
        }
        out << '\n';
    }
}

SpectrumGrid half_grid(std::span<const float> feature, int height, int width) {
    const int keep = width / 2 + 1;
    if (feature.size() != feature_length(height, width)) throw std::invalid_argument("half_grid: length mismatch");
    SpectrumGrid g(height, keep);
    for (std::size_t i = 0; i < feature.size(); ++i) g.values[i] = feature[i];
    return g;
}

double outer_annulus_mean(const SpectrumGrid& grid, double inner_fraction, int full_width) {
    const int w_full = full_width > 0 ? full_width : grid.width;
    const double nyquist = 0.5 * std::min(grid.height, w_full);
    double sum = 0.0;
    std::size_t n = 0;
    for (int r = 0; r < grid.height; ++r)
        for (int c = 0; c < grid.width; ++c) {
            const double fu = std::min(r, grid.height - r);
            const double fv = std::min(c, w_full - c);
            if (std::hypot(fu, fv) > inner_fraction * nyquist) {
                sum += grid.at(r, c);
                ++n;
            }
        }
    return n ? sum / static_cast<double>(n) : 0.0;
}

}  // namespace bnad
