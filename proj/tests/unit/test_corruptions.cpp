#include <cmath>
#include <set>

#include "bnad/corruptions.hpp"
#include "bnad/dataio.hpp"
#include "bnad/random.hpp"
#include "bnad/spectrum.hpp"
#include "doctest.h"

using namespace bnad;

namespace {

const Dataset& sample_images() {
    static const Dataset d = gen_synthetic(100, 21);
    return d;
}

double mean_sq_dev(const Image& a, const Image& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s / static_cast<double>(a.size());
}

// Mean amplitude beyond half-Nyquist, first channel.
double high_freq_energy(const Image& img) {
    return outer_annulus_mean(amplitude_spectrum(img, {}), 0.5);
}

}  // namespace

TEST_SUITE("corruptions") {

TEST_CASE("labels have stable dense codes and one family each") {
    int expect = 0;
    for (auto l : all_labels()) {
        CHECK(code(l) == expect++);
        CHECK(label_from_code(code(l)) == l);
        CHECK(label_from_name(label_name(l)) == l);
    }
    CHECK(code(CorruptionLabel::natural) == 0);
    CHECK(code(CorruptionLabel::pixelate) == 11);
    CHECK_THROWS_AS(label_from_code(12), CorruptionError);
    CHECK_THROWS_AS(label_from_code(-1), CorruptionError);
    CHECK(family_of(CorruptionLabel::natural) == CorruptionFamily::none);
    for (auto l : all_corruptions()) CHECK(family_of(l) != CorruptionFamily::none);
    CHECK(family_of(CorruptionLabel::shot_noise) == CorruptionFamily::noise);
    CHECK(family_of(CorruptionLabel::zoom_blur) == CorruptionFamily::blur);
    CHECK(family_of(CorruptionLabel::brightness) == CorruptionFamily::weather);
    CHECK(family_of(CorruptionLabel::elastic) == CorruptionFamily::digital);
}

TEST_CASE("severity must lie in 1..5") {
    CHECK_NOTHROW(Severity(1));
    CHECK_NOTHROW(Severity(5));
    CHECK_THROWS(Severity(0));
    CHECK_THROWS(Severity(6));
}

TEST_CASE("natural is the identity and every output stays in range") {
    const Image& img = sample_images().images[3];
    for (int s = 1; s <= 5; ++s) CHECK(corrupt(img, CorruptionLabel::natural, Severity(s), 99) == img);
    for (auto l : all_corruptions())
        for (int s = 1; s <= 5; ++s) {
            const Image out = corrupt(img, l, Severity(s), 5);
            CHECK(out.shape == img.shape);
            for (float v : out.data) REQUIRE((v >= 0.0f && v <= 1.0f));
        }
}

TEST_CASE("corruptions are deterministic in the seed") {
    const Image& img = sample_images().images[0];
    for (auto l : all_corruptions()) {
        CHECK(corrupt(img, l, Severity(3), 17) == corrupt(img, l, Severity(3), 17));
    }
    CHECK(corrupt(img, CorruptionLabel::gaussian_noise, Severity(3), 1) !=
          corrupt(img, CorruptionLabel::gaussian_noise, Severity(3), 2));
}

TEST_CASE("gaussian noise field has the configured variance") {
    for (int s = 0; s < 5; ++s) {
        const double sigma = SeverityTable::gaussian_sigma[static_cast<std::size_t>(s)];
        const Tensor f = gaussian_noise_field({3, 32, 32}, sigma, static_cast<std::uint64_t>(s));
        double m = 0.0, v = 0.0;
        for (float x : f.data) m += x;
        m /= static_cast<double>(f.size());
        for (float x : f.data) v += (x - m) * (x - m);
        v /= static_cast<double>(f.size() - 1);
        CHECK(std::abs(v - sigma * sigma) < 0.1 * sigma * sigma);
    }
    // the applied corruption is the clamped sum
    const Image& img = sample_images().images[1];
    const Image out = corrupt(img, CorruptionLabel::gaussian_noise, Severity(2), 8);
    const Tensor field = gaussian_noise_field(img.shape, SeverityTable::gaussian_sigma[1], 8);
    for (std::size_t i = 0; i < img.size(); ++i) CHECK(out[i] == clamp_unit(Image({1}, {img[i] + field[i]}))[0]);
}

TEST_CASE("pixelate with a unit block is the identity") {
    const Image& img = sample_images().images[4];
    CHECK(pixelate_blocks(img, 1, 1.0) == img);
    CHECK(pixelate_blocks(img, 1, 0.5) == img);
    const Image p = pixelate_blocks(img, 4, 1.0);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
                CHECK(p[static_cast<std::size_t>((c * 32 + y) * 32 + x)] ==
                      p[static_cast<std::size_t>((c * 32 + y / 4 * 4) * 32 + x / 4 * 4)]);
}

TEST_CASE("kernel builders") {
    const Tensor tiny = disk_kernel(0.3);
    CHECK(tiny.shape == std::vector<int>{1, 1});
    CHECK(tiny[0] == 1.0f);

    const Tensor line = motion_kernel(3, 0.0);
    REQUIRE(line.shape == std::vector<int>{1, 3});
    for (float v : line.data) CHECK(v == doctest::Approx(1.0 / 3.0));

    for (double r : SeverityTable::defocus_radius) {
        const Tensor k = disk_kernel(r);
        double s = 0.0;
        for (float v : k.data) {
            CHECK(v >= 0.0f);
            s += v;
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-5));
    }
    for (int len : SeverityTable::motion_length)
        for (double a : {0.0, 0.4, 1.3, 2.9}) {
            const Tensor k = motion_kernel(len, a);
            double s = 0.0;
            for (float v : k.data) {
                CHECK(v >= 0.0f);
                s += v;
            }
            CHECK(s == doctest::Approx(1.0).epsilon(1e-5));
        }

    const Tensor p = plasma_field(32, 32, 0.55, 4);
    CHECK(*std::min_element(p.data.begin(), p.data.end()) == 0.0f);
    CHECK(*std::max_element(p.data.begin(), p.data.end()) == 1.0f);
    CHECK_THROWS(plasma_field(1, 1, 0.5, 1));
    CHECK_THROWS(disk_kernel(-1.0));
    CHECK_THROWS(motion_kernel(0, 0.0));
}

TEST_CASE("noise severity increases pixel deviation") {
    const auto& d = sample_images();
    for (auto l : {CorruptionLabel::gaussian_noise, CorruptionLabel::shot_noise, CorruptionLabel::impulse_noise}) {
        double prev = -1.0;
        for (int s = 1; s <= 5; ++s) {
            double dev = 0.0;
            for (std::size_t i = 0; i < d.size(); ++i)
                dev += mean_sq_dev(corrupt(d.images[i], l, Severity(s), i), d.images[i]);
            CAPTURE(label_name(l));
            CHECK(dev > prev);
            prev = dev;
        }
    }
}

TEST_CASE("blur severity removes high frequencies") {
    const auto& d = sample_images();
    for (auto l : {CorruptionLabel::defocus_blur, CorruptionLabel::motion_blur, CorruptionLabel::zoom_blur}) {
        double prev = 1e300;
        for (int s = 1; s <= 5; ++s) {
            double e = 0.0;
            for (std::size_t i = 0; i < d.size(); ++i) e += high_freq_energy(corrupt(d.images[i], l, Severity(s), i));
            CAPTURE(label_name(l));
            CHECK(e < prev);
            prev = e;
        }
    }
}

TEST_CASE("noise spectra carry more outer-band energy than blur spectra") {
    const auto& d = sample_images();
    const NaturalSpectrum eps = mean_amplitude(d.images);
    for (int s = 1; s <= 5; ++s) {
        auto outer = [&](CorruptionLabel l) {
            double acc = 0.0;
            for (std::size_t i = 0; i < d.size(); ++i)
                acc += outer_annulus_mean(half_grid(extract_feature(corrupt(d.images[i], l, Severity(s), i), eps), 32, 32),
                                          0.5, 32);
            return acc;
        };
        double min_noise = 1e300, max_blur = -1e300;
        for (auto l : {CorruptionLabel::gaussian_noise, CorruptionLabel::shot_noise, CorruptionLabel::impulse_noise})
            min_noise = std::min(min_noise, outer(l));
        for (auto l : {CorruptionLabel::defocus_blur, CorruptionLabel::motion_blur, CorruptionLabel::zoom_blur})
            max_blur = std::max(max_blur, outer(l));
        CAPTURE(s);
        CHECK(min_noise > max_blur);
    }
}

TEST_CASE("build_corrupted_dataset fills every cell") {
    const auto& d = sample_images();
    const auto labels = all_labels();
    const auto corpus = build_corrupted_dataset(d.images, d.labels, labels, kAllSeverities, 100, 4);
    CHECK(corpus.size() == 6000);
    CHECK(corpus.indices_of(CorruptionLabel::natural).size() == 500);
    std::array<int, 6> sev_hist{};
    for (const auto& r : corpus.records) ++sev_hist[static_cast<std::size_t>(r.severity)];
    for (int s = 1; s <= 5; ++s) CHECK(sev_hist[static_cast<std::size_t>(s)] == 1200);
    for (auto l : labels)
        for (int s = 1; s <= 5; ++s) CHECK(corpus.indices_of(l, s).size() == 100);

    const auto again = build_corrupted_dataset(d.images, d.labels, labels, kAllSeverities, 100, 4);
    bool same = again.size() == corpus.size();
    for (std::size_t i = 0; same && i < corpus.size(); ++i)
        same = again.records[i].image == corpus.records[i].image &&
               again.records[i].class_label == corpus.records[i].class_label &&
               again.records[i].corruption == corpus.records[i].corruption &&
               again.records[i].severity == corpus.records[i].severity;
    CHECK(same);

    CHECK_THROWS_AS(build_corrupted_dataset(d.images, d.labels, labels, kAllSeverities, 101, 4), CorruptionError);
}

}  // TEST_SUITE
