#include <cmath>
#include <sstream>

#include "bnad/corruptions.hpp"
#include "bnad/dataio.hpp"
#include "bnad/detector.hpp"
#include "bnad/fft.hpp"
#include "bnad/random.hpp"
#include "bnad/spectrum.hpp"
#include "doctest.h"

using namespace bnad;

namespace {

NaturalSpectrum flat_eps(int h, int w, double v) {
    NaturalSpectrum e;
    e.grid = SpectrumGrid(h, w, v);
    e.count = 1;
    return e;
}

}  // namespace

TEST_SUITE("spectrum") {

TEST_CASE("mean_amplitude of one and two images") {
    const Dataset d = gen_synthetic(2, 3);
    const NaturalSpectrum one = mean_amplitude(std::span<const Image>(d.images.data(), 1));
    const SpectrumGrid a0 = amplitude_spectrum(d.images[0], {});
    const SpectrumGrid a1 = amplitude_spectrum(d.images[1], {});
    CHECK(one.count == 1);
    for (std::size_t i = 0; i < a0.values.size(); ++i)
        CHECK(one.grid.values[i] == doctest::Approx(std::max(a0.values[i], kSpectrumFloor)));
    const NaturalSpectrum two = mean_amplitude(d.images);
    for (std::size_t i = 0; i < a0.values.size(); ++i)
        CHECK(two.grid.values[i] == doctest::Approx(std::max((a0.values[i] + a1.values[i]) / 2, kSpectrumFloor)));
    CHECK_THROWS(mean_amplitude(std::span<const Image>{}));
}

TEST_CASE("amplitudes use the first channel") {
    Image img({3, 4, 4});
    for (std::size_t i = 16; i < img.size(); ++i) img[i] = 1.0f;
    const auto a = amplitude_spectrum(img, {});
    for (double v : a.values) CHECK(v == 0.0);
}

TEST_CASE("natural spectrum peaks at DC") {
    const Dataset d = gen_synthetic(1000, 4);
    const NaturalSpectrum e = mean_amplitude(d.images);
    const double dc = e.grid.at(0, 0);
    for (double v : e.grid.values) CHECK(v <= dc);
    for (double v : e.grid.values) CHECK(v >= kSpectrumFloor);
}

TEST_CASE("normalize_spectrum hand cases") {
    const NaturalSpectrum eps = flat_eps(4, 4, 2.0);
    for (double v : normalize_spectrum(SpectrumGrid(4, 4, 2.0), eps).values) CHECK(v == doctest::Approx(std::log(2.0)));
    for (double v : normalize_spectrum(SpectrumGrid(4, 4, 0.0), eps).values) CHECK(v == 0.0);
    SpectrumGrid amp(4, 4, 2.0);
    amp.at(1, 2) = 6.0;
    CHECK(normalize_spectrum(amp, eps).at(1, 2) == doctest::Approx(std::log(4.0)));
    CHECK_THROWS(normalize_spectrum(SpectrumGrid(4, 5), eps));
}

TEST_CASE("feature extraction shape and content") {
    const Dataset d = gen_synthetic(50, 5);
    const NaturalSpectrum eps = mean_amplitude(d.images);
    const auto f = extract_feature(d.images[0], eps);
    CHECK(f.size() == 544);
    CHECK(feature_length(32, 32) == 544);
    for (float v : f) CHECK((std::isfinite(v) && v >= 0.0f));
    CHECK(extract_feature(d.images[0], eps) == f);

    const Image flat({3, 32, 32}, 0.5f);
    const auto g = extract_feature(flat, eps);
    for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(g[0] > 0.0f);

    CHECK_THROWS(extract_feature(Image({3, 16, 16}), eps));
    CHECK(extract_full_feature(d.images[0], eps).size() == 1024);
    CHECK(extract_raw_pixels(d.images[0], {}).size() == 1024);
}

TEST_CASE("half spectrum keeps columns 0..W/2") {
    SpectrumGrid g(4, 6);
    for (std::size_t i = 0; i < g.values.size(); ++i) g.values[i] = static_cast<double>(i);
    const auto h = half_spectrum(g);
    REQUIRE(h.size() == 16);
    CHECK(h[0] == 0.0f);
    CHECK(h[3] == 3.0f);
    CHECK(h[4] == 6.0f);
    CHECK(half_grid(h, 4, 6).at(3, 3) == g.at(3, 3));
}

TEST_CASE("mean corruption spectra") {
    const Dataset d = gen_synthetic(500, 6);
    const NaturalSpectrum eps = mean_amplitude(d.images);
    const std::vector<CorruptionLabel> labels{CorruptionLabel::natural, CorruptionLabel::gaussian_noise};
    const std::vector<int> sev{1, 5};
    const auto corpus = build_corrupted_dataset(d.images, d.labels, labels, sev, 500, 7);

    // ε_n against its own images
    CorruptedCorpus nat;
    for (auto i : corpus.indices_of(CorruptionLabel::natural, 1)) nat.records.push_back(corpus.records[i]);
    const auto own = mean_corruption_spectrum(nat, eps, std::vector{CorruptionLabel::natural}, false);
    for (double v : own.at(CorruptionLabel::natural).values) CHECK(std::abs(v - std::log(2.0)) < 0.15);

    auto grid_mean = [&](int s) {
        CorruptedCorpus c;
        for (auto i : corpus.indices_of(CorruptionLabel::gaussian_noise, s)) c.records.push_back(corpus.records[i]);
        const auto g = mean_corruption_spectrum(c, eps, std::vector{CorruptionLabel::gaussian_noise}, false)
                           .at(CorruptionLabel::gaussian_noise);
        double m = 0.0;
        for (double v : g.values) m += v;
        return m / static_cast<double>(g.values.size());
    };
    CHECK(grid_mean(5) > grid_mean(1));

    const auto clamped = mean_corruption_spectrum(corpus, eps, labels, true);
    for (const auto& [l, g] : clamped)
        for (double v : g.values) CHECK(v <= 1.0);
    CHECK_THROWS(mean_corruption_spectrum(corpus, eps, std::vector{CorruptionLabel::fog}, true));

    std::ostringstream pgm;
    write_pgm_text(pgm, clamped.at(CorruptionLabel::natural), 1.0);
    CHECK(pgm.str().rfind("P2\n32 32\n255\n", 0) == 0);
}

}  // TEST_SUITE

TEST_SUITE("detector") {

TEST_CASE("architecture and initialization") {
    const DetectorModel m = init_detector(544, 12, 1);
    CHECK(m.parameter_count() == 544 * 1024 + 1024 + 1024 * 512 + 512 + 512 * 12 + 12);
    CHECK(m.parameter_count() == 1089036);
    CHECK(m.w1.shape == std::vector<int>{1024, 544});
    CHECK(m.w2.shape == std::vector<int>{512, 1024});
    CHECK(m.w3.shape == std::vector<int>{12, 512});
    for (const Tensor* b : {&m.b1, &m.b2, &m.b3})
        for (float v : b->data) CHECK(v == 0.0f);
    const float bound = static_cast<float>(std::sqrt(6.0 / (544 + 1024)));
    for (float v : m.w1.data) REQUIRE(std::abs(v) <= bound);
    CHECK(init_detector(544, 12, 1) == m);
    CHECK_FALSE(init_detector(544, 12, 2) == m);
}

TEST_CASE("schedule drops at epochs 20 and 35") {
    const TrainSchedule s;
    CHECK(s.epochs == 50);
    CHECK(s.lr_at(0) == doctest::Approx(0.01));
    CHECK(s.lr_at(19) == doctest::Approx(0.01));
    CHECK(s.lr_at(20) == doctest::Approx(0.001));
    CHECK(s.lr_at(35) == doctest::Approx(0.0001));
    CHECK(s.lr_at(49) == doctest::Approx(s.base_lr / 100));
}

TEST_CASE("separable toy problem is learned perfectly") {
    LabeledFeatures toy;
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        const int y = i % 2;
        std::vector<float> f(8);
        for (auto& v : f) v = static_cast<float>(uniform(rng, -0.2, 0.2));
        f[0] += y ? 1.0f : -1.0f;
        toy.features.push_back(f);
        toy.labels.push_back(y);
    }
    TrainSchedule s;
    s.epochs = 10;
    s.batch_size = 16;
    const auto t = train_detector(init_detector(8, 2, 1), toy, s);
    REQUIRE(t.history.size() == 10);
    CHECK(t.history.back().mean_loss < t.history.front().mean_loss);
    const auto e = evaluate(t.model, toy);
    CHECK(e.accuracy == 1.0);
    CHECK(e.confusion.at(0, 1) == 0);
    CHECK(e.confusion.at(1, 0) == 0);
    CHECK(e.confusion.row_sum(0) == 100);

    // same seed, same model
    CHECK(train_detector(init_detector(8, 2, 1), toy, s).model == t.model);

    // evaluation is order-free
    LabeledFeatures shuffled = toy;
    std::reverse(shuffled.features.begin(), shuffled.features.end());
    std::reverse(shuffled.labels.begin(), shuffled.labels.end());
    CHECK(evaluate(t.model, shuffled).confusion == e.confusion);

    const auto p = predict(t.model, toy.features[0]);
    double sum = 0.0;
    for (double q : p.probabilities) {
        CHECK(q >= 0.0);
        sum += q;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-5));

    std::ostringstream log;
    write_training_log(log, t.history);
    CHECK(log.str().rfind("0, ", 0) == 0);
}

TEST_CASE("bad inputs are rejected") {
    const DetectorModel m = init_detector(4, 3, 1);
    LabeledFeatures bad{{{0, 0, 0, 0}}, {3}};
    CHECK_THROWS(train_detector(m, bad, TrainSchedule{}));
    LabeledFeatures short_f{{{0, 0, 0}}, {0}};
    CHECK_THROWS(train_detector(m, short_f, TrainSchedule{}));
    CHECK_THROWS(predict(m, std::vector<float>(5)));
    CHECK_THROWS(train_detector(m, LabeledFeatures{}, TrainSchedule{}));
}

TEST_CASE("argmax ties go to the smallest code") {
    DetectorModel m = init_detector(2, 3, 1);
    for (Tensor* t : {&m.w1, &m.w2, &m.w3, &m.b1, &m.b2, &m.b3}) std::fill(t->data.begin(), t->data.end(), 0.0f);
    CHECK(predict(m, std::vector<float>{1, 1}).label == 0);
    m.b3.data = {0.0f, 1.0f, 1.0f};
    CHECK(predict(m, std::vector<float>{1, 1}).label == 1);
    CHECK(predict_labels(m, {{1, 1}, {0, 0}}) == std::vector<int>{1, 1});
}

}  // TEST_SUITE
