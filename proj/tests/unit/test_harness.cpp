#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <set>
#include <sstream>

#include "bnad/dataio.hpp"
#include "bnad/harness.hpp"
#include "bnad/random.hpp"
#include "doctest.h"

using namespace bnad;

namespace {

// Records whose first pixel encodes the class, so a stub can read it back.
CorruptedCorpus coded_corpus(std::span<const CorruptionLabel> labels, int per_cell) {
    CorruptedCorpus c;
    for (auto l : labels)
        for (int s = 1; s <= 5; ++s)
            for (int i = 0; i < per_cell; ++i) {
                const int cls = i % 10;
                Image img({3, 32, 32}, 0.5f);
                img[0] = static_cast<float>(cls) / 10.0f;
                c.records.push_back({img, cls, l, s});
            }
    return c;
}

std::vector<int> read_class(std::span<const Image> imgs) {
    std::vector<int> out;
    for (const auto& img : imgs) out.push_back(static_cast<int>(std::lround(img[0] * 10.0f)));
    return out;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(BNAD_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("a perfect classifier has zero error everywhere") {
    const auto labels = all_labels();
    const auto corpus = coded_corpus(labels, 10);
    const auto r = eval_per_corruption(read_class, corpus);
    CHECK(r.corruptions.size() == 11);
    for (auto c : r.corruptions)
        for (int s = 1; s <= 5; ++s) CHECK(r.cell(c, s) == 0.0);
    CHECK(r.mce == 0.0);
    CHECK(r.clean_accuracy == 1.0);
    CHECK(r.corrupted_accuracy == 1.0);
    CHECK(r.clean_count == 50);
    CHECK(r.corrupted_count == 550);
    CHECK(aggregates_consistent(r));
}

TEST_CASE("a constant classifier errs on nine classes in ten") {
    const auto labels = all_labels();
    const auto corpus = coded_corpus(labels, 10);
    const BatchClassifier zero = [](std::span<const Image> imgs) { return std::vector<int>(imgs.size(), 0); };
    const auto r = eval_per_corruption(zero, corpus);
    for (auto c : r.corruptions) {
        for (int s = 1; s <= 5; ++s) CHECK(r.cell(c, s) == doctest::Approx(0.9));
        CHECK(r.uce.at(code(c)) == doctest::Approx(4.5));
    }
    CHECK(r.mce == doctest::Approx(4.5));
    CHECK(r.combined_accuracy == doctest::Approx(0.1));
}

TEST_CASE("missing cells are named") {
    const std::vector<CorruptionLabel> some{CorruptionLabel::natural, CorruptionLabel::fog};
    const auto corpus = coded_corpus(some, 2);
    const std::vector<CorruptionLabel> want{CorruptionLabel::fog, CorruptionLabel::pixelate};
    try {
        eval_per_corruption(read_class, corpus, want);
        FAIL("no error");
    } catch (const HarnessError& e) {
        CHECK(std::string(e.what()).find("pixelate") != std::string::npos);
    }
    CHECK_NOTHROW(eval_per_corruption(read_class, corpus, std::span(want).first(1)));
}

TEST_CASE("report tsv roundtrips and aggregates recompute") {
    const auto labels = all_labels();
    const auto corpus = coded_corpus(labels, 10);
    Rng rng(2);
    const BatchClassifier noisy = [&](std::span<const Image> imgs) {
        auto y = read_class(imgs);
        for (auto& v : y)
            if (uniform(rng, 0, 1) < 0.3) v = (v + 1) % 10;
        return y;
    };
    const auto r = eval_per_corruption(noisy, corpus);
    std::stringstream ss;
    write_report_tsv(ss, r);
    CHECK(ss.str().rfind("section\tcorruption\tseverity\tvalue\n", 0) == 0);
    const auto back = read_report_tsv(ss);
    CHECK(back.error == r.error);
    CHECK(back.uce == r.uce);
    CHECK(back.mce == r.mce);
    CHECK(aggregates_consistent(back));
    auto broken = back;
    broken.mce += 1e-9;
    CHECK_FALSE(aggregates_consistent(broken));
}

TEST_CASE("gain matrix of an untrained model") {
    const BaseCnn base(std::make_shared<BaseCnnParams>(BaseCnnParams::init(2)), [] {
        BnStats s;
        for (int w : kBnWidths)
            s.layers.push_back({std::vector<float>(static_cast<std::size_t>(w), 0.0f),
                                std::vector<float>(static_cast<std::size_t>(w), 1.0f)});
        return s;
    }());
    const Dataset d = gen_synthetic(40, 3);
    const std::vector<CorruptionLabel> labels{CorruptionLabel::natural, CorruptionLabel::gaussian_noise,
                                              CorruptionLabel::shot_noise, CorruptionLabel::fog};
    const auto corpus = build_corrupted_dataset(d.images, d.labels, labels, kAllSeverities, 4, 5);
    const BnTable table = build_bn_table(base, corpus, labels);
    const GainMatrix g = gain_matrix(base, table, corpus, labels);
    REQUIRE(g.gain.size() == 4);
    for (double v : g.gain[0]) CHECK(v == 0.0);
    for (const auto& row : g.gain)
        for (double v : row) CHECK(std::abs(v) <= 1.0);
    // hand recomputation of one cell
    std::vector<Image> imgs;
    std::vector<int> ys;
    for (auto i : corpus.indices_of(CorruptionLabel::fog)) {
        imgs.push_back(corpus.records[i].image);
        ys.push_back(corpus.records[i].class_label);
    }
    const double expect = accuracy(apply_bn(base, table.at(CorruptionLabel::shot_noise)), imgs, ys) -
                          accuracy(apply_bn(base, table.at(CorruptionLabel::natural)), imgs, ys);
    CHECK(g.gain[2][3] == doctest::Approx(expect).epsilon(1e-12));
    CHECK(g.intra_noise_mean() == doctest::Approx((g.gain[1][2] + g.gain[2][1]) / 2));
    CHECK(g.diagonal_mean() == doctest::Approx((g.gain[1][1] + g.gain[2][2] + g.gain[3][3]) / 3));

    BnTable partial = table;
    partial.entries.erase(CorruptionLabel::fog);
    CHECK_THROWS_AS(gain_matrix(base, partial, corpus, labels), HarnessError);
}

TEST_CASE("stream schedule: shape, segments and K-invariant batches") {
    const Dataset d = gen_synthetic(60, 4);
    const auto labels = all_labels();
    const auto corpus = build_corrupted_dataset(d.images, d.labels, labels, kAllSeverities, 2, 6);
    const auto corrs = all_corruptions();
    StreamConfig cfg;
    cfg.seed = 3;
    std::multiset<std::pair<int, std::vector<std::size_t>>> ref;
    for (int k : cfg.periods) {
        const auto sched = stream_schedule(cfg, k, corpus, corrs);
        REQUIRE(sched.size() == 352);
        std::multiset<std::pair<int, std::vector<std::size_t>>> seen;
        std::map<int, int> per_label;
        for (std::size_t b = 0; b < sched.size(); ++b) {
            CHECK(sched[b].records.size() == 16);
            if (b % static_cast<std::size_t>(k) != 0) CHECK(sched[b].corruption == sched[b - 1].corruption);
            for (auto r : sched[b].records) REQUIRE(corpus.records[r].corruption == sched[b].corruption);
            seen.insert({code(sched[b].corruption), sched[b].records});
            ++per_label[code(sched[b].corruption)];
        }
        // 352 = 11 · 32, so every K sees each corruption 32 times
        for (auto c : corrs) CHECK(per_label[code(c)] == 32);
        if (ref.empty())
            ref = seen;
        else
            CHECK(seen == ref);
    }
    CHECK(stream_schedule(cfg, 4, corpus, corrs)[5].records == stream_schedule(cfg, 4, corpus, corrs)[5].records);
    StreamConfig bad = cfg;
    bad.window = 0;
    CHECK_THROWS(bad.validate());
}

TEST_CASE("cli rejects bad invocations with exit code 2") {
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("no-such-command") == 2);
    CHECK(run_cli("train-base --epochs nope") == 2);
    CHECK(run_cli("stream --window nope") == 2);
    const auto dir = std::filesystem::temp_directory_path() / "bnad_cli_missing";
    std::filesystem::remove_all(dir);
    CHECK(run_cli("eval --data " + (dir / "data").string()) != 0);
}

}  // TEST_SUITE
