// End-to-end acceptance run. One PASS/FAIL line per criterion; tolerances
// are fixed below. Exit status is nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "bnad/basemodel.hpp"
#include "bnad/container.hpp"
#include "bnad/dataio.hpp"
#include "bnad/detector.hpp"
#include "bnad/experiment.hpp"
#include "bnad/fft.hpp"
#include "bnad/harness.hpp"
#include "bnad/layers.hpp"
#include "bnad/persist.hpp"
#include "bnad/pipeline.hpp"
#include "bnad/random.hpp"

using namespace bnad;
using namespace bnad::nn;
namespace fs = std::filesystem;

namespace {

// ---- pinned tolerances -----------------------------------------------------
constexpr double kFftTol = 1e-4;
constexpr double kFftSeconds = 1.0;
constexpr double kGradTol = 1e-3;
constexpr double kGradSeconds = 10.0;
constexpr double kSwapSeconds = 1.0;
constexpr double kDetectorMinAcc = 0.45;
constexpr double kPixelGap = 0.15;
constexpr double kDetectorSeconds = 600.0;
constexpr double kNoiseContainment = 0.5;
constexpr double kMatchedGain = 0.03;
constexpr int kMatchedGainCount = 7;
constexpr double kPipelineGain = 0.03;
constexpr double kCleanDrop = 0.02;
constexpr double kAdaptSeconds = 900.0;
constexpr double kStreamSpread = 0.02;
constexpr double kOnlineGap = 0.05;
constexpr double kOnlineVsAdaptive = 0.03;
constexpr double kStreamSeconds = 600.0;

constexpr std::uint64_t kSeed = 0;
constexpr std::size_t kImages = 6000;

struct Clock {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); }
};

int g_failures = 0;

void report(int n, bool pass, const std::string& detail) {
    std::printf("criterion %d: %s  %s\n", n, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// ---- 1: fft oracle ----------------------------------------------------------

double fft_vs_dft(int n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<float> f(static_cast<std::size_t>(n * n));
    for (auto& v : f) v = static_cast<float>(uniform(rng, -1.0, 1.0));
    const ComplexGrid fast = fft2(f, n, n);
    double err = 0.0;
    for (int u = 0; u < n; ++u)
        for (int v = 0; v < n; ++v) {
            std::complex<double> acc = 0.0;
            for (int x = 0; x < n; ++x)
                for (int y = 0; y < n; ++y)
                    acc += static_cast<double>(f[static_cast<std::size_t>(x * n + y)]) *
                           std::polar(1.0, -2.0 * std::numbers::pi * (u * x + v * y) / n);
            err = std::max(err, std::abs(acc - fast.at(u, v)));
        }
    return err;
}

void criterion1() {
    Clock c;
    double err = 0.0;
    for (std::uint64_t s = 0; s < 5; ++s) err = std::max({err, fft_vs_dft(8, s), fft_vs_dft(16, 100 + s)});
    const double t = c.seconds();
    report(1, err < kFftTol && t < kFftSeconds, fmt("max|fft2-dft| %.2e (< %.0e), %.3fs", err, kFftTol, t));
}

// ---- 2: gradient checks ------------------------------------------------------

Tensor64 random64(std::vector<int> shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    Rng rng(seed);
    Tensor64 t(std::move(shape));
    for (auto& x : t.data) x = uniform(rng, lo, hi);
    return t;
}

double dot(const Tensor64& a, const Tensor64& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

double fd_error(std::vector<double>& params, const std::vector<double>& analytic, const std::function<double()>& loss) {
    constexpr double h = 1e-4;
    double num = 0.0, den_a = 0.0, den_n = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double keep = params[i];
        params[i] = keep + h;
        const double lp = loss();
        params[i] = keep - h;
        const double lm = loss();
        params[i] = keep;
        const double g = (lp - lm) / (2 * h);
        num += (g - analytic[i]) * (g - analytic[i]);
        den_a += analytic[i] * analytic[i];
        den_n += g * g;
    }
    return std::sqrt(num) / std::max(std::sqrt(den_a) + std::sqrt(den_n), 1e-12);
}

void criterion2() {
    Clock c;
    std::vector<std::pair<std::string, double>> errs;
    {
        Tensor64 x = random64({3, 5}, 10), w = random64({4, 5}, 11), b = random64({4}, 12);
        const Tensor64 r = random64({3, 4}, 13);
        auto loss = [&] { return dot(dense_forward(x, w, b), r); };
        const auto g = dense_backward(x, w, r);
        errs.push_back({"dense", std::max({fd_error(x.data, g.input.data, loss), fd_error(w.data, g.weight.data, loss),
                                           fd_error(b.data, g.bias.data, loss)})});
    }
    {
        Tensor64 x = random64({2, 3, 6, 6}, 20), k = random64({4, 3, 3, 3}, 21), b = random64({4}, 22);
        const ConvGeometry geom{1, 1};
        const Tensor64 r = random64(conv2d_forward(x, k, b, geom).shape, 23);
        auto loss = [&] { return dot(conv2d_forward(x, k, b, geom), r); };
        const auto g = conv2d_backward(x, k, r, geom, true);
        errs.push_back({"conv", std::max({fd_error(x.data, g.input.data, loss), fd_error(k.data, g.kernel.data, loss),
                                          fd_error(b.data, g.bias.data, loss)})});
    }
    {
        Tensor64 x = random64({4, 3, 3, 3}, 30, -1.0, 2.0);
        BasicBnState<double> st = BasicBnState<double>::identity(3);
        st.gamma = {0.7, 1.3, -0.4};
        st.beta = {0.1, -0.2, 0.3};
        const Tensor64 r = random64(x.shape, 31);
        auto loss = [&] { return dot(batchnorm_forward(x, st, BnMode::train).output, r); };
        const auto g = batchnorm_backward(batchnorm_forward(x, st, BnMode::train), std::span<const double>(st.gamma), r);
        errs.push_back({"bn-train", std::max({fd_error(x.data, g.input.data, loss), fd_error(st.gamma, g.gamma, loss),
                                              fd_error(st.beta, g.beta, loss)})});
    }
    {
        Tensor64 x = random64({3, 7}, 40);
        for (double& v : x.data)
            if (std::abs(v) < 0.05) v = 0.3;
        const Tensor64 r = random64(x.shape, 41);
        auto loss = [&] { return dot(relu_forward(x), r); };
        errs.push_back({"relu", fd_error(x.data, relu_backward(x, r).data, loss)});
    }
    {
        Tensor64 z = random64({4, 6}, 60, -3.0, 3.0);
        const std::vector<int> y{0, 5, 2, 2};
        auto loss = [&] { return softmax_xent(z, y).loss; };
        errs.push_back({"softmax-xent", fd_error(z.data, softmax_xent(z, y).grad.data, loss)});
    }
    const double t = c.seconds();
    bool ok = t < kGradSeconds;
    std::string detail;
    for (const auto& [name, e] : errs) {
        ok = ok && e < kGradTol;
        detail += fmt("%s %.1e  ", name.c_str(), e);
    }
    report(2, ok, detail + fmt("(< %.0e), %.3fs", kGradTol, t));
}

// ---- 3: BN swap exactness -----------------------------------------------------

BnStats filled(float mean, float var) {
    BnStats s;
    for (int w : kBnWidths)
        s.layers.push_back({std::vector<float>(static_cast<std::size_t>(w), mean),
                            std::vector<float>(static_cast<std::size_t>(w), var)});
    return s;
}

bool all_equal(const BnStats& s, float mean, float var) {
    for (const auto& l : s.layers) {
        for (float v : l.mean)
            if (v != mean) return false;
        for (float v : l.var)
            if (v != var) return false;
    }
    return true;
}

void criterion3(const BaseCnn& base, const BnTable& table, std::span<const Image> imgs) {
    Clock c;
    bool exact = true;
    for (const auto& [label, stats] : table.entries) {
        const BaseCnn view = apply_bn(base, stats);
        const BaseCnn direct(std::make_shared<BaseCnnParams>(base.params()), stats);
        exact = exact && view.logits(imgs).data == direct.logits(imgs).data;
    }
    const BnStats a = filled(1.0f, 2.0f), b = filled(3.0f, 6.0f);
    const bool merges = all_equal(merge_bn(a, b), 2.0f, 4.0f) && all_equal(merge_bn(a, b, 3.0, 1.0), 1.5f, 3.0f) &&
                        merge_bn(a, b, 1.0, 0.0) == a && merge_bn(a, a) == a;
    const double t = c.seconds();
    report(3, exact && merges && t < kSwapSeconds,
           fmt("12 views bit-exact: %s, merge hand cases: %s, %.3fs", exact ? "yes" : "no", merges ? "yes" : "no", t));
}

// ---- 9: formats ----------------------------------------------------------------

void criterion9(const BaseCnn& base) {
    Clock c;
    bool ok = true;
    std::string why;
    auto expect = [&](bool cond, const char* what) {
        if (!cond && ok) why = what;
        ok = ok && cond;
    };

    Rng rng(9);
    std::vector<std::uint8_t> bytes(50 * kCifarRecordBytes);
    for (std::size_t i = 0; i < bytes.size(); ++i)
        bytes[i] = static_cast<std::uint8_t>(i % kCifarRecordBytes == 0 ? uniform_int(rng, 0, 9) : uniform_int(rng, 0, 255));
    expect(serialize_cifar10_bin(parse_cifar10_bin(bytes)) == bytes, "cifar roundtrip");
    auto bad = bytes;
    bad[7 * kCifarRecordBytes] = 11;
    try {
        parse_cifar10_bin(bad);
        expect(false, "bad label accepted");
    } catch (const CifarParseError& e) {
        expect(e.record_index() == 7, "bad label index");
    }
    for (std::size_t cut = 1; cut < 2 * kCifarRecordBytes; cut += 97) {
        try {
            parse_cifar10_bin(std::span<const std::uint8_t>(bytes.data(), cut));
            expect(cut % kCifarRecordBytes == 0, "truncated cifar accepted");
        } catch (const CifarParseError&) {
        }
    }

    const auto enc = encode_container(to_container(base));
    const BaseCnn back = base_cnn_from(decode_container(enc, ArtifactKind::base_cnn));
    expect(back.params() == base.params() && back.stats() == base.stats(), "container roundtrip");
    expect(encode_container(to_container(back)) == enc, "re-encode");

    int crc_caught = 0, crc_tried = 0;
    for (std::size_t pos = 12; pos + 4 < enc.size(); pos += 131) {
        auto flipped = enc;
        flipped[pos] ^= 0x01;
        ++crc_tried;
        try {
            decode_container(flipped);
        } catch (const FormatError& e) {
            crc_caught += e.kind() == FormatErrorKind::crc_mismatch;
        }
    }
    expect(crc_caught == crc_tried, "crc flip missed");

    int truncations = 0;
    for (std::size_t cut = 0; cut < enc.size(); cut += 1 + cut / 8) {
        ++truncations;
        try {
            decode_container(std::span<const std::uint8_t>(enc.data(), cut));
            expect(false, "truncation accepted");
        } catch (const FormatError&) {
        }
    }
    for (int t = 0; t < 500; ++t) {
        auto junk = enc;
        for (int f = 0; f < 4; ++f)
            junk[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(junk.size()) - 1))] =
                static_cast<std::uint8_t>(uniform_int(rng, 0, 255));
        junk.resize(static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(junk.size()))));
        try {
            decode_container(junk);
        } catch (const FormatError&) {
        }
    }
    report(9, ok,
           fmt("cifar + container roundtrips, %d/%d crc flips caught, %d truncations rejected, 500 fuzz cases%s%s, %.2fs",
               crc_caught, crc_tried, truncations, ok ? "" : ", failed: ", why.c_str(), c.seconds()));
}

// ---- 10: determinism -------------------------------------------------------------

std::vector<char> slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

bool cli_pipeline(const fs::path& dir) {
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string cli = BNAD_CLI_PATH;
    const std::string d = (dir / "data").string();
    auto at = [&](const char* f) { return (dir / f).string(); };
    const std::vector<std::string> steps{
        "gen-data --n 1800 --seed 7 --out " + d,
        "train-base --seed 7 --epochs 2 --data " + d + " --out " + at("base.bnad"),
        "eps --seed 7 --data " + d + " --out " + at("eps.bnad"),
        "train-detector --seed 7 --epochs 2 --data " + d + " --eps " + at("eps.bnad") + " --out " + at("detector.bnad"),
        "collect-bn --seed 7 --data " + d + " --base " + at("base.bnad") + " --out " + at("table.bnad"),
        "eval --seed 7 --data " + d + " --base " + at("base.bnad") + " --table " + at("table.bnad") + " --detector " +
            at("detector.bnad") + " --report " + at("report.tsv"),
    };
    for (const auto& s : steps) {
        const std::string cmd = cli + " " + s + " > " + at("log.txt") + " 2>&1";
        if (std::system(cmd.c_str()) != 0) {
            std::printf("  step failed: %s\n", s.c_str());
            return false;
        }
    }
    return true;
}

void criterion10() {
    Clock c;
    const fs::path a = "determinism_a", b = "determinism_b";
    const bool ran = cli_pipeline(a) && cli_pipeline(b);
    const std::vector<std::string> files{"data/train.bin", "data/test.bin", "base.bnad", "eps.bnad",
                                         "detector.bnad",  "table.bnad",    "report.tsv"};
    int same = 0;
    for (const auto& f : files) {
        const auto x = slurp(a / f), y = slurp(b / f);
        if (!x.empty() && x == y) ++same;
        else std::printf("  differs or missing: %s\n", f.c_str());
    }
    report(10, ran && same == static_cast<int>(files.size()),
           fmt("%d/%zu artifacts bit-identical across two CLI runs, %.1fs", same, files.size(), c.seconds()));
}

// ---- 4-8: trained pipeline ------------------------------------------------------

std::vector<Image> images_of(const CorruptedCorpus& corpus, std::span<const std::size_t> idx, std::vector<int>* ys) {
    std::vector<Image> out;
    for (auto i : idx) {
        out.push_back(corpus.records[i].image);
        if (ys) ys->push_back(corpus.records[i].class_label);
    }
    return out;
}

}  // namespace

int main() {
    std::printf("acceptance run, seed %llu\n", static_cast<unsigned long long>(kSeed));
    criterion1();
    criterion2();

    const fs::path out = "acceptance_out";
    fs::create_directories(out);

    Clock adapt_clock;
    const DataSplits d = split_dataset(gen_synthetic(kImages, kSeed));
    BaseTrainConfig bcfg;
    bcfg.seed = seed_for(kSeed, SeedTag::base);
    const BaseCnn base = train_base(d.train, bcfg, [](const BaseEpochLog& l) {
        std::printf("  base epoch %d  loss %.4f  train acc %.4f\n", l.epoch, l.mean_loss, l.train_acc);
        std::fflush(stdout);
    });
    const double base_seconds = adapt_clock.seconds();
    const CorruptedCorpus adapt = adapt_corpus(d, kSeed), eval = eval_corpus(d, kSeed);
    const auto corruptions = all_corruptions();
    Clock table_clock;
    const BnTable table = build_bn_table(base, adapt, corruptions);
    const double table_seconds = table_clock.seconds();
    std::printf("  base trained in %.1fs, table built in %.1fs\n", base_seconds, table_seconds);

    criterion3(base, table, std::span<const Image>(d.eval.images).first(64));

    // 4 + 5: detectors
    Clock det_clock;
    const NaturalSpectrum eps = natural_spectrum(d);
    TrainSchedule sched;
    sched.seed = seed_for(kSeed, SeedTag::detector_order);
    const auto spec_train = spectrum_features(adapt, eps), spec_val = spectrum_features(eval, eps);
    const auto det = train_detector(init_detector(feature_length(32, 32), kNumLabels, seed_for(kSeed, SeedTag::detector_init)),
                                    spec_train, sched);
    const auto det_eval = evaluate(det.model, spec_val);
    const double spec_seconds = det_clock.seconds();
    const auto pix_train = pixel_features(adapt), pix_val = pixel_features(eval);
    const auto pix = train_detector(init_detector(1024, kNumLabels, seed_for(kSeed, SeedTag::detector_init)), pix_train, sched);
    const double pix_acc = evaluate(pix.model, pix_val).accuracy;
    const double det_seconds = det_clock.seconds();
    save_detector(out / "detector.bnad", det.model, &eps);
    report(4,
           det_eval.accuracy >= kDetectorMinAcc && det_eval.accuracy - pix_acc >= kPixelGap &&
               det_seconds <= kDetectorSeconds,
           fmt("spectrum detector %.4f (>= %.2f), raw-pixel control %.4f (gap %.4f >= %.2f), %.0fs + %.0fs", det_eval.accuracy,
               kDetectorMinAcc, pix_acc, det_eval.accuracy - pix_acc, kPixelGap, spec_seconds, det_seconds - spec_seconds));

    {
        long errors = 0, contained = 0;
        auto is_noise = [](int c) { return family_of(label_from_code(c)) == CorruptionFamily::noise; };
        for (int t = 0; t < kNumLabels; ++t) {
            if (!is_noise(t)) continue;
            for (int p = 0; p < kNumLabels; ++p) {
                if (p == t) continue;
                errors += det_eval.confusion.at(t, p);
                if (is_noise(p)) contained += det_eval.confusion.at(t, p);
            }
        }
        const double frac = errors ? static_cast<double>(contained) / static_cast<double>(errors) : 1.0;
        report(5, frac >= kNoiseContainment,
               fmt("%ld of %ld noise-input errors stay in the noise family (%.3f >= %.2f)", contained, errors, frac,
                   kNoiseContainment));
    }

    // 6: adaptation gain
    Clock eval_clock;
    int matched = 0;
    std::string gains;
    for (auto c : corruptions) {
        std::vector<int> ys;
        const auto imgs = images_of(eval, eval.indices_of(c), &ys);
        const double g = accuracy(apply_bn(base, table.at(c)), imgs, ys) - accuracy(base, imgs, ys);
        matched += g >= kMatchedGain;
        gains += fmt("%s %+.3f ", std::string(label_name(c)).c_str(), g);
    }
    std::printf("  matched-entry gains: %s\n", gains.c_str());
    const AdaptivePipeline pipeline(eps, std::make_shared<FcCorruptionDetector>(det.model), base, table);
    const auto base_report = eval_per_corruption(classifier_of(base), eval);
    const auto pipe_report = eval_per_corruption(classifier_of(pipeline, DetectionMode::per_image), eval);
    {
        std::ofstream f(out / "report_base.tsv");
        write_report_tsv(f, base_report);
        std::ofstream g(out / "report_pipeline.tsv");
        write_report_tsv(g, pipe_report);
    }
    const double adapt_seconds = base_seconds + table_seconds + eval_clock.seconds();
    const double corr_gain = pipe_report.corrupted_accuracy - base_report.corrupted_accuracy;
    const double clean_drop = base_report.clean_accuracy - pipe_report.clean_accuracy;
    report(6,
           matched >= kMatchedGainCount && corr_gain >= kPipelineGain && clean_drop <= kCleanDrop &&
               adapt_seconds <= kAdaptSeconds,
           fmt("%d/11 matched gains >= %.2f (need %d); corrupted %.4f -> %.4f (%+.4f, need %+.2f); clean %.4f -> %.4f "
               "(drop %.4f <= %.2f); mCE %.4f -> %.4f; %.0fs",
               matched, kMatchedGain, kMatchedGainCount, base_report.corrupted_accuracy, pipe_report.corrupted_accuracy,
               corr_gain, kPipelineGain, base_report.clean_accuracy, pipe_report.clean_accuracy, clean_drop, kCleanDrop,
               base_report.mce, pipe_report.mce, adapt_seconds));

    // 7: gain matrix
    {
        const auto labels = all_labels();
        const GainMatrix g = gain_matrix(base, table, eval, labels);
        std::ofstream f(out / "gain_matrix.tsv");
        write_gain_tsv(f, g);
        bool natural_zero = true;
        for (double v : g.gain[0]) natural_zero = natural_zero && v == 0.0;
        const double diag = g.diagonal_mean(), off = g.off_diagonal_mean(), noise = g.intra_noise_mean();
        report(7, natural_zero && diag > off && noise > 0.0,
               fmt("natural row zero: %s; diagonal %+.4f > off-diagonal %+.4f; intra-noise %+.4f > 0",
                   natural_zero ? "yes" : "no", diag, off, noise));
    }

    // 8: streaming
    {
        Clock sc;
        StreamConfig cfg;
        cfg.seed = seed_for(kSeed, SeedTag::stream);
        const StreamResult r = stream_eval(cfg, pipeline, eval, corruptions);
        std::ofstream f(out / "stream.tsv");
        write_stream_tsv(f, r);
        double lo = 1.0, hi = 0.0;
        std::string line;
        for (int k : cfg.periods) {
            const double a = r.accuracy(StreamPolicy::adaptive_lookup, k);
            lo = std::min(lo, a);
            hi = std::max(hi, a);
            line += fmt("K=%d static %.4f online %.4f adaptive %.4f | ", k, r.accuracy(StreamPolicy::static_natural, k),
                        r.accuracy(StreamPolicy::online_bn_window, k), a);
        }
        std::printf("  %s\n", line.c_str());
        const double on1 = r.accuracy(StreamPolicy::online_bn_window, 1);
        const double on32 = r.accuracy(StreamPolicy::online_bn_window, 32);
        const double ad32 = r.accuracy(StreamPolicy::adaptive_lookup, 32);
        const double t = sc.seconds();
        report(8,
               hi - lo < kStreamSpread && on32 - on1 >= kOnlineGap && std::abs(on32 - ad32) <= kOnlineVsAdaptive &&
                   t <= kStreamSeconds,
               fmt("adaptive spread %.4f (< %.2f); online K=1 %.4f vs K=32 %.4f (gap %.4f >= %.2f); online vs adaptive at "
                   "K=32 %.4f (<= %.2f); %.0fs",
                   hi - lo, kStreamSpread, on1, on32, on32 - on1, kOnlineGap, std::abs(on32 - ad32), kOnlineVsAdaptive, t));
    }

    criterion9(base);
    criterion10();

    std::printf("acceptance: %d/10 PASS\n", 10 - g_failures);
    return g_failures == 0 ? 0 : 1;
}
