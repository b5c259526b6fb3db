// bnad: command-line driver for data generation, training, BN collection
// and evaluation. Every run prints its resolved configuration first.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "bnad/basemodel.hpp"
#include "bnad/experiment.hpp"
#include "bnad/harness.hpp"
#include "bnad/persist.hpp"
#include "bnad/pipeline.hpp"

namespace fs = std::filesystem;
using namespace bnad;

namespace {

struct Common {
    std::uint64_t seed = 0;
    std::string data = "data/";
    std::string out;
};

void print_config(const std::string& cmd, const std::vector<std::pair<std::string, std::string>>& kv,
                  std::uint64_t seed) {
    std::cout << "[" << cmd << "] seed=" << seed << '\n';
    for (const auto& [k, v] : kv) std::cout << "  " << k << " = " << v << '\n';
    std::cout.flush();
}

template <typename T>
std::string str(const T& v) {
    std::ostringstream s;
    s << v;
    return s.str();
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    return f;
}

DetectionMode parse_mode(const std::string& m) {
    if (m == "per_image") return DetectionMode::per_image;
    if (m == "batch_majority") return DetectionMode::batch_majority;
    throw CLI::ValidationError("--mode", "expected per_image or batch_majority");
}

class Timer {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

AdaptivePipeline assemble(const std::string& base_path, const std::string& table_path,
                          const std::string& detector_path, const std::string& eps_path, DetectionMode mode) {
    std::optional<NaturalSpectrum> eps;
    DetectorModel det = load_detector(detector_path, &eps);
    if (!eps_path.empty()) eps = load_spectrum(eps_path);
    if (!eps) throw std::runtime_error(detector_path + " carries no ε_n; pass --eps");
    return AdaptivePipeline(*eps, std::make_shared<FcCorruptionDetector>(std::move(det)), load_base(base_path),
                            load_table(table_path), mode);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"BN-statistics swapping driven by a Fourier-spectrum corruption detector"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Expand all help");

    Common c;
    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Render the synthetic dataset (or import CIFAR-10 batches)");
    std::size_t gen_n = 6000;
    std::string cifar_dir;
    gen->add_option("--n", gen_n, "Number of images (5/6 train, 1/6 test)")->capture_default_str()->check(
        CLI::Range(std::size_t{12}, std::size_t{1} << 24));
    gen->add_option("--from-cifar", cifar_dir, "Directory with data_batch_*.bin and test_batch.bin");
    gen->add_option("--seed", c.seed, "Base random seed")->capture_default_str();
    std::string gen_out = "data/";
    gen->add_option("--out", gen_out, "Output directory")->capture_default_str();

    // corrupt
    auto* cor = app.add_subcommand("corrupt", "Build a corrupted corpus (12 labels × 5 severities)");
    std::string cor_split = "eval";
    std::size_t per_cell = kPerCell;
    std::string cor_out = "corpus.bnad";
    cor->add_option("--seed", c.seed)->capture_default_str();
    cor->add_option("--data", c.data)->capture_default_str();
    cor->add_option("--out", cor_out)->capture_default_str();
    cor->add_option("--split", cor_split, "adapt or eval pool")->check(CLI::IsMember({"adapt", "eval"}))->capture_default_str();
    cor->add_option("--per-cell", per_cell, "Images per (label, severity) cell")->capture_default_str();

    // eps
    auto* eps_cmd = app.add_subcommand("eps", "Average natural amplitude spectrum ε_n over the adapt pool");
    std::string eps_out = "eps.bnad";
    eps_cmd->add_option("--seed", c.seed)->capture_default_str();
    eps_cmd->add_option("--data", c.data)->capture_default_str();
    eps_cmd->add_option("--out", eps_out)->capture_default_str();

    // train-base
    auto* tb = app.add_subcommand("train-base", "Train the BN-bearing base classifier");
    BaseTrainConfig base_cfg;
    std::string tb_out = "base.bnad", tb_log;
    tb->add_option("--seed", c.seed)->capture_default_str();
    tb->add_option("--data", c.data)->capture_default_str();
    tb->add_option("--out", tb_out)->capture_default_str();
    tb->add_option("--epochs", base_cfg.epochs)->capture_default_str()->check(CLI::PositiveNumber);
    tb->add_option("--lr", base_cfg.lr)->capture_default_str()->check(CLI::PositiveNumber);
    tb->add_option("--batch", base_cfg.batch_size)->capture_default_str()->check(CLI::Range(2, 4096));
    tb->add_option("--log", tb_log, "Per-epoch TSV log");

    // train-detector
    auto* td = app.add_subcommand("train-detector", "Train the spectrum (or raw-pixel) corruption detector");
    TrainSchedule sched;
    std::string td_out = "detector.bnad", td_eps = "eps.bnad", td_features = "spectrum", td_log, td_confusion;
    td->add_option("--seed", c.seed)->capture_default_str();
    td->add_option("--data", c.data)->capture_default_str();
    td->add_option("--out", td_out)->capture_default_str();
    td->add_option("--eps", td_eps)->capture_default_str();
    td->add_option("--epochs", sched.epochs)->capture_default_str()->check(CLI::NonNegativeNumber);
    td->add_option("--features", td_features)->check(CLI::IsMember({"spectrum", "pixels"}))->capture_default_str();
    td->add_option("--log", td_log, "Per-epoch TSV log");
    td->add_option("--confusion", td_confusion, "Validation confusion matrix TSV");

    // collect-bn
    auto* cb = app.add_subcommand("collect-bn", "Estimate per-corruption BN stats and build the lookup table");
    std::string cb_base = "base.bnad", cb_out = "table.bnad";
    double nat_w = 1.0, cor_w = 1.0;
    cb->add_option("--seed", c.seed)->capture_default_str();
    cb->add_option("--data", c.data)->capture_default_str();
    cb->add_option("--out", cb_out)->capture_default_str();
    cb->add_option("--base", cb_base)->capture_default_str();
    cb->add_option("--natural-weight", nat_w, "N in the merge")->capture_default_str()->check(CLI::NonNegativeNumber);
    cb->add_option("--corrupted-weight", cor_w, "n in the merge")->capture_default_str()->check(CLI::NonNegativeNumber);

    // eval
    auto* ev = app.add_subcommand("eval", "Per-corruption error report (uCE / mCE)");
    std::string ev_base = "base.bnad", ev_table = "table.bnad", ev_det = "detector.bnad", ev_eps, ev_report = "report.tsv",
                ev_mode = "per_image", ev_route = "detector";
    ev->add_option("--seed", c.seed)->capture_default_str();
    ev->add_option("--data", c.data)->capture_default_str();
    ev->add_option("--base", ev_base)->capture_default_str();
    ev->add_option("--table", ev_table)->capture_default_str();
    ev->add_option("--detector", ev_det)->capture_default_str();
    ev->add_option("--eps", ev_eps, "Override the ε_n embedded in the detector");
    ev->add_option("--report", ev_report)->capture_default_str();
    ev->add_option("--mode", ev_mode)->check(CLI::IsMember({"per_image", "batch_majority"}))->capture_default_str();
    ev->add_option("--route", ev_route, "detector, oracle (true labels) or none (plain base model)")
        ->check(CLI::IsMember({"detector", "oracle", "none"}))
        ->capture_default_str();

    // gain-matrix
    auto* gm = app.add_subcommand("gain-matrix", "Accuracy gain of every table entry on every corruption");
    std::string gm_base = "base.bnad", gm_table = "table.bnad", gm_out = "gain.tsv";
    gm->add_option("--seed", c.seed)->capture_default_str();
    gm->add_option("--data", c.data)->capture_default_str();
    gm->add_option("--out", gm_out)->capture_default_str();
    gm->add_option("--base", gm_base)->capture_default_str();
    gm->add_option("--table", gm_table)->capture_default_str();

    // stream
    auto* st = app.add_subcommand("stream", "Streaming comparison of adaptation policies across switch periods");
    StreamConfig scfg;
    std::string st_base = "base.bnad", st_table = "table.bnad", st_det = "detector.bnad", st_eps, st_out = "stream.tsv",
                st_mode = "per_image";
    st->add_option("--seed", c.seed)->capture_default_str();
    st->add_option("--data", c.data)->capture_default_str();
    st->add_option("--out", st_out)->capture_default_str();
    st->add_option("--base", st_base)->capture_default_str();
    st->add_option("--table", st_table)->capture_default_str();
    st->add_option("--detector", st_det)->capture_default_str();
    st->add_option("--eps", st_eps);
    st->add_option("--periods", scfg.periods, "Switch periods K")->delimiter(',')->capture_default_str();
    st->add_option("--batches", scfg.total_batches)->capture_default_str()->check(CLI::PositiveNumber);
    st->add_option("--batch-size", scfg.batch_size)->capture_default_str()->check(CLI::PositiveNumber);
    st->add_option("--window", scfg.window)->capture_default_str()->check(CLI::PositiveNumber);
    st->add_option("--blend", scfg.natural_blend, "Natural-stats weight in the online estimate")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 0.999));
    st->add_option("--mode", st_mode)->check(CLI::IsMember({"per_image", "batch_majority"}))->capture_default_str();

    // export-spectra
    auto* ex = app.add_subcommand("export-spectra", "Mean normalized spectrum per label as PGM images");
    std::string ex_eps = "eps.bnad", ex_out = "spectra/";
    bool no_clamp = false;
    ex->add_option("--seed", c.seed)->capture_default_str();
    ex->add_option("--data", c.data)->capture_default_str();
    ex->add_option("--out", ex_out)->capture_default_str();
    ex->add_option("--eps", ex_eps)->capture_default_str();
    ex->add_flag("--no-clamp", no_clamp, "Keep values above one");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        Timer timer;
        if (gen->parsed()) {
            print_config("gen-data", {{"n", str(gen_n)}, {"out", gen_out}, {"from-cifar", cifar_dir}}, c.seed);
            if (!cifar_dir.empty()) {
                std::vector<fs::path> batches;
                for (int i = 1; i <= 5; ++i) batches.push_back(fs::path(cifar_dir) / ("data_batch_" + std::to_string(i) + ".bin"));
                const Dataset train = load_cifar10_files(batches, "train");
                const Dataset test = load_cifar10_file(fs::path(cifar_dir) / "test_batch.bin", "test");
                save_cifar10_file(train, fs::path(gen_out) / "train.bin");
                save_cifar10_file(test, fs::path(gen_out) / "test.bin");
                std::cout << "imported " << train.size() << " train / " << test.size() << " test images\n";
            } else {
                write_data_dir(gen_out, gen_synthetic(gen_n, c.seed));
                std::cout << "wrote " << gen_n << " images to " << gen_out << '\n';
            }
        } else if (cor->parsed()) {
            print_config("corrupt", {{"data", c.data}, {"split", cor_split}, {"per-cell", str(per_cell)}, {"out", cor_out}},
                         c.seed);
            const auto d = load_data_dir(c.data);
            const auto corpus = cor_split == "adapt" ? adapt_corpus(d, c.seed, per_cell) : eval_corpus(d, c.seed, per_cell);
            save_corpus(cor_out, corpus);
            std::cout << "wrote " << corpus.size() << " records\n";
        } else if (eps_cmd->parsed()) {
            print_config("eps", {{"data", c.data}, {"out", eps_out}}, c.seed);
            const auto eps = natural_spectrum(load_data_dir(c.data));
            save_spectrum(eps_out, eps);
            std::cout << "ε_n from " << eps.count << " images, " << eps.grid.height << "x" << eps.grid.width << '\n';
        } else if (tb->parsed()) {
            base_cfg.seed = seed_for(c.seed, SeedTag::base);
            print_config("train-base",
                         {{"data", c.data}, {"epochs", str(base_cfg.epochs)}, {"lr", str(base_cfg.lr)},
                          {"batch", str(base_cfg.batch_size)}, {"momentum", str(base_cfg.momentum)},
                          {"weight_decay", str(base_cfg.weight_decay)}, {"out", tb_out}},
                         c.seed);
            const auto d = load_data_dir(c.data);
            std::ostringstream log;
            log << "epoch\tlr\tloss\ttrain_acc\n";
            const BaseCnn model = train_base(d.train, base_cfg, [&](const BaseEpochLog& l) {
                std::printf("epoch %2d  lr %.5f  loss %.4f  acc %.4f  (%.0fs)\n", l.epoch, l.lr, l.mean_loss,
                            l.train_acc, timer.seconds());
                std::fflush(stdout);
                log << l.epoch << '\t' << l.lr << '\t' << l.mean_loss << '\t' << l.train_acc << '\n';
            });
            save_base(tb_out, model);
            if (!tb_log.empty()) open_out(tb_log) << log.str();
            std::printf("clean accuracy: train-pool eval %.4f\n", accuracy(model, d.eval.images, d.eval.labels));
        } else if (td->parsed()) {
            sched.seed = seed_for(c.seed, SeedTag::detector_order);
            print_config("train-detector",
                         {{"data", c.data}, {"eps", td_eps}, {"features", td_features}, {"epochs", str(sched.epochs)},
                          {"lr", str(sched.base_lr)}, {"batch", str(sched.batch_size)}, {"out", td_out}},
                         c.seed);
            const auto d = load_data_dir(c.data);
            const NaturalSpectrum eps = load_spectrum(td_eps);
            const auto train_c = adapt_corpus(d, c.seed), val_c = eval_corpus(d, c.seed);
            const bool spec = td_features == "spectrum";
            const auto train = spec ? spectrum_features(train_c, eps) : pixel_features(train_c);
            const auto val = spec ? spectrum_features(val_c, eps) : pixel_features(val_c);
            DetectorModel init = init_detector(static_cast<int>(train.features[0].size()), kNumLabels,
                                               seed_for(c.seed, SeedTag::detector_init));
            std::cout << "parameters: " << init.parameter_count() << ", training samples: " << train.size() << '\n';
            auto trained = train_detector(std::move(init), train, sched, [&](const EpochLog& l) {
                std::printf("epoch %2d  lr %.5f  loss %.4f  acc %.4f  (%.0fs)\n", l.epoch, l.lr, l.mean_loss,
                            l.train_acc, timer.seconds());
                std::fflush(stdout);
            });
            const auto e = evaluate(trained.model, val);
            std::printf("validation accuracy: %.4f\n", e.accuracy);
            save_detector(td_out, trained.model, spec ? &eps : nullptr);
            if (!td_log.empty()) {
                auto f = open_out(td_log);
                write_training_log(f, trained.history);
            }
            if (!td_confusion.empty()) {
                auto f = open_out(td_confusion);
                f << "truth\\predicted";
                for (auto l : all_labels()) f << '\t' << label_name(l);
                f << '\n';
                for (auto t : all_labels()) {
                    f << label_name(t);
                    for (auto p : all_labels()) f << '\t' << e.confusion.at(code(t), code(p));
                    f << '\n';
                }
            }
        } else if (cb->parsed()) {
            print_config("collect-bn",
                         {{"data", c.data}, {"base", cb_base}, {"natural-weight", str(nat_w)},
                          {"corrupted-weight", str(cor_w)}, {"out", cb_out}},
                         c.seed);
            if (!(nat_w + cor_w > 0.0)) throw CLI::ValidationError("merge weights", "must not both be zero");
            const BaseCnn base = load_base(cb_base);
            const auto corpus = adapt_corpus(load_data_dir(c.data), c.seed);
            const auto labels = all_corruptions();
            const BnTable table = build_bn_table(base, corpus, labels, nat_w, cor_w);
            save_table(cb_out, table);
            std::cout << "table entries: " << table.size() << '\n';
        } else if (ev->parsed()) {
            print_config("eval",
                         {{"data", c.data}, {"base", ev_base}, {"table", ev_table}, {"detector", ev_det},
                          {"eps", ev_eps}, {"mode", ev_mode}, {"route", ev_route}, {"report", ev_report}},
                         c.seed);
            const auto corpus = eval_corpus(load_data_dir(c.data), c.seed);
            CorruptionErrorReport report;
            if (ev_route == "none") {
                const BaseCnn base = load_base(ev_base);
                report = eval_per_corruption(classifier_of(base), corpus);
            } else {
                const AdaptivePipeline p = assemble(ev_base, ev_table, ev_det, ev_eps, parse_mode(ev_mode));
                if (ev_route == "oracle") {
                    // the harness hands over copies, so the oracle keys on content
                    std::map<std::vector<float>, CorruptionLabel> by_pixels;
                    for (const auto& r : corpus.records) by_pixels.emplace(r.image.data, r.corruption);
                    report = eval_per_corruption(
                        [&](std::span<const Image> imgs) {
                            std::vector<CorruptionLabel> labels;
                            for (const auto& img : imgs) labels.push_back(by_pixels.at(img.data));
                            return p.infer_with_labels(imgs, labels);
                        },
                        corpus);
                } else {
                    report = eval_per_corruption(classifier_of(p, parse_mode(ev_mode)), corpus);
                }
            }
            auto f = open_out(ev_report);
            write_report_tsv(f, report);
            std::printf("mCE %.4f  clean %.4f  corrupted %.4f  combined %.4f\n", report.mce, report.clean_accuracy,
                        report.corrupted_accuracy, report.combined_accuracy);
        } else if (gm->parsed()) {
            print_config("gain-matrix", {{"data", c.data}, {"base", gm_base}, {"table", gm_table}, {"out", gm_out}},
                         c.seed);
            const BaseCnn base = load_base(gm_base);
            const BnTable table = load_table(gm_table);
            const auto corpus = eval_corpus(load_data_dir(c.data), c.seed);
            const auto labels = all_labels();
            const GainMatrix g = gain_matrix(base, table, corpus, labels);
            auto f = open_out(gm_out);
            write_gain_tsv(f, g);
            std::printf("diagonal mean %+.4f  off-diagonal mean %+.4f  intra-noise mean %+.4f\n", g.diagonal_mean(),
                        g.off_diagonal_mean(), g.intra_noise_mean());
        } else if (st->parsed()) {
            scfg.seed = seed_for(c.seed, SeedTag::stream);
            scfg.detection = parse_mode(st_mode);
            std::string periods;
            for (int k : scfg.periods) periods += (periods.empty() ? "" : ",") + std::to_string(k);
            print_config("stream",
                         {{"data", c.data}, {"periods", periods}, {"batches", str(scfg.total_batches)},
                          {"batch-size", str(scfg.batch_size)}, {"window", str(scfg.window)},
                          {"blend", str(scfg.natural_blend)}, {"mode", st_mode}, {"out", st_out}},
                         c.seed);
            const AdaptivePipeline p = assemble(st_base, st_table, st_det, st_eps, scfg.detection);
            const auto corpus = eval_corpus(load_data_dir(c.data), c.seed);
            const auto labels = all_corruptions();
            const StreamResult r = stream_eval(scfg, p, corpus, labels);
            auto f = open_out(st_out);
            write_stream_tsv(f, r);
            write_stream_tsv(std::cout, r);
        } else if (ex->parsed()) {
            print_config("export-spectra", {{"data", c.data}, {"eps", ex_eps}, {"clamp", no_clamp ? "no" : "yes"}, {"out", ex_out}},
                         c.seed);
            const NaturalSpectrum eps = load_spectrum(ex_eps);
            const auto corpus = eval_corpus(load_data_dir(c.data), c.seed);
            const auto labels = all_labels();
            const auto grids = mean_corruption_spectrum(corpus, eps, labels, !no_clamp);
            double top = 0.0;
            for (const auto& [l, g] : grids)
                for (double v : g.values) top = std::max(top, v);
            auto summary = open_out(fs::path(ex_out) / "spectra.tsv");
            summary << "label\tmean\tmax\touter_mean\n";
            for (const auto& [l, g] : grids) {
                auto f = open_out(fs::path(ex_out) / (std::string(label_name(l)) + ".pgm"));
                write_pgm_text(f, g, top > 0.0 ? top : 1.0);
                double mean = 0.0, mx = 0.0;
                for (double v : g.values) {
                    mean += v;
                    mx = std::max(mx, v);
                }
                summary << label_name(l) << '\t' << mean / static_cast<double>(g.values.size()) << '\t' << mx << '\t'
                        << outer_annulus_mean(g) << '\n';
            }
            std::cout << "wrote " << grids.size() << " spectra to " << ex_out << '\n';
        }
        std::printf("done in %.1fs\n", timer.seconds());
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
