#include "bnad/experiment.hpp"

#include <stdexcept>

#include "bnad/random.hpp"

namespace bnad {

std::uint64_t seed_for(std::uint64_t seed, SeedTag tag) {
    return derive_seed(seed, {static_cast<std::uint64_t>(tag)});
}

DataSplits split_dataset(const Dataset& all) {
    if (all.size() < 12) throw std::invalid_argument("dataset too small to split");
    const std::size_t n_train = all.size() * 5 / 6;
    const std::size_t n_test = all.size() - n_train;
    DataSplits d;
    d.train = all.slice(0, n_train, "train");
    d.adapt = all.slice(n_train, n_train + n_test / 2, "adapt");
    d.eval = all.slice(n_train + n_test / 2, all.size(), "eval");
    return d;
}

void write_data_dir(const std::filesystem::path& dir, const Dataset& all) {
    const std::size_t n_train = all.size() * 5 / 6;
    save_cifar10_file(all.slice(0, n_train, "train"), dir / "train.bin");
    save_cifar10_file(all.slice(n_train, all.size(), "test"), dir / "test.bin");
}

DataSplits load_data_dir(const std::filesystem::path& dir) {
    DataSplits d;
    d.train = load_cifar10_file(dir / "train.bin", "train");
    const Dataset test = load_cifar10_file(dir / "test.bin", "test");
    if (test.size() < 2) throw std::invalid_argument("test split needs at least 2 images");
    d.adapt = test.slice(0, test.size() / 2, "adapt");
    d.eval = test.slice(test.size() / 2, test.size(), "eval");
    return d;
}

namespace {

CorruptedCorpus full_corpus(const Dataset& pool, std::uint64_t seed, std::size_t per_cell) {
    const auto labels = all_labels();
    return build_corrupted_dataset(pool.images, pool.labels, labels, kAllSeverities, per_cell, seed);
}

}  // namespace

CorruptedCorpus adapt_corpus(const DataSplits& d, std::uint64_t seed, std::size_t per_cell) {
    return full_corpus(d.adapt, seed_for(seed, SeedTag::adapt_corpus), per_cell);
}

CorruptedCorpus eval_corpus(const DataSplits& d, std::uint64_t seed, std::size_t per_cell) {
    return full_corpus(d.eval, seed_for(seed, SeedTag::eval_corpus), per_cell);
}

NaturalSpectrum natural_spectrum(const DataSplits& d) { return mean_amplitude(d.adapt.images); }

LabeledFeatures spectrum_features(const CorruptedCorpus& corpus, const NaturalSpectrum& eps) {
    LabeledFeatures f;
    f.features.reserve(corpus.size());
    for (const auto& r : corpus.records) {
        f.features.push_back(extract_feature(r.image, eps));
        f.labels.push_back(code(r.corruption));
    }
    return f;
}

LabeledFeatures pixel_features(const CorruptedCorpus& corpus) {
    LabeledFeatures f;
    f.features.reserve(corpus.size());
    for (const auto& r : corpus.records) {
        f.features.push_back(extract_raw_pixels(r.image, SpectrumConfig{}));
        f.labels.push_back(code(r.corruption));
    }
    return f;
}

}  // namespace bnad
