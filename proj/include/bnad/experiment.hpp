#pragma once

#include <cstdint>
#include <filesystem>

#include "bnad/corruptions.hpp"
#include "bnad/dataio.hpp"
#include "bnad/detector.hpp"
#include "bnad/spectrum.hpp"

// Shared data plumbing for the CLI and the acceptance run, so both derive
// identical corpora from the same data directory and seed.
//
// data/train.bin   base-model training images
// data/test.bin    held-out images; first half is the adapt pool (ε_n,
//                  detector training, BN collection), second half the eval
//                  pool (every reported number)

namespace bnad {

inline constexpr std::size_t kPerCell = 100;

struct DataSplits {
    Dataset train;
    Dataset adapt;
    Dataset eval;
};

/// Splits `all` 5:1 into train/test and writes both CIFAR-format files.
void write_data_dir(const std::filesystem::path& dir, const Dataset& all);
DataSplits load_data_dir(const std::filesystem::path& dir);
DataSplits split_dataset(const Dataset& all);

/// All 12 labels × 5 severities × kPerCell images.
CorruptedCorpus adapt_corpus(const DataSplits& d, std::uint64_t seed, std::size_t per_cell = kPerCell);
CorruptedCorpus eval_corpus(const DataSplits& d, std::uint64_t seed, std::size_t per_cell = kPerCell);

NaturalSpectrum natural_spectrum(const DataSplits& d);

LabeledFeatures spectrum_features(const CorruptedCorpus& corpus, const NaturalSpectrum& eps);
/// Control input: first-channel raw pixels.
LabeledFeatures pixel_features(const CorruptedCorpus& corpus);

/// Seed tags for the independent random streams of one experiment.
enum class SeedTag : std::uint64_t {
    adapt_corpus = 0xADA,
    eval_corpus = 0xE7A,
    base = 0xBA5E,
    detector_init = 0xDE7,
    detector_order = 0xDE8,
    stream = 0x57E,
};
std::uint64_t seed_for(std::uint64_t seed, SeedTag tag);

}  // namespace bnad
