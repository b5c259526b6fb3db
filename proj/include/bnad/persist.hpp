#pragma once

#include <filesystem>
#include <optional>

#include "bnad/basemodel.hpp"
#include "bnad/container.hpp"
#include "bnad/corruptions.hpp"
#include "bnad/detector.hpp"
#include "bnad/spectrum.hpp"

// Artifact <-> container mapping. Doubles (ε_n, BN eps) travel as four
// 16-bit pieces of their bit pattern so they roundtrip exactly through the
// float-only payloads.

namespace bnad {

Container to_container(const DetectorModel& model, const NaturalSpectrum* eps = nullptr);
DetectorModel detector_from(const Container& c);
/// The ε_n embedded with a detector, if any.
std::optional<NaturalSpectrum> detector_eps_from(const Container& c);

Container to_container(const BaseCnn& model);
BaseCnn base_cnn_from(const Container& c);

Container to_container(const BnTable& table);
BnTable bn_table_from(const Container& c);

Container to_container(const NaturalSpectrum& eps);
NaturalSpectrum spectrum_from(const Container& c);

Container to_container(const CorruptedCorpus& corpus);
CorruptedCorpus corpus_from(const Container& c);

void save_detector(const std::filesystem::path& path, const DetectorModel& model, const NaturalSpectrum* eps = nullptr);
DetectorModel load_detector(const std::filesystem::path& path, std::optional<NaturalSpectrum>* eps = nullptr);
void save_base(const std::filesystem::path& path, const BaseCnn& model);
BaseCnn load_base(const std::filesystem::path& path);
void save_table(const std::filesystem::path& path, const BnTable& table);
BnTable load_table(const std::filesystem::path& path);
void save_spectrum(const std::filesystem::path& path, const NaturalSpectrum& eps);
NaturalSpectrum load_spectrum(const std::filesystem::path& path);
void save_corpus(const std::filesystem::path& path, const CorruptedCorpus& corpus);
CorruptedCorpus load_corpus(const std::filesystem::path& path);

}  // namespace bnad
