#pragma once

#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "bnad/basemodel.hpp"
#include "bnad/corruptions.hpp"
#include "bnad/pipeline.hpp"

namespace bnad {

/// Maps a batch of images to class predictions; wraps a base model, a model
/// view or a full pipeline.
using BatchClassifier = std::function<std::vector<int>(std::span<const Image>)>;

BatchClassifier classifier_of(const BaseCnn& model);
BatchClassifier classifier_of(const AdaptivePipeline& pipeline, DetectionMode mode);

class HarnessError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---- corruption error ------------------------------------------------------

struct CorruptionErrorReport {
    std::vector<CorruptionLabel> corruptions;
    std::vector<int> severities;
    std::map<std::pair<int, int>, double> error;  // (label code, severity) → E
    std::map<int, double> uce;                    // label code → Σ_s E
    double mce = 0.0;
    double clean_accuracy = 0.0;      // natural records, 0 if none
    double corrupted_accuracy = 0.0;  // all corrupted records
    double combined_accuracy = 0.0;   // clean and corrupted together
    std::size_t clean_count = 0;
    std::size_t corrupted_count = 0;

    double cell(CorruptionLabel c, int s) const { return error.at({code(c), s}); }
};

/// Error per (corruption, severity) cell plus aggregates. Throws HarnessError
/// naming every missing cell.
CorruptionErrorReport eval_per_corruption(const BatchClassifier& classify, const CorruptedCorpus& corpus,
                                          std::span<const CorruptionLabel> corruptions,
                                          std::span<const int> severities = kAllSeverities);
CorruptionErrorReport eval_per_corruption(const BatchClassifier& classify, const CorruptedCorpus& corpus);

/// Recomputes uCE and mCE from the cells and compares exactly.
bool aggregates_consistent(const CorruptionErrorReport& r);

/// Header "section\tcorruption\tseverity\tvalue"; cells, then uCE rows, then
/// summary rows. Values use 17 significant digits.
void write_report_tsv(std::ostream& out, const CorruptionErrorReport& r);
CorruptionErrorReport read_report_tsv(std::istream& in);

// ---- gain matrix -------------------------------------------------------------

struct GainMatrix {
    std::vector<CorruptionLabel> labels;
    std::vector<std::vector<double>> gain;  // [stats entry i][test corruption j]
    std::vector<double> natural_accuracy;   // per test corruption j

    double diagonal_mean(bool skip_natural = true) const;
    double off_diagonal_mean(bool skip_natural = true) const;
    /// Mean of gain[i][j], i ≠ j, both in the noise family.
    double intra_noise_mean() const;
};

/// Entry (i, j): accuracy on corruption j with stats table[i] minus accuracy
/// with natural stats, severities pooled. Throws HarnessError if a label has
/// no table entry or no test images.
GainMatrix gain_matrix(const BaseCnn& base, const BnTable& table, const CorruptedCorpus& corpus,
                       std::span<const CorruptionLabel> labels);
void write_gain_tsv(std::ostream& out, const GainMatrix& g);

// ---- streaming ---------------------------------------------------------------

enum class StreamPolicy { static_natural, online_bn_window, adaptive_lookup };
std::string_view policy_name(StreamPolicy p);

struct StreamConfig {
    int batch_size = 16;
    std::vector<int> periods{1, 2, 4, 8, 16, 32};
    int total_batches = 352;
    int window = 10;
    /// Weight of the natural stats when blending the online estimate
    /// (0 replaces them outright).
    double natural_blend = 0.0;
    DetectionMode detection = DetectionMode::per_image;
    std::vector<StreamPolicy> policies{StreamPolicy::static_natural, StreamPolicy::online_bn_window,
                                       StreamPolicy::adaptive_lookup};
    std::uint64_t seed = 0;

    void validate() const;
};

struct StreamRow {
    StreamPolicy policy;
    int period = 0;
    double accuracy = 0.0;
    std::size_t samples = 0;
};

struct StreamResult {
    std::vector<StreamRow> rows;
    double accuracy(StreamPolicy p, int period) const;
};

/// One stream batch: a corruption and the pool positions of its images.
struct StreamBatch {
    CorruptionLabel corruption;
    std::vector<std::size_t> records;  // indices into the corpus
};

/// Batch sequence for switch period K. Segments of K batches share one
/// corruption; segment labels are a shuffled, balanced cycle over the
/// corruptions. The n-th batch drawn from corruption c always holds the
/// same images whatever K is, so every K sees the same batches in a
/// different order.
std::vector<StreamBatch> stream_schedule(const StreamConfig& cfg, int period, const CorruptedCorpus& corpus,
                                         std::span<const CorruptionLabel> corruptions);

/// Throws HarnessError if a corruption has no images in `corpus`.
StreamResult stream_eval(const StreamConfig& cfg, const AdaptivePipeline& pipeline, const CorruptedCorpus& corpus,
                         std::span<const CorruptionLabel> corruptions);
void write_stream_tsv(std::ostream& out, const StreamResult& r);

}  // namespace bnad
