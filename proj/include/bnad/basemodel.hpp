#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include "bnad/corruptions.hpp"
#include "bnad/dataio.hpp"
#include "bnad/layers.hpp"
#include "bnad/tensor.hpp"

namespace bnad {

inline constexpr int kBnLayers = 4;
inline constexpr std::array<int, kBnLayers> kBnWidths{16, 16, 32, 32};

/// Running mean / variance of one BN layer.
struct BnMoments {
    std::vector<float> mean;
    std::vector<float> var;

    bool operator==(const BnMoments&) const = default;
};

/// One BnMoments per BN layer, in network order.
struct BnStats {
    std::vector<BnMoments> layers;

    /// Throws std::invalid_argument unless there are 4 layers of widths
    /// {16,16,32,32} with nonnegative variances.
    void validate() const;
    bool operator==(const BnStats&) const = default;
};

/// Learned weights of the task classifier:
///   conv3×3(3→16)+BN+ReLU, conv3×3(16→16)+BN+ReLU, maxpool2,
///   conv3×3(16→32)+BN+ReLU, conv3×3(32→32)+BN+ReLU, maxpool2,
///   global average pool, dense 32→10.
/// Convolutions carry no bias (BN absorbs it).
struct BaseCnnParams {
    std::array<Tensor, kBnLayers> conv;
    std::array<std::vector<float>, kBnLayers> gamma;
    std::array<std::vector<float>, kBnLayers> beta;
    Tensor fc_weight;  // 10×32
    Tensor fc_bias;    // 10
    double bn_eps = 1e-5;

    static BaseCnnParams init(std::uint64_t seed);
    bool operator==(const BaseCnnParams&) const = default;
};

/// Eval-mode classifier: shared immutable weights plus its own BN running
/// statistics. Copies and views share the weight block.
class BaseCnn {
public:
    BaseCnn(std::shared_ptr<const BaseCnnParams> params, BnStats stats);

    const BaseCnnParams& params() const { return *params_; }
    const std::shared_ptr<const BaseCnnParams>& shared_params() const { return params_; }
    const BnStats& stats() const { return stats_; }

    /// N×3×32×32 → N×10 logits, BN in eval mode with this model's stats.
    Tensor logits(const Tensor& batch) const;
    Tensor logits(std::span<const Image> images) const;
    std::vector<int> predict(std::span<const Image> images, std::size_t batch_size = 250) const;

    /// BN layer `layer` state (running stats + affine) as used by the forward pass.
    nn::BnLayerState bn_state(int layer) const;

    /// Pre-normalization activations of BN layer `layer`, with earlier BN
    /// layers normalized by `stats` (only its first `layer` entries are read).
    static Tensor preactivation(const BaseCnnParams& params, const BnStats& stats, const Tensor& batch, int layer);

private:
    std::shared_ptr<const BaseCnnParams> params_;
    BnStats stats_;
};

double accuracy(const BaseCnn& model, std::span<const Image> images, std::span<const int> labels);

/// A model view sharing `model`'s weights with the given running stats.
/// Throws std::invalid_argument on shape mismatch. `model` is untouched.
BaseCnn apply_bn(const BaseCnn& model, BnStats stats);

/// Per channel: mean = (N·μ_nat + n·μ_cor)/(N+n), var = (N·v_nat + n·v_cor)/(N+n).
BnStats merge_bn(const BnStats& natural, const BnStats& corrupted, double natural_weight = 1.0,
                 double corrupted_weight = 1.0);

/// Population mean / variance of every BN layer's pre-normalization
/// activations over all samples and spatial positions. Layers are estimated
/// in order; layer l is measured with layers < l normalized by their freshly
/// estimated statistics. Per-channel moments are merged across batches with
/// a count/mean/M2 scheme, so the result does not depend on batching beyond
/// rounding. Model weights are not touched. Requires ≥ 2 images.
BnStats estimate_bn(const BaseCnn& model, std::span<const Image> images, std::size_t batch_size = 128);

struct BaseTrainConfig {
    int epochs = 8;
    double lr = 0.05;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    int batch_size = 64;
    std::vector<int> drop_epochs{5, 7};
    double drop_factor = 0.1;
    double bn_momentum = 0.1;
    std::uint64_t seed = 0;
};

struct BaseEpochLog {
    int epoch = 0;
    double lr = 0.0;
    double mean_loss = 0.0;
    double train_acc = 0.0;
};

/// Minibatch SGD with train-mode BN; running stats follow an exponential
/// moving average of the batch statistics. Deterministic in cfg.seed.
BaseCnn train_base(const Dataset& data, const BaseTrainConfig& cfg,
                   const std::function<void(const BaseEpochLog&)>& on_epoch = {});

/// Lookup table of BN statistics keyed by corruption label; always holds `natural`.
struct BnTable {
    std::map<CorruptionLabel, BnStats> entries;

    const BnStats& at(CorruptionLabel label) const;
    bool contains(CorruptionLabel label) const { return entries.count(label) != 0; }
    std::size_t size() const { return entries.size(); }
    bool operator==(const BnTable&) const = default;
};

/// entry[natural] = model stats; entry[c] = merge_bn(natural, estimate_bn(corpus_c)),
/// severities pooled. Throws std::invalid_argument if a label has < 2 images.
BnTable build_bn_table(const BaseCnn& model, const CorruptedCorpus& corpus, std::span<const CorruptionLabel> labels,
                       double natural_weight = 1.0, double corrupted_weight = 1.0);

}  // namespace bnad
