#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <vector>

#include "bnad/tensor.hpp"

namespace bnad {

inline constexpr int kDetectorHidden1 = 1024;
inline constexpr int kDetectorHidden2 = 512;

/// Three dense layers in_dim → 1024 → 512 → n_classes with ReLU after the
/// first two. Weights are out×in.
struct DetectorModel {
    Tensor w1, b1, w2, b2, w3, b3;

    int in_dim() const { return w1.empty() ? 0 : w1.dim(1); }
    int n_classes() const { return w3.empty() ? 0 : w3.dim(0); }
    std::size_t parameter_count() const;

    /// N×in_dim → N×n_classes.
    Tensor logits(const Tensor& features) const;

    bool operator==(const DetectorModel&) const = default;
};

/// Glorot-uniform weights, zero biases; deterministic in seed.
DetectorModel init_detector(int in_dim, int n_classes, std::uint64_t seed);

struct TrainSchedule {
    int epochs = 50;
    std::vector<int> drop_epochs{20, 35};
    double drop_factor = 0.1;
    double base_lr = 0.01;
    double momentum = 0.9;
    int batch_size = 128;
    double weight_decay = 0.0;
    std::uint64_t seed = 0;

    /// Learning rate used during (0-based) `epoch`.
    double lr_at(int epoch) const;
};

struct LabeledFeatures {
    std::vector<std::vector<float>> features;
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
};

struct EpochLog {
    int epoch = 0;
    double lr = 0.0;
    double mean_loss = 0.0;
    double train_acc = 0.0;
};

struct DetectorTraining {
    DetectorModel model;
    std::vector<EpochLog> history;
};

/// Shuffled minibatch SGD with momentum; throws std::invalid_argument for an
/// empty corpus, mismatched feature length or a label ≥ n_classes.
DetectorTraining train_detector(DetectorModel model, const LabeledFeatures& corpus, const TrainSchedule& schedule,
                                const std::function<void(const EpochLog&)>& on_epoch = {});

struct DetectorPrediction {
    int label = 0;
    std::vector<double> probabilities;
};

DetectorPrediction predict(const DetectorModel& model, std::span<const float> feature);
std::vector<int> predict_labels(const DetectorModel& model, const std::vector<std::vector<float>>& features);

/// Row = true label, column = predicted label.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(int n_classes) : n_(n_classes), counts_(static_cast<std::size_t>(n_classes * n_classes)) {}

    void add(int truth, int predicted) { ++counts_.at(static_cast<std::size_t>(truth * n_ + predicted)); }
    std::size_t at(int truth, int predicted) const { return counts_.at(static_cast<std::size_t>(truth * n_ + predicted)); }
    std::size_t row_sum(int truth) const;
    std::size_t total() const;
    std::size_t correct() const;
    double accuracy() const;
    int classes() const { return n_; }

    bool operator==(const ConfusionMatrix&) const = default;

private:
    int n_;
    std::vector<std::size_t> counts_;
};

struct DetectorEvaluation {
    double accuracy = 0.0;
    ConfusionMatrix confusion{0};
};

DetectorEvaluation evaluate(const DetectorModel& model, const LabeledFeatures& corpus);

/// Writes "epoch, lr, mean_loss, train_acc" lines.
void write_training_log(std::ostream& out, std::span<const EpochLog> history);

}  // namespace bnad
