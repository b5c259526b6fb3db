#pragma once

#include <map>
#include <memory>
#include <span>
#include <vector>

#include "bnad/basemodel.hpp"
#include "bnad/detector.hpp"
#include "bnad/spectrum.hpp"

namespace bnad {

enum class DetectionMode { per_image, batch_majority };

/// Anything that maps a normalized half-spectrum feature to a label code.
class CorruptionDetector {
public:
    virtual ~CorruptionDetector() = default;
    virtual int detect(std::span<const float> feature) const = 0;
    virtual int n_classes() const = 0;
    virtual int in_dim() const = 0;
};

class FcCorruptionDetector final : public CorruptionDetector {
public:
    explicit FcCorruptionDetector(DetectorModel model) : model_(std::move(model)) {}
    int detect(std::span<const float> feature) const override { return predict(model_, feature).label; }
    int n_classes() const override { return model_.n_classes(); }
    int in_dim() const override { return model_.in_dim(); }
    const DetectorModel& model() const { return model_; }

private:
    DetectorModel model_;
};

struct Inference {
    int prediction = 0;
    CorruptionLabel detected = CorruptionLabel::natural;
    std::vector<double> probabilities;
};

struct BatchInference {
    std::vector<int> predictions;
    std::vector<CorruptionLabel> detected;
};

/// featurize → detect → look up BN stats → forward the swapped model.
/// Immutable after construction; model views are built once per table entry.
class AdaptivePipeline {
public:
    /// Throws std::invalid_argument if the detector's class count differs
    /// from the table size, the table misses a detector class, or the ε_n
    /// geometry does not match the base input geometry.
    AdaptivePipeline(NaturalSpectrum eps, std::shared_ptr<const CorruptionDetector> detector, BaseCnn base,
                     const BnTable& table, DetectionMode mode = DetectionMode::per_image);

    Inference infer(const Image& img) const;
    BatchInference infer_batch(std::span<const Image> images) const { return infer_batch(images, mode_); }
    BatchInference infer_batch(std::span<const Image> images, DetectionMode mode) const;
    /// Routes each image through the stats of a given label (oracle detector).
    std::vector<int> infer_with_labels(std::span<const Image> images, std::span<const CorruptionLabel> labels) const;

    CorruptionLabel detect(const Image& img) const;
    const BaseCnn& view(CorruptionLabel label) const;
    const BaseCnn& base() const { return base_; }
    const NaturalSpectrum& eps() const { return eps_; }
    DetectionMode mode() const { return mode_; }

private:
    std::vector<int> route(std::span<const Image> images, std::span<const CorruptionLabel> labels) const;

    NaturalSpectrum eps_;
    std::shared_ptr<const CorruptionDetector> detector_;
    BaseCnn base_;
    std::map<CorruptionLabel, BaseCnn> views_;
    DetectionMode mode_;
};

/// Modal label; ties go to the smallest code. Throws on an empty span.
CorruptionLabel majority_label(std::span<const CorruptionLabel> labels);

}  // namespace bnad
