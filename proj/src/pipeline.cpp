#include "bnad/pipeline.hpp"

#include <array>
#include <stdexcept>

#include "bnad/layers.hpp"

namespace bnad {

AdaptivePipeline::AdaptivePipeline(NaturalSpectrum eps, std::shared_ptr<const CorruptionDetector> detector,
                                   BaseCnn base, const BnTable& table, DetectionMode mode)
    : eps_(std::move(eps)), detector_(std::move(detector)), base_(std::move(base)), mode_(mode) {
    if (!detector_) throw std::invalid_argument("pipeline: null detector");
    if (detector_->n_classes() != static_cast<int>(table.size()))
        throw std::invalid_argument("pipeline: detector has " + std::to_string(detector_->n_classes()) +
                                    " classes but the BN table has " + std::to_string(table.size()) + " entries");
    for (int code = 0; code < detector_->n_classes(); ++code) {
        if (code >= kNumLabels) throw std::invalid_argument("pipeline: detector class beyond the label set");
        if (!table.contains(label_from_code(code)))
            throw std::invalid_argument("pipeline: BN table lacks detector class " + std::to_string(code));
    }
    if (eps_.grid.height != kImageSide || eps_.grid.width != kImageSide)
        throw std::invalid_argument("pipeline: ε_n is " + std::to_string(eps_.grid.height) + "×" +
                                    std::to_string(eps_.grid.width) + ", base expects 32×32");
    if (detector_->in_dim() != static_cast<int>(feature_length(eps_)))
        throw std::invalid_argument("pipeline: detector input width does not match the half-spectrum length");
    for (const auto& [label, stats] : table.entries) views_.emplace(label, apply_bn(base_, stats));
}

const BaseCnn& AdaptivePipeline::view(CorruptionLabel label) const {
    const auto it = views_.find(label);
    if (it == views_.end()) throw std::out_of_range("pipeline: no view for " + std::string(label_name(label)));
    return it->second;
}

CorruptionLabel AdaptivePipeline::detect(const Image& img) const {
    return label_from_code(detector_->detect(extract_feature(img, eps_)));
}

Inference AdaptivePipeline::infer(const Image& img) const {
    Inference out;
    out.detected = detect(img);
    const Tensor z = view(out.detected).logits(std::span<const Image>(&img, 1));
    out.probabilities = nn::softmax<float>(z.values());
    out.prediction = static_cast<int>(std::max_element(out.probabilities.begin(), out.probabilities.end()) -
                                      out.probabilities.begin());
    return out;
}

CorruptionLabel majority_label(std::span<const CorruptionLabel> labels) {
    if (labels.empty()) throw std::invalid_argument("majority_label: empty batch");
    std::array<int, kNumLabels> votes{};
    for (auto l : labels) ++votes[static_cast<std::size_t>(code(l))];
    int best = 0;
    for (int c = 1; c < kNumLabels; ++c)
        if (votes[static_cast<std::size_t>(c)] > votes[static_cast<std::size_t>(best)]) best = c;
    return label_from_code(best);
}

std::vector<int> AdaptivePipeline::route(std::span<const Image> images, std::span<const CorruptionLabel> labels) const {
    if (images.size() != labels.size()) throw std::invalid_argument("pipeline: image/label count mismatch");
    std::vector<int> out(images.size());
    // group by label so each view runs one batched forward
    std::map<CorruptionLabel, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
    for (const auto& [label, idx] : groups) {
        std::vector<Image> imgs;
        imgs.reserve(idx.size());
        for (auto i : idx) imgs.push_back(images[i]);
        const auto pred = view(label).predict(imgs);
        for (std::size_t k = 0; k < idx.size(); ++k) out[idx[k]] = pred[k];
    }
    return out;
}

BatchInference AdaptivePipeline::infer_batch(std::span<const Image> images, DetectionMode mode) const {
    if (images.empty()) throw std::invalid_argument("pipeline: empty batch");
    BatchInference out;
    out.detected.reserve(images.size());
    for (const auto& img : images) out.detected.push_back(detect(img));
    if (mode == DetectionMode::batch_majority) out.detected.assign(images.size(), majority_label(out.detected));
    out.predictions = route(images, out.detected);
    return out;
}

std::vector<int> AdaptivePipeline::infer_with_labels(std::span<const Image> images,
                                                     std::span<const CorruptionLabel> labels) const {
    return route(images, labels);
}

}  // namespace bnad
