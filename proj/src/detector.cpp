#include "bnad/detector.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bnad/layers.hpp"
#include "bnad/random.hpp"

namespace bnad {

namespace {

Tensor glorot(int fan_out, int fan_in, Rng& rng) {
    const float a = static_cast<float>(std::sqrt(6.0 / (fan_in + fan_out)));
    std::uniform_real_distribution<float> u(-a, a);
    Tensor w({fan_out, fan_in});
    for (float& v : w.data) v = u(rng);
    return w;
}

Tensor gather(const std::vector<std::vector<float>>& features, std::span<const std::size_t> rows, int dim) {
    Tensor x({static_cast<int>(rows.size()), dim});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& f = features[rows[i]];
        std::copy(f.begin(), f.end(), x.data.begin() + static_cast<std::ptrdiff_t>(i * static_cast<std::size_t>(dim)));
    }
    return x;
}

int argmax_row(std::span<const float> row) {
    int best = 0;
    for (int j = 1; j < static_cast<int>(row.size()); ++j)
        if (row[static_cast<std::size_t>(j)] > row[static_cast<std::size_t>(best)]) best = j;
    return best;
}

void check_corpus(const DetectorModel& model, const LabeledFeatures& corpus) {
    if (corpus.features.size() != corpus.labels.size())
        throw std::invalid_argument("detector: feature/label count mismatch");
    for (const auto& f : corpus.features)
        if (static_cast<int>(f.size()) != model.in_dim())
            throw std::invalid_argument("detector: feature length " + std::to_string(f.size()) + " != in_dim " +
                                        std::to_string(model.in_dim()));
    for (int l : corpus.labels)
        if (l < 0 || l >= model.n_classes())
            throw std::invalid_argument("detector: label " + std::to_string(l) + " out of range");
}

}  // namespace

std::size_t DetectorModel::parameter_count() const {
    return w1.size() + b1.size() + w2.size() + b2.size() + w3.size() + b3.size();
}

Tensor DetectorModel::logits(const Tensor& features) const {
    const Tensor h1 = nn::relu_forward(nn::dense_forward(features, w1, b1));
    const Tensor h2 = nn::relu_forward(nn::dense_forward(h1, w2, b2));
    return nn::dense_forward(h2, w3, b3);
}

DetectorModel init_detector(int in_dim, int n_classes, std::uint64_t seed) {
    if (in_dim < 1 || n_classes < 1) throw std::invalid_argument("init_detector: dimensions must be ≥ 1");
    Rng rng(seed);
    DetectorModel m;
    m.w1 = glorot(kDetectorHidden1, in_dim, rng);
    m.b1 = Tensor({kDetectorHidden1});
    m.w2 = glorot(kDetectorHidden2, kDetectorHidden1, rng);
    m.b2 = Tensor({kDetectorHidden2});
    m.w3 = glorot(n_classes, kDetectorHidden2, rng);
    m.b3 = Tensor({n_classes});
    return m;
}

double TrainSchedule::lr_at(int epoch) const {
    double lr = base_lr;
    for (int d : drop_epochs)
        if (epoch >= d) lr *= drop_factor;
    return lr;
}

DetectorTraining train_detector(DetectorModel model, const LabeledFeatures& corpus, const TrainSchedule& schedule,
                                const std::function<void(const EpochLog&)>& on_epoch) {
    if (corpus.size() == 0) throw std::invalid_argument("train_detector: empty corpus");
    if (schedule.batch_size < 1 || schedule.epochs < 0) throw std::invalid_argument("train_detector: bad schedule");
    check_corpus(model, corpus);

    std::array<Tensor*, 6> params{&model.w1, &model.b1, &model.w2, &model.b2, &model.w3, &model.b3};
    std::array<Tensor, 6> velocity;
    for (std::size_t i = 0; i < params.size(); ++i) velocity[i] = Tensor(params[i]->shape);

    DetectorTraining out;
    const int dim = model.in_dim();
    for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
        Rng rng(derive_seed(schedule.seed, {static_cast<std::uint64_t>(epoch)}));
        const auto order = permutation(corpus.size(), rng);
        const nn::SgdConfig sgd{schedule.lr_at(epoch), schedule.momentum, schedule.weight_decay};
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(schedule.batch_size)) {
            const auto rows = std::span(order).subspan(
                start, std::min<std::size_t>(static_cast<std::size_t>(schedule.batch_size), order.size() - start));
            const Tensor x = gather(corpus.features, rows, dim);
            std::vector<int> y(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) y[i] = corpus.labels[rows[i]];

            const Tensor a1 = nn::dense_forward(x, model.w1, model.b1);
            const Tensor h1 = nn::relu_forward(a1);
            const Tensor a2 = nn::dense_forward(h1, model.w2, model.b2);
            const Tensor h2 = nn::relu_forward(a2);
            const Tensor z = nn::dense_forward(h2, model.w3, model.b3);
            const auto xent = nn::softmax_xent(z, y);
            loss_sum += xent.loss * static_cast<double>(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i)
                if (argmax_row(std::span(z.data).subspan(i * static_cast<std::size_t>(z.dim(1)),
                                                         static_cast<std::size_t>(z.dim(1)))) == y[i])
                    ++correct;

            const auto g3 = nn::dense_backward(h2, model.w3, xent.grad);
            const auto g2 = nn::dense_backward(h1, model.w2, nn::relu_backward(a2, g3.input));
            const auto g1 = nn::dense_backward(x, model.w1, nn::relu_backward(a1, g2.input), false);
            const std::array<const Tensor*, 6> grads{&g1.weight, &g1.bias, &g2.weight, &g2.bias, &g3.weight, &g3.bias};
            for (std::size_t i = 0; i < params.size(); ++i)
                nn::sgd_step(params[i]->values(), grads[i]->values(), velocity[i].values(), sgd);
        }
        EpochLog log{epoch, sgd.lr, loss_sum / static_cast<double>(corpus.size()),
                     static_cast<double>(correct) / static_cast<double>(corpus.size())};
        out.history.push_back(log);
        if (on_epoch) on_epoch(log);
    }
    out.model = std::move(model);
    return out;
}

DetectorPrediction predict(const DetectorModel& model, std::span<const float> feature) {
    if (static_cast<int>(feature.size()) != model.in_dim())
        throw std::invalid_argument("predict: feature length " + std::to_string(feature.size()) + " != in_dim " +
                                    std::to_string(model.in_dim()));
    const Tensor z = model.logits(Tensor({1, model.in_dim()}, std::vector<float>(feature.begin(), feature.end())));
    DetectorPrediction p;
    p.probabilities = nn::softmax<float>(z.values());
    p.label = static_cast<int>(std::max_element(p.probabilities.begin(), p.probabilities.end()) - p.probabilities.begin());
    return p;
}

std::vector<int> predict_labels(const DetectorModel& model, const std::vector<std::vector<float>>& features) {
    std::vector<int> out;
    out.reserve(features.size());
    constexpr std::size_t kChunk = 256;
    std::vector<std::size_t> rows;
    for (std::size_t start = 0; start < features.size(); start += kChunk) {
        rows.clear();
        for (std::size_t i = start; i < std::min(features.size(), start + kChunk); ++i) {
            if (static_cast<int>(features[i].size()) != model.in_dim())
                throw std::invalid_argument("predict: feature length mismatch");
            rows.push_back(i);
        }
        const Tensor z = model.logits(gather(features, rows, model.in_dim()));
        const auto k = static_cast<std::size_t>(z.dim(1));
        for (std::size_t i = 0; i < rows.size(); ++i) out.push_back(argmax_row(std::span(z.data).subspan(i * k, k)));
    }
    return out;
}

std::size_t ConfusionMatrix::row_sum(int truth) const {
    std::size_t s = 0;
    for (int p = 0; p < n_; ++p) s += at(truth, p);
    return s;
}

std::size_t ConfusionMatrix::total() const {
    std::size_t s = 0;
    for (auto c : counts_) s += c;
    return s;
}

std::size_t ConfusionMatrix::correct() const {
    std::size_t s = 0;
    for (int i = 0; i < n_; ++i) s += at(i, i);
    return s;
}

double ConfusionMatrix::accuracy() const {
    const auto t = total();
    return t ? static_cast<double>(correct()) / static_cast<double>(t) : 0.0;
}

DetectorEvaluation evaluate(const DetectorModel& model, const LabeledFeatures& corpus) {
    check_corpus(model, corpus);
    const auto predicted = predict_labels(model, corpus.features);
    DetectorEvaluation e;
    e.confusion = ConfusionMatrix(model.n_classes());
    for (std::size_t i = 0; i < predicted.size(); ++i) e.confusion.add(corpus.labels[i], predicted[i]);
    e.accuracy = e.confusion.accuracy();
    return e;
}

void write_training_log(std::ostream& out, std::span<const EpochLog> history) {
    for (const auto& h : history) out << h.epoch << ", " << h.lr << ", " << h.mean_loss << ", " << h.train_acc << '\n';
}

}  // namespace bnad
