#include "bnad/basemodel.hpp"

#include <cmath>
#include <stdexcept>

#include "bnad/random.hpp"

namespace bnad {

namespace {

constexpr nn::ConvGeometry kSame3x3{1, 1};

bool pools_after(int layer) { return layer == 1 || layer == 3; }

void check_batch(const Tensor& batch) {
    if (batch.rank() != 4 || batch.dim(1) != kImageChannels)
        throw std::invalid_argument("base model: expected N×3×H×W batch, got " + shape_string(batch.shape));
}

nn::BnLayerState make_state(const BaseCnnParams& p, const BnMoments& m, int layer) {
    nn::BnLayerState s;
    s.mean = m.mean;
    s.var = m.var;
    s.gamma = p.gamma[static_cast<std::size_t>(layer)];
    s.beta = p.beta[static_cast<std::size_t>(layer)];
    s.eps = p.bn_eps;
    return s;
}

struct Moments {
    double count = 0.0;
    std::vector<double> mean, m2;
};

/// Chan et al. pairwise merge of per-channel (count, mean, M2).
void merge_moments(Moments& acc, const Tensor& pre) {
    const int n = pre.dim(0), c = pre.dim(1);
    const std::size_t plane = static_cast<std::size_t>(pre.dim(2)) * pre.dim(3);
    const double nb = static_cast<double>(n) * static_cast<double>(plane);
    if (acc.mean.empty()) {
        acc.mean.assign(static_cast<std::size_t>(c), 0.0);
        acc.m2.assign(static_cast<std::size_t>(c), 0.0);
    }
    for (int ch = 0; ch < c; ++ch) {
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            const float* p = pre.data.data() + (static_cast<std::size_t>(i) * c + ch) * plane;
            for (std::size_t k = 0; k < plane; ++k) sum += p[k];
        }
        const double mb = sum / nb;
        double m2b = 0.0;
        for (int i = 0; i < n; ++i) {
            const float* p = pre.data.data() + (static_cast<std::size_t>(i) * c + ch) * plane;
            for (std::size_t k = 0; k < plane; ++k) {
                const double d = p[k] - mb;
                m2b += d * d;
            }
        }
        const std::size_t cu = static_cast<std::size_t>(ch);
        const double na = acc.count;
        const double total = na + nb;
        const double delta = mb - acc.mean[cu];
        acc.mean[cu] += delta * nb / total;
        acc.m2[cu] += m2b + delta * delta * na * nb / total;
    }
    acc.count += nb;
}

/// Row-at-a-time classifier head: a row's logits do not depend on what else
/// shares the batch (a blocked GEMM may round differently per batch size).
Tensor head(const Tensor& pooled, const BaseCnnParams& p) {
    const int n = pooled.dim(0), in = pooled.dim(1), out = p.fc_weight.dim(0);
    Tensor z({n, out});
    for (int i = 0; i < n; ++i) {
        const Tensor row({1, in}, std::vector<float>(pooled.data.begin() + static_cast<std::ptrdiff_t>(i) * in,
                                                     pooled.data.begin() + static_cast<std::ptrdiff_t>(i + 1) * in));
        const Tensor r = nn::dense_forward(row, p.fc_weight, p.fc_bias);
        std::copy(r.data.begin(), r.data.end(), z.data.begin() + static_cast<std::ptrdiff_t>(i) * out);
    }
    return z;
}

Tensor kaiming(int out, int in, int k, Rng& rng) {
    const float bound = static_cast<float>(std::sqrt(6.0 / (in * k * k)));
    std::uniform_real_distribution<float> u(-bound, bound);
    Tensor w({out, in, k, k});
    for (float& v : w.data) v = u(rng);
    return w;
}

}  // namespace

void BnStats::validate() const {
    if (layers.size() != kBnLayers) throw std::invalid_argument("BN stats: expected 4 layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto w = static_cast<std::size_t>(kBnWidths[l]);
        if (layers[l].mean.size() != w || layers[l].var.size() != w)
            throw std::invalid_argument("BN stats: layer " + std::to_string(l) + " width mismatch");
        for (float v : layers[l].var)
            if (!(v >= 0.0f)) throw std::invalid_argument("BN stats: negative variance");
    }
}

BaseCnnParams BaseCnnParams::init(std::uint64_t seed) {
    Rng rng(seed);
    BaseCnnParams p;
    int in = kImageChannels;
    for (int l = 0; l < kBnLayers; ++l) {
        const int out = kBnWidths[static_cast<std::size_t>(l)];
        p.conv[static_cast<std::size_t>(l)] = kaiming(out, in, 3, rng);
        p.gamma[static_cast<std::size_t>(l)].assign(static_cast<std::size_t>(out), 1.0f);
        p.beta[static_cast<std::size_t>(l)].assign(static_cast<std::size_t>(out), 0.0f);
        in = out;
    }
    const float a = static_cast<float>(std::sqrt(6.0 / (kBnWidths.back() + kNumClasses)));
    std::uniform_real_distribution<float> u(-a, a);
    p.fc_weight = Tensor({kNumClasses, kBnWidths.back()});
    for (float& v : p.fc_weight.data) v = u(rng);
    p.fc_bias = Tensor({kNumClasses});
    return p;
}

BaseCnn::BaseCnn(std::shared_ptr<const BaseCnnParams> params, BnStats stats)
    : params_(std::move(params)), stats_(std::move(stats)) {
    if (!params_) throw std::invalid_argument("BaseCnn: null parameters");
    stats_.validate();
}

nn::BnLayerState BaseCnn::bn_state(int layer) const {
    return make_state(*params_, stats_.layers.at(static_cast<std::size_t>(layer)), layer);
}

Tensor BaseCnn::preactivation(const BaseCnnParams& params, const BnStats& stats, const Tensor& batch, int layer) {
    check_batch(batch);
    if (layer < 0 || layer >= kBnLayers) throw std::out_of_range("preactivation: bad layer");
    Tensor x = batch;
    for (int l = 0;; ++l) {
        x = nn::conv2d_forward(x, params.conv[static_cast<std::size_t>(l)], Tensor{}, kSame3x3);
        if (l == layer) return x;
        x = nn::batchnorm_forward(x, make_state(params, stats.layers.at(static_cast<std::size_t>(l)), l),
                                  nn::BnMode::eval)
                .output;
        x = nn::relu_forward(x);
        if (pools_after(l)) x = nn::maxpool2d_forward(x, 2, 2).output;
    }
}

Tensor BaseCnn::logits(const Tensor& batch) const {
    check_batch(batch);
    Tensor x = batch;
    for (int l = 0; l < kBnLayers; ++l) {
        x = nn::conv2d_forward(x, params_->conv[static_cast<std::size_t>(l)], Tensor{}, kSame3x3);
        x = nn::batchnorm_forward(x, bn_state(l), nn::BnMode::eval).output;
        x = nn::relu_forward(x);
        if (pools_after(l)) x = nn::maxpool2d_forward(x, 2, 2).output;
    }
    return head(nn::global_avgpool_forward(x), *params_);
}

Tensor BaseCnn::logits(std::span<const Image> images) const { return logits(stack_images(images)); }

std::vector<int> BaseCnn::predict(std::span<const Image> images, std::size_t batch_size) const {
    std::vector<int> out;
    out.reserve(images.size());
    for (std::size_t start = 0; start < images.size(); start += batch_size) {
        const Tensor z = logits(images.subspan(start, std::min(batch_size, images.size() - start)));
        const int k = z.dim(1);
        for (int i = 0; i < z.dim(0); ++i) {
            int best = 0;
            for (int j = 1; j < k; ++j)
                if (z.data[static_cast<std::size_t>(i * k + j)] > z.data[static_cast<std::size_t>(i * k + best)]) best = j;
            out.push_back(best);
        }
    }
    return out;
}

double accuracy(const BaseCnn& model, std::span<const Image> images, std::span<const int> labels) {
    if (images.size() != labels.size()) throw std::invalid_argument("accuracy: size mismatch");
    if (images.empty()) return 0.0;
    const auto pred = model.predict(images);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == labels[i] ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(images.size());
}

BaseCnn apply_bn(const BaseCnn& model, BnStats stats) { return BaseCnn(model.shared_params(), std::move(stats)); }

BnStats merge_bn(const BnStats& natural, const BnStats& corrupted, double natural_weight, double corrupted_weight) {
    natural.validate();
    corrupted.validate();
    if (natural_weight < 0.0 || corrupted_weight < 0.0 || !(natural_weight + corrupted_weight > 0.0))
        throw std::invalid_argument("merge_bn: weights must be nonnegative with a positive sum");
    const double total = natural_weight + corrupted_weight;
    BnStats out = natural;
    for (std::size_t l = 0; l < out.layers.size(); ++l)
        for (std::size_t c = 0; c < out.layers[l].mean.size(); ++c) {
            out.layers[l].mean[c] = static_cast<float>(
                (natural_weight * natural.layers[l].mean[c] + corrupted_weight * corrupted.layers[l].mean[c]) / total);
            out.layers[l].var[c] = static_cast<float>(
                (natural_weight * natural.layers[l].var[c] + corrupted_weight * corrupted.layers[l].var[c]) / total);
        }
    return out;
}

BnStats estimate_bn(const BaseCnn& model, std::span<const Image> images, std::size_t batch_size) {
    if (images.size() < 2) throw std::invalid_argument("estimate_bn: need at least 2 samples");
    if (batch_size < 1) throw std::invalid_argument("estimate_bn: batch size must be ≥ 1");
    const BaseCnnParams& p = model.params();
    // Each chunk carries its activation up to the current layer, so layer l
    // sees layers < l normalized by the stats just finalized for them. Same
    // result as re-running the prefix per layer, at the cost of one pass.
    std::vector<Tensor> chunks;
    for (std::size_t start = 0; start < images.size(); start += batch_size)
        chunks.push_back(stack_images(images.subspan(start, std::min(batch_size, images.size() - start))));
    for (const Tensor& c : chunks) check_batch(c);

    BnStats out;
    for (int l = 0; l < kBnLayers; ++l) {
        Moments acc;
        for (Tensor& x : chunks) {
            x = nn::conv2d_forward(x, p.conv[static_cast<std::size_t>(l)], Tensor{}, kSame3x3);
            merge_moments(acc, x);
        }
        BnMoments m;
        for (std::size_t c = 0; c < acc.mean.size(); ++c) {
            m.mean.push_back(static_cast<float>(acc.mean[c]));
            m.var.push_back(static_cast<float>(std::max(0.0, acc.m2[c] / acc.count)));
        }
        if (l + 1 < kBnLayers) {
            const nn::BnLayerState st = make_state(p, m, l);
            for (Tensor& x : chunks) {
                x = nn::relu_forward(nn::batchnorm_forward(x, st, nn::BnMode::eval).output);
                if (pools_after(l)) x = nn::maxpool2d_forward(x, 2, 2).output;
            }
        }
        out.layers.push_back(std::move(m));
    }
    return out;
}

BaseCnn train_base(const Dataset& data, const BaseTrainConfig& cfg,
                   const std::function<void(const BaseEpochLog&)>& on_epoch) {
    data.validate();
    if (data.size() < 2) throw std::invalid_argument("train_base: need at least 2 images");
    if (cfg.batch_size < 2) throw std::invalid_argument("train_base: batch size must be ≥ 2");

    BaseCnnParams p = BaseCnnParams::init(derive_seed(cfg.seed, {0x1A17}));
    BnStats running;
    for (int w : kBnWidths)
        running.layers.push_back({std::vector<float>(static_cast<std::size_t>(w), 0.0f),
                                  std::vector<float>(static_cast<std::size_t>(w), 1.0f)});

    std::array<Tensor, kBnLayers> v_conv;
    std::array<std::vector<float>, kBnLayers> v_gamma, v_beta;
    for (std::size_t l = 0; l < kBnLayers; ++l) {
        v_conv[l] = Tensor(p.conv[l].shape);
        v_gamma[l].assign(p.gamma[l].size(), 0.0f);
        v_beta[l].assign(p.beta[l].size(), 0.0f);
    }
    Tensor v_fc_w(p.fc_weight.shape), v_fc_b(p.fc_bias.shape);

    const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
    const std::size_t batches = std::max<std::size_t>(1, data.size() / bs);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double lr = cfg.lr;
        for (int d : cfg.drop_epochs)
            if (epoch >= d) lr *= cfg.drop_factor;
        const nn::SgdConfig sgd_w{lr, cfg.momentum, cfg.weight_decay};
        const nn::SgdConfig sgd_bn{lr, cfg.momentum, 0.0};

        Rng rng(derive_seed(cfg.seed, {0xE0C4, static_cast<std::uint64_t>(epoch)}));
        const auto order = permutation(data.size(), rng);
        double loss_sum = 0.0;
        std::size_t correct = 0, seen = 0;
        for (std::size_t b = 0; b < batches; ++b) {
            const std::size_t n = std::min(bs, data.size() - b * bs);
            std::vector<Image> imgs;
            std::vector<int> labels;
            for (std::size_t i = 0; i < n; ++i) {
                imgs.push_back(data.images[order[b * bs + i]]);
                labels.push_back(data.labels[order[b * bs + i]]);
            }

            std::array<Tensor, kBnLayers> conv_in;
            std::array<nn::BnForward<float>, kBnLayers> bn;
            std::array<nn::MaxPoolResult<float>, kBnLayers> pool;
            std::array<std::vector<int>, kBnLayers> relu_shape;
            Tensor x = stack_images(imgs);
            for (std::size_t l = 0; l < kBnLayers; ++l) {
                conv_in[l] = x;
                const Tensor pre = nn::conv2d_forward(x, p.conv[l], Tensor{}, kSame3x3);
                nn::BnLayerState st = make_state(p, running.layers[l], static_cast<int>(l));
                bn[l] = nn::batchnorm_forward(pre, st, nn::BnMode::train);
                x = nn::relu_forward(bn[l].output);
                relu_shape[l] = x.shape;
                if (pools_after(static_cast<int>(l))) {
                    pool[l] = nn::maxpool2d_forward(x, 2, 2);
                    x = pool[l].output;
                }
            }
            const Tensor gap = nn::global_avgpool_forward(x);
            const Tensor z = nn::dense_forward(gap, p.fc_weight, p.fc_bias);
            const auto xent = nn::softmax_xent(z, labels);
            loss_sum += xent.loss * static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) {
                int best = 0;
                for (int j = 1; j < kNumClasses; ++j)
                    if (z.data[i * kNumClasses + static_cast<std::size_t>(j)] > z.data[i * kNumClasses + static_cast<std::size_t>(best)])
                        best = j;
                correct += best == labels[i] ? 1 : 0;
            }
            seen += n;

            const auto fc = nn::dense_backward(gap, p.fc_weight, xent.grad);
            Tensor dx = nn::global_avgpool_backward(x.shape, fc.input);
            std::array<Tensor, kBnLayers> d_conv;
            std::array<std::vector<float>, kBnLayers> d_gamma, d_beta;
            for (int li = kBnLayers - 1; li >= 0; --li) {
                const auto l = static_cast<std::size_t>(li);
                if (pools_after(li)) dx = nn::maxpool2d_backward(relu_shape[l], pool[l].argmax, dx);
                dx = nn::relu_backward(bn[l].output, dx);
                auto bg = nn::batchnorm_backward(bn[l], std::span<const float>(p.gamma[l]), dx);
                auto cg = nn::conv2d_backward(conv_in[l], p.conv[l], bg.input, kSame3x3, false, li > 0);
                d_conv[l] = std::move(cg.kernel);
                d_gamma[l] = std::move(bg.gamma);
                d_beta[l] = std::move(bg.beta);
                dx = std::move(cg.input);
            }

            for (std::size_t l = 0; l < kBnLayers; ++l) {
                nn::sgd_step(p.conv[l].values(), d_conv[l].values(), v_conv[l].values(), sgd_w);
                nn::sgd_step(p.gamma[l], d_gamma[l], v_gamma[l], sgd_bn);
                nn::sgd_step(p.beta[l], d_beta[l], v_beta[l], sgd_bn);
                const float m = static_cast<float>(cfg.bn_momentum);
                for (std::size_t c = 0; c < running.layers[l].mean.size(); ++c) {
                    running.layers[l].mean[c] =
                        (1.0f - m) * running.layers[l].mean[c] + m * static_cast<float>(bn[l].batch_mean[c]);
                    running.layers[l].var[c] =
                        (1.0f - m) * running.layers[l].var[c] + m * static_cast<float>(bn[l].batch_var[c]);
                }
            }
            nn::sgd_step(p.fc_weight.values(), fc.weight.values(), v_fc_w.values(), sgd_w);
            nn::sgd_step(p.fc_bias.values(), fc.bias.values(), v_fc_b.values(), sgd_bn);
        }
        if (on_epoch)
            on_epoch({epoch, lr, loss_sum / static_cast<double>(seen), static_cast<double>(correct) / static_cast<double>(seen)});
    }
    return BaseCnn(std::make_shared<const BaseCnnParams>(std::move(p)), std::move(running));
}

const BnStats& BnTable::at(CorruptionLabel label) const {
    const auto it = entries.find(label);
    if (it == entries.end())
        throw std::out_of_range("BN table has no entry for " + std::string(label_name(label)));
    return it->second;
}

BnTable build_bn_table(const BaseCnn& model, const CorruptedCorpus& corpus, std::span<const CorruptionLabel> labels,
                       double natural_weight, double corrupted_weight) {
    BnTable table;
    table.entries.emplace(CorruptionLabel::natural, model.stats());
    for (CorruptionLabel label : labels) {
        if (label == CorruptionLabel::natural) continue;
        const auto idx = corpus.indices_of(label);
        if (idx.size() < 2)
            throw std::invalid_argument("build_bn_table: corpus for " + std::string(label_name(label)) +
                                        " has fewer than 2 images");
        std::vector<Image> imgs;
        imgs.reserve(idx.size());
        for (std::size_t i : idx) imgs.push_back(corpus.records[i].image);
        table.entries.emplace(label,
                              merge_bn(model.stats(), estimate_bn(model, imgs), natural_weight, corrupted_weight));
    }
    return table;
}

}  // namespace bnad
