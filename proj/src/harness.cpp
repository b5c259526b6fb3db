#include "bnad/harness.hpp"

#include <algorithm>
#include <iomanip>
#include <limits>
#include <sstream>

#include "bnad/random.hpp"

namespace bnad {

namespace {

std::vector<Image> images_at(const CorruptedCorpus& corpus, std::span<const std::size_t> idx) {
    std::vector<Image> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(corpus.records[i].image);
    return out;
}

std::size_t count_correct(const std::vector<int>& pred, const CorruptedCorpus& corpus,
                          std::span<const std::size_t> idx) {
    if (pred.size() != idx.size()) throw HarnessError("classifier returned the wrong number of predictions");
    std::size_t ok = 0;
    for (std::size_t k = 0; k < idx.size(); ++k) ok += pred[k] == corpus.records[idx[k]].class_label ? 1 : 0;
    return ok;
}

double accuracy_on(const BaseCnn& model, const CorruptedCorpus& corpus, std::span<const std::size_t> idx) {
    const auto imgs = images_at(corpus, idx);
    return static_cast<double>(count_correct(model.predict(imgs), corpus, idx)) / static_cast<double>(idx.size());
}

// Exact (round-trippable) decimal rendering of a double.
std::string num(double v) {
    std::ostringstream s;
    s << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
    return s.str();
}

double uce_sum(const CorruptionErrorReport& r, CorruptionLabel c) {
    double s = 0.0;
    for (int sev : r.severities) s += r.error.at({code(c), sev});
    return s;
}

double mce_of(const CorruptionErrorReport& r) {
    if (r.corruptions.empty()) return 0.0;
    double s = 0.0;
    for (auto c : r.corruptions) s += r.uce.at(code(c));
    return s / static_cast<double>(r.corruptions.size());
}

}  // namespace

BatchClassifier classifier_of(const BaseCnn& model) {
    return [&model](std::span<const Image> imgs) { return model.predict(imgs); };
}

BatchClassifier classifier_of(const AdaptivePipeline& pipeline, DetectionMode mode) {
    return [&pipeline, mode](std::span<const Image> imgs) { return pipeline.infer_batch(imgs, mode).predictions; };
}

CorruptionErrorReport eval_per_corruption(const BatchClassifier& classify, const CorruptedCorpus& corpus,
                                          std::span<const CorruptionLabel> corruptions,
                                          std::span<const int> severities) {
    CorruptionErrorReport r;
    r.corruptions.assign(corruptions.begin(), corruptions.end());
    r.severities.assign(severities.begin(), severities.end());

    std::vector<std::string> missing;
    for (auto c : corruptions)
        for (int s : severities)
            if (corpus.indices_of(c, s).empty()) missing.push_back(std::string(label_name(c)) + "/s" + std::to_string(s));
    if (!missing.empty()) {
        std::string msg = "eval_per_corruption: missing cells:";
        for (const auto& m : missing) msg += " " + m;
        throw HarnessError(msg);
    }

    std::size_t corrupted_ok = 0;
    for (auto c : corruptions) {
        if (c == CorruptionLabel::natural) throw HarnessError("eval_per_corruption: natural is not a corruption");
        for (int s : severities) {
            const auto idx = corpus.indices_of(c, s);
            const std::size_t ok = count_correct(classify(images_at(corpus, idx)), corpus, idx);
            r.error[{code(c), s}] = 1.0 - static_cast<double>(ok) / static_cast<double>(idx.size());
            corrupted_ok += ok;
            r.corrupted_count += idx.size();
        }
        r.uce[code(c)] = uce_sum(r, c);
    }
    r.mce = mce_of(r);

    const auto clean_idx = corpus.indices_of(CorruptionLabel::natural);
    std::size_t clean_ok = 0;
    if (!clean_idx.empty()) {
        clean_ok = count_correct(classify(images_at(corpus, clean_idx)), corpus, clean_idx);
        r.clean_count = clean_idx.size();
        r.clean_accuracy = static_cast<double>(clean_ok) / static_cast<double>(clean_idx.size());
    }
    if (r.corrupted_count)
        r.corrupted_accuracy = static_cast<double>(corrupted_ok) / static_cast<double>(r.corrupted_count);
    const std::size_t all = r.corrupted_count + r.clean_count;
    if (all) r.combined_accuracy = static_cast<double>(corrupted_ok + clean_ok) / static_cast<double>(all);
    return r;
}

CorruptionErrorReport eval_per_corruption(const BatchClassifier& classify, const CorruptedCorpus& corpus) {
    const auto labels = all_corruptions();
    return eval_per_corruption(classify, corpus, labels, kAllSeverities);
}

bool aggregates_consistent(const CorruptionErrorReport& r) {
    for (auto c : r.corruptions) {
        const auto it = r.uce.find(code(c));
        if (it == r.uce.end() || it->second != uce_sum(r, c)) return false;
    }
    for (const auto& [key, e] : r.error)
        if (!(e >= 0.0 && e <= 1.0)) return false;
    return r.mce == mce_of(r);
}

void write_report_tsv(std::ostream& out, const CorruptionErrorReport& r) {
    out << "section\tcorruption\tseverity\tvalue\n";
    for (auto c : r.corruptions)
        for (int s : r.severities) out << "error\t" << label_name(c) << '\t' << s << '\t' << num(r.cell(c, s)) << '\n';
    for (auto c : r.corruptions) out << "uCE\t" << label_name(c) << "\t-\t" << num(r.uce.at(code(c))) << '\n';
    out << "mCE\t-\t-\t" << num(r.mce) << '\n';
    out << "clean_accuracy\t-\t-\t" << num(r.clean_accuracy) << '\n';
    out << "corrupted_accuracy\t-\t-\t" << num(r.corrupted_accuracy) << '\n';
    out << "combined_accuracy\t-\t-\t" << num(r.combined_accuracy) << '\n';
    out << "clean_count\t-\t-\t" << r.clean_count << '\n';
    out << "corrupted_count\t-\t-\t" << r.corrupted_count << '\n';
}

CorruptionErrorReport read_report_tsv(std::istream& in) {
    CorruptionErrorReport r;
    std::string line;
    if (!std::getline(in, line) || line != "section\tcorruption\tseverity\tvalue")
        throw HarnessError("report: missing header");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string section, corruption, severity, value;
        if (!std::getline(row, section, '\t') || !std::getline(row, corruption, '\t') ||
            !std::getline(row, severity, '\t') || !std::getline(row, value))
            throw HarnessError("report: malformed row '" + line + "'");
        const double v = std::stod(value);
        if (section == "error") {
            const auto label = label_from_name(corruption);
            if (!label) throw HarnessError("report: unknown corruption '" + corruption + "'");
            const int s = std::stoi(severity);
            if (std::find(r.corruptions.begin(), r.corruptions.end(), *label) == r.corruptions.end())
                r.corruptions.push_back(*label);
            if (std::find(r.severities.begin(), r.severities.end(), s) == r.severities.end()) r.severities.push_back(s);
            r.error[{code(*label), s}] = v;
        } else if (section == "uCE") {
            const auto label = label_from_name(corruption);
            if (!label) throw HarnessError("report: unknown corruption '" + corruption + "'");
            r.uce[code(*label)] = v;
        } else if (section == "mCE") {
            r.mce = v;
        } else if (section == "clean_accuracy") {
            r.clean_accuracy = v;
        } else if (section == "corrupted_accuracy") {
            r.corrupted_accuracy = v;
        } else if (section == "combined_accuracy") {
            r.combined_accuracy = v;
        } else if (section == "clean_count") {
            r.clean_count = static_cast<std::size_t>(v);
        } else if (section == "corrupted_count") {
            r.corrupted_count = static_cast<std::size_t>(v);
        } else {
            throw HarnessError("report: unknown section '" + section + "'");
        }
    }
    return r;
}

// ---- gain matrix -------------------------------------------------------------

double GainMatrix::diagonal_mean(bool skip_natural) const {
    double s = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (skip_natural && labels[i] == CorruptionLabel::natural) continue;
        s += gain[i][i];
        ++n;
    }
    return n ? s / n : 0.0;
}

double GainMatrix::off_diagonal_mean(bool skip_natural) const {
    double s = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
        for (std::size_t j = 0; j < labels.size(); ++j) {
            if (i == j) continue;
            if (skip_natural && (labels[i] == CorruptionLabel::natural || labels[j] == CorruptionLabel::natural))
                continue;
            s += gain[i][j];
            ++n;
        }
    return n ? s / n : 0.0;
}

double GainMatrix::intra_noise_mean() const {
    double s = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
        for (std::size_t j = 0; j < labels.size(); ++j)
            if (i != j && family_of(labels[i]) == CorruptionFamily::noise &&
                family_of(labels[j]) == CorruptionFamily::noise) {
                s += gain[i][j];
                ++n;
            }
    return n ? s / n : 0.0;
}

GainMatrix gain_matrix(const BaseCnn& base, const BnTable& table, const CorruptedCorpus& corpus,
                       std::span<const CorruptionLabel> labels) {
    GainMatrix g;
    g.labels.assign(labels.begin(), labels.end());
    std::vector<std::vector<std::size_t>> idx;
    for (auto l : labels) {
        if (!table.contains(l)) throw HarnessError("gain_matrix: table has no entry for " + std::string(label_name(l)));
        idx.push_back(corpus.indices_of(l));
        if (idx.back().empty()) throw HarnessError("gain_matrix: no test images for " + std::string(label_name(l)));
    }
    const BaseCnn natural = apply_bn(base, table.at(CorruptionLabel::natural));
    for (std::size_t j = 0; j < labels.size(); ++j) g.natural_accuracy.push_back(accuracy_on(natural, corpus, idx[j]));
    g.gain.assign(labels.size(), std::vector<double>(labels.size(), 0.0));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const BaseCnn view = apply_bn(base, table.at(labels[i]));
        for (std::size_t j = 0; j < labels.size(); ++j)
            g.gain[i][j] = accuracy_on(view, corpus, idx[j]) - g.natural_accuracy[j];
    }
    return g;
}

void write_gain_tsv(std::ostream& out, const GainMatrix& g) {
    out << "stats";
    for (auto l : g.labels) out << '\t' << label_name(l);
    out << '\n';
    for (std::size_t i = 0; i < g.labels.size(); ++i) {
        out << label_name(g.labels[i]);
        for (double v : g.gain[i]) out << '\t' << num(v);
        out << '\n';
    }
    out << "natural_accuracy";
    for (double v : g.natural_accuracy) out << '\t' << num(v);
    out << '\n';
}

// ---- streaming ---------------------------------------------------------------

std::string_view policy_name(StreamPolicy p) {
    switch (p) {
        case StreamPolicy::static_natural: return "static_natural";
        case StreamPolicy::online_bn_window: return "online_bn_window";
        case StreamPolicy::adaptive_lookup: return "adaptive_lookup";
    }
    return "unknown";
}

void StreamConfig::validate() const {
    if (batch_size < 1) throw HarnessError("stream: batch size must be ≥ 1");
    if (total_batches < 1) throw HarnessError("stream: total batches must be ≥ 1");
    if (window < 1) throw HarnessError("stream: window must be ≥ 1");
    if (!(natural_blend >= 0.0 && natural_blend < 1.0)) throw HarnessError("stream: blend must lie in [0, 1)");
    if (periods.empty()) throw HarnessError("stream: no switch periods");
    for (int k : periods)
        if (k < 1) throw HarnessError("stream: switch period must be ≥ 1");
}

double StreamResult::accuracy(StreamPolicy p, int period) const {
    for (const auto& r : rows)
        if (r.policy == p && r.period == period) return r.accuracy;
    throw HarnessError("stream: no row for " + std::string(policy_name(p)) + " at K=" + std::to_string(period));
}

std::vector<StreamBatch> stream_schedule(const StreamConfig& cfg, int period, const CorruptedCorpus& corpus,
                                         std::span<const CorruptionLabel> corruptions) {
    cfg.validate();
    if (period < 1) throw HarnessError("stream: switch period must be ≥ 1");
    if (corruptions.empty()) throw HarnessError("stream: no corruptions");

    std::map<CorruptionLabel, std::vector<std::size_t>> pool;
    for (auto c : corruptions) {
        auto idx = corpus.indices_of(c);
        if (idx.empty()) throw HarnessError("stream: empty pool for " + std::string(label_name(c)));
        Rng rng(derive_seed(cfg.seed, {0x5EED, static_cast<std::uint64_t>(code(c))}));
        const auto perm = permutation(idx.size(), rng);
        std::vector<std::size_t> shuffled;
        for (auto p : perm) shuffled.push_back(idx[p]);
        pool[c] = std::move(shuffled);
    }

    const int segments = (cfg.total_batches + period - 1) / period;
    std::vector<CorruptionLabel> seg_labels;
    for (int s = 0; s < segments; ++s) seg_labels.push_back(corruptions[static_cast<std::size_t>(s) % corruptions.size()]);
    Rng rng(derive_seed(cfg.seed, {0x5C4E, static_cast<std::uint64_t>(period)}));
    std::shuffle(seg_labels.begin(), seg_labels.end(), rng);

    std::map<CorruptionLabel, std::size_t> drawn;
    std::vector<StreamBatch> out;
    const auto bs = static_cast<std::size_t>(cfg.batch_size);
    for (int b = 0; b < cfg.total_batches; ++b) {
        const CorruptionLabel c = seg_labels[static_cast<std::size_t>(b / period)];
        const auto& p = pool[c];
        StreamBatch batch{c, {}};
        const std::size_t n = drawn[c]++;
        for (std::size_t j = 0; j < bs; ++j) batch.records.push_back(p[(n * bs + j) % p.size()]);
        out.push_back(std::move(batch));
    }
    return out;
}

StreamResult stream_eval(const StreamConfig& cfg, const AdaptivePipeline& pipeline, const CorruptedCorpus& corpus,
                         std::span<const CorruptionLabel> corruptions) {
    cfg.validate();
    StreamResult result;
    const BaseCnn& natural = pipeline.view(CorruptionLabel::natural);
    for (int period : cfg.periods) {
        const auto schedule = stream_schedule(cfg, period, corpus, corruptions);
        std::vector<std::vector<Image>> batches;
        for (const auto& b : schedule) batches.push_back(images_at(corpus, b.records));

        for (StreamPolicy policy : cfg.policies) {
            std::size_t correct = 0, seen = 0;
            for (std::size_t b = 0; b < schedule.size(); ++b) {
                const auto& imgs = batches[b];
                std::vector<int> pred;
                switch (policy) {
                    case StreamPolicy::static_natural: pred = natural.predict(imgs); break;
                    case StreamPolicy::adaptive_lookup:
                        pred = pipeline.infer_batch(imgs, cfg.detection).predictions;
                        break;
                    case StreamPolicy::online_bn_window: {
                        const std::size_t first = b > static_cast<std::size_t>(cfg.window) ? b - cfg.window : 0;
                        if (first == b) {
                            pred = natural.predict(imgs);
                            break;
                        }
                        std::vector<Image> window;
                        for (std::size_t w = first; w < b; ++w)
                            window.insert(window.end(), batches[w].begin(), batches[w].end());
                        BnStats stats = estimate_bn(natural, window, window.size());
                        if (cfg.natural_blend > 0.0)
                            stats = merge_bn(natural.stats(), stats, cfg.natural_blend, 1.0 - cfg.natural_blend);
                        pred = apply_bn(natural, std::move(stats)).predict(imgs);
                        break;
                    }
                }
                correct += count_correct(pred, corpus, schedule[b].records);
                seen += imgs.size();
            }
            result.rows.push_back({policy, period, static_cast<double>(correct) / static_cast<double>(seen), seen});
        }
    }
    return result;
}

void write_stream_tsv(std::ostream& out, const StreamResult& r) {
    out << "policy\tperiod\taccuracy\tsamples\n";
    for (const auto& row : r.rows)
        out << policy_name(row.policy) << '\t' << row.period << '\t' << num(row.accuracy) << '\t' << row.samples << '\n';
}

}  // namespace bnad
