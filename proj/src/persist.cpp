#include "bnad/persist.hpp"

#include <bit>
#include <cmath>
#include <string>

namespace bnad {

namespace {

std::vector<std::uint32_t> dims_of(const Tensor& t) {
    return {t.shape.begin(), t.shape.end()};
}

void add_tensor(Container& c, const std::string& name, const Tensor& t) { c.add(name, dims_of(t), t.data); }

Tensor tensor_of(const Chunk& ch) {
    return Tensor(std::vector<int>(ch.shape.begin(), ch.shape.end()), ch.payload);
}

Tensor tensor_of(const Container& c, std::string_view name, std::vector<int> expect_rank_dims = {}) {
    Tensor t = tensor_of(c.get(name));
    if (!expect_rank_dims.empty() && t.shape != expect_rank_dims)
        throw FormatError(FormatErrorKind::malformed, "BNAD: chunk '" + std::string(name) + "' has shape " +
                                                          shape_string(t.shape) + ", expected " +
                                                          shape_string(expect_rank_dims));
    return t;
}

void add_doubles(Container& c, const std::string& name, std::span<const double> values) {
    std::vector<float> payload;
    payload.reserve(values.size() * 4);
    for (double v : values) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        for (int k = 0; k < 4; ++k) payload.push_back(static_cast<float>((bits >> (16 * k)) & 0xFFFFu));
    }
    c.add(name, {static_cast<std::uint32_t>(values.size()), 4}, std::move(payload));
}

std::vector<double> doubles_of(const Container& c, std::string_view name) {
    const Chunk& ch = c.get(name);
    if (ch.shape.size() != 2 || ch.shape[1] != 4)
        throw FormatError(FormatErrorKind::malformed, "BNAD: chunk '" + std::string(name) + "' is not a double array");
    std::vector<double> out;
    out.reserve(ch.shape[0]);
    for (std::size_t i = 0; i < ch.shape[0]; ++i) {
        std::uint64_t bits = 0;
        for (int k = 0; k < 4; ++k) {
            const float piece = ch.payload[i * 4 + static_cast<std::size_t>(k)];
            if (!(piece >= 0.0f && piece <= 65535.0f) || piece != std::floor(piece))
                throw FormatError(FormatErrorKind::malformed, "BNAD: bad double piece in '" + std::string(name) + "'");
            bits |= static_cast<std::uint64_t>(piece) << (16 * k);
        }
        out.push_back(std::bit_cast<double>(bits));
    }
    return out;
}

int int_of(float v, int lo, int hi, std::string_view what) {
    if (!(v >= static_cast<float>(lo) && v <= static_cast<float>(hi)) || v != std::floor(v))
        throw FormatError(FormatErrorKind::malformed, "BNAD: bad " + std::string(what));
    return static_cast<int>(v);
}

void add_stats(Container& c, const std::string& prefix, const BnStats& s) {
    for (std::size_t l = 0; l < s.layers.size(); ++l) {
        c.add(prefix + "mean" + std::to_string(l), s.layers[l].mean);
        c.add(prefix + "var" + std::to_string(l), s.layers[l].var);
    }
}

BnStats stats_of(const Container& c, const std::string& prefix) {
    BnStats s;
    for (std::size_t l = 0; l < kBnLayers; ++l)
        s.layers.push_back({c.get(prefix + "mean" + std::to_string(l)).payload,
                            c.get(prefix + "var" + std::to_string(l)).payload});
    try {
        s.validate();
    } catch (const std::invalid_argument& e) {
        throw FormatError(FormatErrorKind::malformed, std::string("BNAD: ") + e.what());
    }
    return s;
}

void add_spectrum(Container& c, const std::string& prefix, const NaturalSpectrum& eps) {
    add_doubles(c, prefix + "grid", eps.grid.values);
    c.add(prefix + "meta", std::vector<float>{static_cast<float>(eps.grid.height), static_cast<float>(eps.grid.width),
                                              static_cast<float>(eps.count),
                                              static_cast<float>(eps.config.channels == ChannelMode::average),
                                              static_cast<float>(eps.config.pool)});
}

NaturalSpectrum spectrum_of(const Container& c, const std::string& prefix) {
    const Chunk& meta = c.get(prefix + "meta");
    if (meta.payload.size() != 5) throw FormatError(FormatErrorKind::malformed, "BNAD: bad spectrum metadata");
    NaturalSpectrum eps;
    eps.grid.height = int_of(meta.payload[0], 1, 1 << 16, "spectrum height");
    eps.grid.width = int_of(meta.payload[1], 1, 1 << 16, "spectrum width");
    eps.count = static_cast<std::size_t>(int_of(meta.payload[2], 0, 1 << 24, "spectrum count"));
    eps.config.channels = int_of(meta.payload[3], 0, 1, "channel mode") ? ChannelMode::average : ChannelMode::first;
    eps.config.pool = int_of(meta.payload[4], 1, 2, "pool");
    eps.grid.values = doubles_of(c, prefix + "grid");
    if (eps.grid.values.size() != static_cast<std::size_t>(eps.grid.height) * eps.grid.width)
        throw FormatError(FormatErrorKind::malformed, "BNAD: spectrum grid size mismatch");
    return eps;
}

}  // namespace

Container to_container(const DetectorModel& model, const NaturalSpectrum* eps) {
    Container c;
    c.kind = ArtifactKind::detector;
    add_tensor(c, "w1", model.w1);
    add_tensor(c, "b1", model.b1);
    add_tensor(c, "w2", model.w2);
    add_tensor(c, "b2", model.b2);
    add_tensor(c, "w3", model.w3);
    add_tensor(c, "b3", model.b3);
    if (eps) add_spectrum(c, "eps.", *eps);
    return c;
}

DetectorModel detector_from(const Container& c) {
    DetectorModel m;
    m.w1 = tensor_of(c, "w1");
    m.b1 = tensor_of(c, "b1");
    m.w2 = tensor_of(c, "w2");
    m.b2 = tensor_of(c, "b2");
    m.w3 = tensor_of(c, "w3");
    m.b3 = tensor_of(c, "b3");
    const bool ok = m.w1.rank() == 2 && m.w2.rank() == 2 && m.w3.rank() == 2 && m.b1.rank() == 1 &&
                    m.b2.rank() == 1 && m.b3.rank() == 1 && m.w2.dim(1) == m.w1.dim(0) && m.w3.dim(1) == m.w2.dim(0) &&
                    m.b1.dim(0) == m.w1.dim(0) && m.b2.dim(0) == m.w2.dim(0) && m.b3.dim(0) == m.w3.dim(0);
    if (!ok) throw FormatError(FormatErrorKind::malformed, "BNAD: inconsistent detector layer shapes");
    return m;
}

std::optional<NaturalSpectrum> detector_eps_from(const Container& c) {
    if (!c.contains("eps.meta")) return std::nullopt;
    return spectrum_of(c, "eps.");
}

Container to_container(const BaseCnn& model) {
    const BaseCnnParams& p = model.params();
    Container c;
    c.kind = ArtifactKind::base_cnn;
    for (std::size_t l = 0; l < kBnLayers; ++l) {
        add_tensor(c, "conv" + std::to_string(l), p.conv[l]);
        c.add("gamma" + std::to_string(l), p.gamma[l]);
        c.add("beta" + std::to_string(l), p.beta[l]);
    }
    add_tensor(c, "fc_weight", p.fc_weight);
    add_tensor(c, "fc_bias", p.fc_bias);
    add_doubles(c, "bn_eps", std::vector<double>{p.bn_eps});
    add_stats(c, "running.", model.stats());
    return c;
}

BaseCnn base_cnn_from(const Container& c) {
    auto p = std::make_shared<BaseCnnParams>();
    int in = kImageChannels;
    for (std::size_t l = 0; l < kBnLayers; ++l) {
        const int w = kBnWidths[l];
        p->conv[l] = tensor_of(c, "conv" + std::to_string(l), {w, in, 3, 3});
        p->gamma[l] = c.get("gamma" + std::to_string(l)).payload;
        p->beta[l] = c.get("beta" + std::to_string(l)).payload;
        if (p->gamma[l].size() != static_cast<std::size_t>(w) || p->beta[l].size() != static_cast<std::size_t>(w))
            throw FormatError(FormatErrorKind::malformed, "BNAD: BN affine width mismatch");
        in = w;
    }
    p->fc_weight = tensor_of(c, "fc_weight", {kNumClasses, kBnWidths.back()});
    p->fc_bias = tensor_of(c, "fc_bias", {kNumClasses});
    const auto eps = doubles_of(c, "bn_eps");
    if (eps.size() != 1 || !(eps[0] > 0.0)) throw FormatError(FormatErrorKind::malformed, "BNAD: bad BN eps");
    p->bn_eps = eps[0];
    return BaseCnn(std::move(p), stats_of(c, "running."));
}

Container to_container(const BnTable& table) {
    Container c;
    c.kind = ArtifactKind::bn_table;
    std::vector<float> codes;
    for (const auto& [label, stats] : table.entries) {
        codes.push_back(static_cast<float>(code(label)));
        add_stats(c, "L" + std::to_string(code(label)) + ".", stats);
    }
    c.add("labels", codes);
    return c;
}

BnTable bn_table_from(const Container& c) {
    BnTable t;
    for (float v : c.get("labels").payload) {
        const int k = int_of(v, 0, kNumLabels - 1, "label code");
        t.entries.emplace(label_from_code(k), stats_of(c, "L" + std::to_string(k) + "."));
    }
    if (!t.contains(CorruptionLabel::natural))
        throw FormatError(FormatErrorKind::malformed, "BNAD: BN table has no natural entry");
    return t;
}

Container to_container(const NaturalSpectrum& eps) {
    Container c;
    c.kind = ArtifactKind::spectrum;
    add_spectrum(c, "", eps);
    return c;
}

NaturalSpectrum spectrum_from(const Container& c) { return spectrum_of(c, ""); }

Container to_container(const CorruptedCorpus& corpus) {
    Container c;
    c.kind = ArtifactKind::corpus;
    const std::size_t n = corpus.size();
    std::vector<float> pixels, classes, labels, sev;
    pixels.reserve(n * kCifarPixels);
    for (const auto& r : corpus.records) {
        if (r.image.shape != std::vector<int>{kImageChannels, kImageSide, kImageSide})
            throw std::invalid_argument("corpus: images must be 3×32×32");
        pixels.insert(pixels.end(), r.image.data.begin(), r.image.data.end());
        classes.push_back(static_cast<float>(r.class_label));
        labels.push_back(static_cast<float>(code(r.corruption)));
        sev.push_back(static_cast<float>(r.severity));
    }
    const auto un = static_cast<std::uint32_t>(n);
    c.add("images", {un, kImageChannels, kImageSide, kImageSide}, std::move(pixels));
    c.add("class_labels", {un}, std::move(classes));
    c.add("corruptions", {un}, std::move(labels));
    c.add("severities", {un}, std::move(sev));
    return c;
}

CorruptedCorpus corpus_from(const Container& c) {
    const Chunk& img = c.get("images");
    const auto& cls = c.get("class_labels").payload;
    const auto& lab = c.get("corruptions").payload;
    const auto& sev = c.get("severities").payload;
    const std::size_t n = cls.size();
    if (img.shape.size() != 4 || img.shape[0] != n || img.shape[1] != kImageChannels || img.shape[2] != kImageSide ||
        img.shape[3] != kImageSide || lab.size() != n || sev.size() != n)
        throw FormatError(FormatErrorKind::malformed, "BNAD: inconsistent corpus chunks");
    CorruptedCorpus corpus;
    corpus.records.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        CorruptedRecord r;
        r.image = Image({kImageChannels, kImageSide, kImageSide},
                        std::vector<float>(img.payload.begin() + static_cast<std::ptrdiff_t>(i * kCifarPixels),
                                           img.payload.begin() + static_cast<std::ptrdiff_t>((i + 1) * kCifarPixels)));
        r.class_label = int_of(cls[i], 0, kNumClasses - 1, "class label");
        r.corruption = label_from_code(int_of(lab[i], 0, kNumLabels - 1, "corruption code"));
        r.severity = int_of(sev[i], 1, 5, "severity");
        corpus.records.push_back(std::move(r));
    }
    return corpus;
}

void save_detector(const std::filesystem::path& path, const DetectorModel& model, const NaturalSpectrum* eps) {
    write_container(path, to_container(model, eps));
}

DetectorModel load_detector(const std::filesystem::path& path, std::optional<NaturalSpectrum>* eps) {
    const Container c = read_container(path, ArtifactKind::detector);
    if (eps) *eps = detector_eps_from(c);
    return detector_from(c);
}

void save_base(const std::filesystem::path& path, const BaseCnn& model) { write_container(path, to_container(model)); }
BaseCnn load_base(const std::filesystem::path& path) {
    return base_cnn_from(read_container(path, ArtifactKind::base_cnn));
}

void save_table(const std::filesystem::path& path, const BnTable& table) { write_container(path, to_container(table)); }
BnTable load_table(const std::filesystem::path& path) { return bn_table_from(read_container(path, ArtifactKind::bn_table)); }

void save_spectrum(const std::filesystem::path& path, const NaturalSpectrum& eps) {
    write_container(path, to_container(eps));
}
NaturalSpectrum load_spectrum(const std::filesystem::path& path) {
    return spectrum_from(read_container(path, ArtifactKind::spectrum));
}

void save_corpus(const std::filesystem::path& path, const CorruptedCorpus& corpus) {
    write_container(path, to_container(corpus));
}
CorruptedCorpus load_corpus(const std::filesystem::path& path) {
    return corpus_from(read_container(path, ArtifactKind::corpus));
}

}  // namespace bnad
