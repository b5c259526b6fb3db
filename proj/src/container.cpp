#include "bnad/container.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>

#include "bnad/dataio.hpp"

namespace bnad {

namespace {

constexpr std::array<std::uint8_t, 4> kMagic{'B', 'N', 'A', 'D'};

class Writer {
public:
    void u16(std::uint16_t v) { put(v, 2); }
    void u32(std::uint32_t v) { put(v, 4); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void raw(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
    std::vector<std::uint8_t>& bytes() { return out_; }

private:
    void put(std::uint32_t v, int n) {
        for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> b) : in_(b) {}
    std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
    std::uint32_t u32() { return get(4); }
    float f32() { return std::bit_cast<float>(u32()); }
    std::span<const std::uint8_t> raw(std::size_t n) {
        need(n);
        auto s = in_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    std::size_t remaining() const { return in_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (remaining() < n) throw FormatError(FormatErrorKind::truncated, "BNAD: unexpected end of data");
    }
    std::uint32_t get(int n) {
        need(static_cast<std::size_t>(n));
        std::uint32_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string_view artifact_kind_name(ArtifactKind k) {
    switch (k) {
        case ArtifactKind::detector: return "detector";
        case ArtifactKind::base_cnn: return "base_cnn";
        case ArtifactKind::bn_table: return "bn_table";
        case ArtifactKind::spectrum: return "spectrum";
        case ArtifactKind::corpus: return "corpus";
    }
    return "unknown";
}

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    std::size_t off = 0;
    while (off < bytes.size()) {
        const auto n = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
        crc = ::crc32(crc, bytes.data() + off, n);
        off += n;
    }
    return static_cast<std::uint32_t>(crc);
}

void Container::add(std::string name, std::vector<std::uint32_t> shape, std::vector<float> payload) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    if (n != payload.size()) throw std::invalid_argument("BNAD chunk '" + name + "': shape does not match payload");
    chunks.push_back({std::move(name), std::move(shape), std::move(payload)});
}

void Container::add(std::string name, std::span<const float> payload) {
    add(std::move(name), {static_cast<std::uint32_t>(payload.size())}, {payload.begin(), payload.end()});
}

const Chunk& Container::get(std::string_view name) const {
    for (const auto& c : chunks)
        if (c.name == name) return c;
    throw FormatError(FormatErrorKind::missing_chunk, "BNAD: missing chunk '" + std::string(name) + "'");
}

bool Container::contains(std::string_view name) const {
    for (const auto& c : chunks)
        if (c.name == name) return true;
    return false;
}

std::vector<std::uint8_t> encode_container(const Container& c) {
    Writer w;
    w.raw(kMagic);
    w.u16(kContainerVersion);
    w.u16(static_cast<std::uint16_t>(c.kind));
    w.u32(static_cast<std::uint32_t>(c.chunks.size()));
    for (const auto& ch : c.chunks) {
        if (ch.name.size() > 0xFFFF || ch.shape.size() > 0xFFFF)
            throw std::invalid_argument("BNAD: chunk name or rank too large");
        w.u16(static_cast<std::uint16_t>(ch.name.size()));
        w.raw({reinterpret_cast<const std::uint8_t*>(ch.name.data()), ch.name.size()});
        w.u16(static_cast<std::uint16_t>(ch.shape.size()));
        for (auto d : ch.shape) w.u32(d);
        for (float v : ch.payload) w.f32(v);
    }
    const std::uint32_t crc = crc32_of(w.bytes());
    w.u32(crc);
    return std::move(w.bytes());
}

Container decode_container(std::span<const std::uint8_t> bytes) {
    constexpr std::size_t kHeader = 12;
    if (bytes.size() < 4 || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin()))
        throw FormatError(FormatErrorKind::bad_magic, "BNAD: bad magic");
    if (bytes.size() < kHeader + 4) throw FormatError(FormatErrorKind::truncated, "BNAD: file too short");

    Reader header(bytes.subspan(4, 8));
    const std::uint16_t version = header.u16();
    const std::uint16_t kind = header.u16();
    if (version > kContainerVersion)
        throw FormatError(FormatErrorKind::version_too_new,
                          "BNAD: version " + std::to_string(version) + " is newer than supported " +
                              std::to_string(kContainerVersion));

    const auto body = bytes.first(bytes.size() - 4);
    Reader tail(bytes.last(4));
    if (crc32_of(body) != tail.u32()) throw FormatError(FormatErrorKind::crc_mismatch, "BNAD: CRC mismatch");

    if (kind < 1 || kind > 5) throw FormatError(FormatErrorKind::malformed, "BNAD: unknown artifact kind");
    Container c;
    c.kind = static_cast<ArtifactKind>(kind);
    Reader r(body.subspan(8));
    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        Chunk ch;
        const std::uint16_t name_len = r.u16();
        const auto name = r.raw(name_len);
        ch.name.assign(name.begin(), name.end());
        const std::uint16_t rank = r.u16();
        std::uint64_t n = 1;
        for (std::uint16_t k = 0; k < rank; ++k) {
            ch.shape.push_back(r.u32());
            n *= ch.shape.back();
            if (n > r.remaining() / 4)
                throw FormatError(FormatErrorKind::malformed, "BNAD: chunk '" + ch.name + "' shape exceeds payload");
        }
        if (n > r.remaining() / 4)
            throw FormatError(FormatErrorKind::malformed, "BNAD: chunk '" + ch.name + "' shape exceeds payload");
        ch.payload.resize(static_cast<std::size_t>(n));
        for (auto& v : ch.payload) v = r.f32();
        c.chunks.push_back(std::move(ch));
    }
    if (r.remaining() != 0) throw FormatError(FormatErrorKind::malformed, "BNAD: trailing bytes after last chunk");
    return c;
}

Container decode_container(std::span<const std::uint8_t> bytes, ArtifactKind expected) {
    Container c = decode_container(bytes);
    if (c.kind != expected)
        throw FormatError(FormatErrorKind::wrong_kind, "BNAD: expected " + std::string(artifact_kind_name(expected)) +
                                                           ", found " + std::string(artifact_kind_name(c.kind)));
    return c;
}

void write_container(const std::filesystem::path& path, const Container& c) { write_bytes(path, encode_container(c)); }

Container read_container(const std::filesystem::path& path, ArtifactKind expected) {
    return decode_container(read_bytes(path), expected);
}

}  // namespace bnad
