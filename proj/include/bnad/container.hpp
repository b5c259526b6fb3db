#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

// "BNAD" binary container shared by every persisted artifact.
//
//   offset  size  field
//   0       4     magic "BNAD"
//   4       2     format version (u16)
//   6       2     artifact kind (u16)
//   8       4     chunk count (u32)
//   then per chunk:
//           2     name length (u16), followed by the UTF-8 name
//           2     rank (u16), followed by rank × u32 dimensions
//           4·n   n = product(dims) little-endian IEEE-754 binary32 values
//   end     4     CRC-32 (IEEE, zlib polynomial) of every preceding byte
//
// All multi-byte integers are little-endian.
namespace bnad {

inline constexpr std::uint16_t kContainerVersion = 1;

enum class ArtifactKind : std::uint16_t {
    detector = 1,
    base_cnn = 2,
    bn_table = 3,
    spectrum = 4,
    corpus = 5,
};

std::string_view artifact_kind_name(ArtifactKind k);

enum class FormatErrorKind {
    bad_magic,
    version_too_new,
    crc_mismatch,
    truncated,
    malformed,
    wrong_kind,
    missing_chunk,
};

class FormatError : public std::runtime_error {
public:
    FormatError(FormatErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    FormatErrorKind kind() const { return kind_; }

private:
    FormatErrorKind kind_;
};

struct Chunk {
    std::string name;
    std::vector<std::uint32_t> shape;
    std::vector<float> payload;
};

struct Container {
    ArtifactKind kind = ArtifactKind::corpus;
    std::vector<Chunk> chunks;

    void add(std::string name, std::vector<std::uint32_t> shape, std::vector<float> payload);
    void add(std::string name, std::span<const float> payload);
    /// Throws FormatError(missing_chunk).
    const Chunk& get(std::string_view name) const;
    bool contains(std::string_view name) const;
};

std::vector<std::uint8_t> encode_container(const Container& c);
/// Throws FormatError with a distinct kind per failure.
Container decode_container(std::span<const std::uint8_t> bytes);
/// Decodes and additionally checks the artifact kind.
Container decode_container(std::span<const std::uint8_t> bytes, ArtifactKind expected);

void write_container(const std::filesystem::path& path, const Container& c);
Container read_container(const std::filesystem::path& path, ArtifactKind expected);

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes);

}  // namespace bnad
