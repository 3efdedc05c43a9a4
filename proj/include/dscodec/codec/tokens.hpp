#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace dscodec::codec {

struct TokenSequence {
    std::vector<std::uint64_t> codes;
    std::uint64_t codec_id = 0;
    std::vector<int> group_sizes;
    bool product = false;
    int token_rate = 0;
    std::uint64_t original_length = 0;

    std::uint64_t effective_size() const;
    bool operator==(const TokenSequence&) const = default;
};

class TokenFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// "DSCT" | version u8 | flags u8 (bit0 PQ) | token_rate u16 | n_groups u8 |
// group sizes u16 x n | codec_id u64 | original_length u64 | n_codes u64 |
// codes (u16 when the effective size <= 65536, else u32). Little-endian.
std::vector<std::uint8_t> serialize_tokens(const TokenSequence& tokens);
TokenSequence deserialize_tokens(const std::vector<std::uint8_t>& bytes);

void write_tokens(const std::filesystem::path& path, const TokenSequence& tokens);
TokenSequence read_tokens(const std::filesystem::path& path);

inline constexpr std::uint8_t kTokenFormatVersion = 1;

}  // namespace dscodec::codec
