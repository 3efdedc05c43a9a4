#include "dscodec/codec/tokens.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

namespace dscodec::codec {

namespace {

constexpr char kMagic[4] = {'D', 'S', 'C', 'T'};

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(v) >> (8 * i)));
}

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}
    template <typename T>
    T get(const char* what) {
        if (pos_ + sizeof(T) > bytes_.size()) throw TokenFormatError(std::string("token file truncated in ") + what);
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += sizeof(T);
        return static_cast<T>(v);
    }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t TokenSequence::effective_size() const {
    std::uint64_t p = 1;
    for (int s : group_sizes) p *= static_cast<std::uint64_t>(s);
    return p;
}

std::vector<std::uint8_t> serialize_tokens(const TokenSequence& t) {
    if (t.group_sizes.empty() || t.group_sizes.size() > 255) throw TokenFormatError("token sequence needs 1..255 groups");
    for (int s : t.group_sizes)
        if (s < 2 || s > 65535) throw TokenFormatError("group size " + std::to_string(s) + " does not fit the format");
    if (t.token_rate < 1 || t.token_rate > 65535) throw TokenFormatError("token rate does not fit u16");
    const std::uint64_t eff = t.effective_size();
    if (eff > (std::uint64_t{1} << 32)) throw TokenFormatError("effective codebook size exceeds 2^32");
    const bool wide = eff > 65536;

    std::vector<std::uint8_t> out(kMagic, kMagic + 4);
    put<std::uint8_t>(out, kTokenFormatVersion);
    put<std::uint8_t>(out, t.product ? 1 : 0);
    put<std::uint16_t>(out, static_cast<std::uint16_t>(t.token_rate));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.group_sizes.size()));
    for (int s : t.group_sizes) put<std::uint16_t>(out, static_cast<std::uint16_t>(s));
    put<std::uint64_t>(out, t.codec_id);
    put<std::uint64_t>(out, t.original_length);
    put<std::uint64_t>(out, t.codes.size());
    out.reserve(out.size() + t.codes.size() * (wide ? 4 : 2));
    for (auto c : t.codes) {
        if (c >= eff) throw TokenFormatError("code " + std::to_string(c) + " out of range for effective size " + std::to_string(eff));
        if (wide)
            put<std::uint32_t>(out, static_cast<std::uint32_t>(c));
        else
            put<std::uint16_t>(out, static_cast<std::uint16_t>(c));
    }
    return out;
}

TokenSequence deserialize_tokens(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw TokenFormatError("bad magic: not a token file");
    Reader r(bytes);
    for (int i = 0; i < 4; ++i) r.get<std::uint8_t>("magic");
    const auto version = r.get<std::uint8_t>("version");
    if (version != kTokenFormatVersion)
        throw TokenFormatError("unsupported token format version " + std::to_string(version));
    const auto flags = r.get<std::uint8_t>("flags");
    if (flags & ~1u) throw TokenFormatError("unknown flag bits set");
    TokenSequence t;
    t.product = (flags & 1u) != 0;
    t.token_rate = r.get<std::uint16_t>("token rate");
    const auto n_groups = r.get<std::uint8_t>("group count");
    if (n_groups == 0) throw TokenFormatError("token file declares zero groups");
    for (int i = 0; i < n_groups; ++i) {
        const int s = r.get<std::uint16_t>("group sizes");
        if (s < 2) throw TokenFormatError("group size below 2");
        t.group_sizes.push_back(s);
    }
    t.codec_id = r.get<std::uint64_t>("codec id");
    t.original_length = r.get<std::uint64_t>("original length");
    const auto n = r.get<std::uint64_t>("code count");
    const std::uint64_t eff = t.effective_size();
    if (eff > (std::uint64_t{1} << 32)) throw TokenFormatError("effective codebook size exceeds 2^32");
    const bool wide = eff > 65536;
    const std::size_t width = wide ? 4 : 2;
    if (n > r.remaining() / width) throw TokenFormatError("token file truncated in codes");
    if (r.remaining() != n * width) throw TokenFormatError("trailing bytes after codes");
    t.codes.resize(n);
    for (auto& c : t.codes) {
        c = wide ? r.get<std::uint32_t>("codes") : r.get<std::uint16_t>("codes");
        if (c >= eff) throw TokenFormatError("code " + std::to_string(c) + " out of range for effective size " + std::to_string(eff));
    }
    return t;
}

void write_tokens(const std::filesystem::path& path, const TokenSequence& tokens) {
    const auto bytes = serialize_tokens(tokens);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("failed writing " + path.string());
}

TokenSequence read_tokens(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open token file " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return deserialize_tokens(bytes);
}

}  // namespace dscodec::codec
