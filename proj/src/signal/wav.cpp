#include "dscodec/signal/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace dscodec::signal {

namespace {

std::uint32_t read_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t read_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace

Waveform decode_wav(const std::vector<std::uint8_t>& bytes, const LoadOptions& opt, const std::string& origin) {
    using K = SignalError::Kind;
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw SignalError(K::Unreadable, origin + ": not a RIFF/WAVE file");

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    const std::uint8_t* data = nullptr;
    std::size_t data_len = 0;
    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const std::uint8_t* chunk = bytes.data() + pos;
        const std::uint32_t len = read_u32(chunk + 4);
        const std::size_t body = pos + 8;
        const std::size_t avail = bytes.size() - body;
        if (std::memcmp(chunk, "fmt ", 4) == 0) {
            if (len < 16 || avail < 16) throw SignalError(K::Unreadable, origin + ": truncated fmt chunk");
            format = read_u16(bytes.data() + body);
            channels = read_u16(bytes.data() + body + 2);
            rate = read_u32(bytes.data() + body + 4);
            bits = read_u16(bytes.data() + body + 14);
            if (format == kFormatExtensible && len >= 26 && avail >= 26) format = read_u16(bytes.data() + body + 24);
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            data = bytes.data() + body;
            data_len = std::min<std::size_t>(len, avail);
            break;
        }
        pos = body + len + (len & 1);
    }
    if (channels == 0 || data == nullptr) throw SignalError(K::Unreadable, origin + ": missing fmt or data chunk");
    if (format != kFormatPcm || (bits != 8 && bits != 16 && bits != 24 && bits != 32))
        throw SignalError(K::UnsupportedEncoding,
                          origin + ": unsupported encoding (format " + std::to_string(format) + ", " +
                              std::to_string(bits) + " bits); only integer PCM is accepted");
    if (channels > 2) throw SignalError(K::UnsupportedEncoding, origin + ": more than two channels");

    const std::size_t width = bits / 8;
    const std::size_t frames = data_len / (width * channels);
    const double scale = 1.0 / std::ldexp(1.0, bits - 1);
    Waveform w;
    w.sample_rate = static_cast<int>(rate);
    w.samples.resize(frames);
    for (std::size_t f = 0; f < frames; ++f) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
            const std::uint8_t* p = data + (f * channels + c) * width;
            std::int64_t v = 0;
            switch (bits) {
                case 8: v = static_cast<std::int64_t>(p[0]) - 128; break;
                case 16: v = static_cast<std::int16_t>(read_u16(p)); break;
                case 24: v = static_cast<std::int32_t>((p[0] << 8) | (p[1] << 16) | (p[2] << 24)) >> 8; break;
                default: v = static_cast<std::int32_t>(read_u32(p)); break;
            }
            acc += static_cast<double>(v) * scale;
        }
        w.samples[f] = acc / channels;
    }

    if (w.sample_rate != opt.expected_rate) {
        if (!opt.allow_resample)
            throw SignalError(K::SampleRateMismatch, origin + ": sample rate " + std::to_string(w.sample_rate) +
                                                         " Hz, expected " + std::to_string(opt.expected_rate) +
                                                         " Hz (enable resampling to convert)");
        w.samples = resample(w.samples, w.sample_rate, opt.expected_rate);
        w.sample_rate = opt.expected_rate;
    }
    return w;
}

Waveform load_wav(const std::filesystem::path& path, const LoadOptions& opt) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SignalError(SignalError::Kind::Unreadable, path.string() + ": cannot open");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_wav(bytes, opt, path.string());
}

std::vector<std::uint8_t> encode_wav_pcm16(const Waveform& wav) {
    for (double v : wav.samples)
        if (!std::isfinite(v)) throw SignalError(SignalError::Kind::NonFinite, "save_wav: non-finite sample");
    const auto data_len = static_cast<std::uint32_t>(wav.samples.size() * 2);
    std::vector<std::uint8_t> out;
    out.reserve(44 + data_len);
    out.insert(out.end(), {'R', 'I', 'F', 'F'});
    put_u32(out, 36 + data_len);
    out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
    put_u32(out, 16);
    put_u16(out, kFormatPcm);
    put_u16(out, 1);
    put_u32(out, static_cast<std::uint32_t>(wav.sample_rate));
    put_u32(out, static_cast<std::uint32_t>(wav.sample_rate) * 2);
    put_u16(out, 2);
    put_u16(out, 16);
    out.insert(out.end(), {'d', 'a', 't', 'a'});
    put_u32(out, data_len);
    for (double v : wav.samples) {
        const double q = std::clamp(std::nearbyint(v * 32768.0), -32768.0, 32767.0);
        put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    }
    return out;
}

void save_wav(const std::filesystem::path& path, const Waveform& wav) {
    auto bytes = encode_wav_pcm16(wav);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw SignalError(SignalError::Kind::Unwritable, path.string() + ": cannot open for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw SignalError(SignalError::Kind::Unwritable, path.string() + ": write failed");
}

std::vector<double> resample(const std::vector<double>& x, int from_rate, int to_rate) {
    if (from_rate <= 0 || to_rate <= 0) throw SignalError(SignalError::Kind::InvalidConfig, "resample: bad rates");
    if (from_rate == to_rate) return x;
    const int g = std::gcd(from_rate, to_rate);
    const std::int64_t up = to_rate / g, down = from_rate / g;
    const std::int64_t factor = std::max(up, down);
    const double cutoff = 0.5 / static_cast<double>(factor);  // cycles per upsampled sample
    const std::int64_t half = 10 * factor;
    const double beta = 5.0;
    const double i0_beta = std::cyl_bessel_i(0.0, beta);
    std::vector<double> h(static_cast<std::size_t>(2 * half + 1));
    for (std::int64_t n = -half; n <= half; ++n) {
        const double t = static_cast<double>(n);
        const double arg = 2.0 * cutoff * t;
        const double sinc = n == 0 ? 1.0 : std::sin(M_PI * arg) / (M_PI * arg);
        const double r = t / static_cast<double>(half);
        const double kaiser = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0_beta;
        h[n + half] = static_cast<double>(up) * 2.0 * cutoff * sinc * kaiser;
    }
    const auto len = static_cast<std::int64_t>(x.size());
    const std::int64_t out_len = (len * up + down - 1) / down;
    std::vector<double> y(static_cast<std::size_t>(out_len), 0.0);
    for (std::int64_t m = 0; m < out_len; ++m) {
        // Position in the upsampled stream; only every up-th sample is nonzero.
        const std::int64_t center = m * down;
        const std::int64_t k_lo = std::max<std::int64_t>(0, (center - half + up - 1) / up);
        const std::int64_t k_hi = std::min<std::int64_t>(len - 1, (center + half) / up);
        double acc = 0.0;
        for (std::int64_t k = k_lo; k <= k_hi; ++k) acc += x[k] * h[center - k * up + half];
        y[m] = acc;
    }
    return y;
}

}  // namespace dscodec::signal
