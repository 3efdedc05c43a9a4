#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace dscodec::signal {

inline constexpr int kCodecSampleRate = 16000;

// Mono signal, nominal amplitude range [-1, 1].
struct Waveform {
    std::vector<double> samples;
    int sample_rate = kCodecSampleRate;

    std::size_t size() const { return samples.size(); }
    double seconds() const { return static_cast<double>(samples.size()) / sample_rate; }
};

class SignalError : public std::runtime_error {
public:
    enum class Kind { Unreadable, UnsupportedEncoding, SampleRateMismatch, Unwritable, InvalidConfig, EmptyDataset, NonFinite };
    SignalError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

struct LoadOptions {
    int expected_rate = kCodecSampleRate;
    // Resample other rates to expected_rate instead of failing.
    bool allow_resample = false;
};

// PCM 8/16/24/32-bit integer RIFF WAV (mono or stereo; stereo is averaged).
Waveform load_wav(const std::filesystem::path& path, const LoadOptions& opt = {});
// PCM16 little-endian mono. Out-of-range samples saturate.
void save_wav(const std::filesystem::path& path, const Waveform& wav);

std::vector<std::uint8_t> encode_wav_pcm16(const Waveform& wav);
Waveform decode_wav(const std::vector<std::uint8_t>& bytes, const LoadOptions& opt = {},
                    const std::string& origin = "<memory>");

// Rational polyphase resampling with a Kaiser-windowed sinc filter.
std::vector<double> resample(const std::vector<double>& x, int from_rate, int to_rate);

}  // namespace dscodec::signal
