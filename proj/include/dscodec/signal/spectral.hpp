#pragma once

#include <complex>
#include <vector>

#include "dscodec/ad/ops.hpp"
#include "dscodec/signal/wav.hpp"

namespace dscodec::signal {

struct SpectrogramConfig {
    int fft_size = 1024;
    int hop = 256;
    int window_size = 1024;
    int n_mels = 80;
    double fmin = 0.0;
    double fmax = 8000.0;

    // Throws SignalError(InvalidConfig) unless 0 < hop <= window_size <= fft_size.
    void validate() const;
    ad::StftOptions stft_options() const { return {fft_size, hop, window_size, false}; }
};

inline constexpr double kLogMelFloor = 1e-5;

struct ComplexSpectrogram {
    int frames = 0;
    int bins = 0;
    std::vector<std::complex<double>> values;  // frame-major: values[f * bins + k]

    std::complex<double> at(int frame, int bin) const { return values[static_cast<std::size_t>(frame) * bins + bin]; }
};

ComplexSpectrogram stft(const Waveform& wav, const SpectrogramConfig& cfg);

// Triangular filters (peak 1) between mel-spaced edges on the HTK mel scale,
// shape (n_mels, fft/2+1) row-major.
std::vector<double> mel_filterbank(int n_mels, int fft_size, int sample_rate, double fmin, double fmax);

struct MelSpectrogram {
    int n_mels = 0;
    int frames = 0;
    std::vector<double> values;  // mel-major: values[m * frames + f]

    double at(int mel, int frame) const { return values[static_cast<std::size_t>(mel) * frames + frame]; }
};

// log(max(mel(|STFT|), 1e-5)).
MelSpectrogram mel_spectrogram(const Waveform& wav, const SpectrogramConfig& cfg);

// Differentiable batched log-mel: x (B, T) -> (B, frames, n_mels).
ad::Var log_mel(const ad::Var& x, const SpectrogramConfig& cfg, int sample_rate);

}  // namespace dscodec::signal
