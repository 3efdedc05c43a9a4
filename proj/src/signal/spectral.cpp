#include "dscodec/signal/spectral.hpp"

#include <algorithm>
#include <cmath>

namespace dscodec::signal {

namespace {
double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }
}  // namespace

void SpectrogramConfig::validate() const {
    if (hop <= 0 || window_size < hop || fft_size < window_size)
        throw SignalError(SignalError::Kind::InvalidConfig,
                          "spectrogram config needs 0 < hop <= window_size <= fft_size (got hop " +
                              std::to_string(hop) + ", window " + std::to_string(window_size) + ", fft " +
                              std::to_string(fft_size) + ")");
}

ComplexSpectrogram stft(const Waveform& wav, const SpectrogramConfig& cfg) {
    cfg.validate();
    ad::NoGradGuard guard;
    auto x = ad::Var::from({1, static_cast<std::int64_t>(wav.size())}, wav.samples);
    auto spec = ad::stft(x, cfg.stft_options());
    ComplexSpectrogram out;
    out.frames = static_cast<int>(spec.dim(2));
    out.bins = static_cast<int>(spec.dim(3));
    const std::size_t plane = static_cast<std::size_t>(out.frames) * out.bins;
    out.values.resize(plane);
    for (std::size_t i = 0; i < plane; ++i) out.values[i] = {spec.values()[i], spec.values()[plane + i]};
    return out;
}

std::vector<double> mel_filterbank(int n_mels, int fft_size, int sample_rate, double fmin, double fmax) {
    if (fmax > sample_rate / 2.0 + 1e-9)
        throw SignalError(SignalError::Kind::InvalidConfig,
                          "mel fmax " + std::to_string(fmax) + " Hz exceeds Nyquist " +
                              std::to_string(sample_rate / 2) + " Hz");
    if (n_mels < 1 || fmin < 0.0 || fmin >= fmax)
        throw SignalError(SignalError::Kind::InvalidConfig, "mel filterbank needs n_mels >= 1 and 0 <= fmin < fmax");
    const int bins = fft_size / 2 + 1;
    const double mlo = hz_to_mel(fmin), mhi = hz_to_mel(fmax);
    std::vector<double> edges(static_cast<std::size_t>(n_mels + 2));
    for (int i = 0; i < n_mels + 2; ++i) edges[i] = mel_to_hz(mlo + (mhi - mlo) * i / (n_mels + 1));
    std::vector<double> fb(static_cast<std::size_t>(n_mels * bins), 0.0);
    for (int m = 0; m < n_mels; ++m) {
        const double lo = edges[m], center = edges[m + 1], hi = edges[m + 2];
        for (int k = 0; k < bins; ++k) {
            const double f = static_cast<double>(k) * sample_rate / fft_size;
            const double w = std::min((f - lo) / (center - lo), (hi - f) / (hi - center));
            fb[static_cast<std::size_t>(m) * bins + k] = std::max(0.0, w);
        }
    }
    return fb;
}

MelSpectrogram mel_spectrogram(const Waveform& wav, const SpectrogramConfig& cfg) {
    cfg.validate();
    ad::NoGradGuard guard;
    auto x = ad::Var::from({1, static_cast<std::int64_t>(wav.size())}, wav.samples);
    auto fb = mel_filterbank(cfg.n_mels, cfg.fft_size, wav.sample_rate, cfg.fmin, cfg.fmax);
    auto mag = ad::complex_magnitude(ad::stft(x, cfg.stft_options()), 0.0);
    const auto frames = mag.dim(1), bins = mag.dim(2);
    auto mel = ad::linear(ad::reshape(mag, {frames, bins}), ad::Var::from({cfg.n_mels, bins}, std::move(fb)));
    MelSpectrogram out;
    out.n_mels = cfg.n_mels;
    out.frames = static_cast<int>(frames);
    out.values.resize(static_cast<std::size_t>(cfg.n_mels * frames));
    for (std::int64_t f = 0; f < frames; ++f)
        for (int m = 0; m < cfg.n_mels; ++m)
            out.values[m * frames + f] = std::log(std::max(mel.values()[f * cfg.n_mels + m], kLogMelFloor));
    return out;
}

ad::Var log_mel(const ad::Var& x, const SpectrogramConfig& cfg, int sample_rate) {
    cfg.validate();
    auto fb = ad::Var::from({cfg.n_mels, cfg.fft_size / 2 + 1},
                            mel_filterbank(cfg.n_mels, cfg.fft_size, sample_rate, cfg.fmin, cfg.fmax));
    auto mag = ad::complex_magnitude(ad::stft(x, cfg.stft_options()), 1e-14);
    const auto batch = mag.dim(0), frames = mag.dim(1), bins = mag.dim(2);
    auto mel = ad::linear(ad::reshape(mag, {batch * frames, bins}), fb);
    return ad::reshape(ad::log_clamp(mel, kLogMelFloor), {batch, frames, cfg.n_mels});
}

}  // namespace dscodec::signal
