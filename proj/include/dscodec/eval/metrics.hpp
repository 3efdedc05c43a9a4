#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dscodec/signal/wav.hpp"

namespace dscodec::eval {

using signal::Waveform;

class MetricError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---- STOI ----------------------------------------------------------------

struct StoiConfig {
    int fs = 10000;
    int frame = 256;
    int fft = 512;
    int bands = 15;
    double min_freq = 150.0;
    int segment = 30;  // frames, 384 ms
    double beta = -15.0;
    double dyn_range = 40.0;
};

// Short-time objective intelligibility. Signals are resampled to 10 kHz,
// silent frames (40 dB below the reference peak) are dropped, and clipped
// one-third-octave envelope correlations are averaged. Throws MetricError
// when fewer than 30 non-silent frames remain.
double stoi(const Waveform& reference, const Waveform& degraded, const StoiConfig& cfg = {});

// (bands, frames) one-third-octave band matrix for an fft of `fft` at `fs`.
std::vector<std::vector<double>> third_octave_bands(int fs, int fft, int bands, double min_freq);

// ---- voiced / unvoiced ---------------------------------------------------

struct VuvConfig {
    double frame_ms = 25.0;
    double hop_ms = 10.0;
    double threshold = 0.45;  // normalized autocorrelation peak
    double min_f0 = 60.0;
    double max_f0 = 400.0;
    double silence_db = 40.0;   // frames this far below the loudest are unvoiced
    double min_rms = 1e-4;
};

// One decision per hop; frames run past the end with zero padding.
std::vector<bool> voicing(const Waveform& wav, const VuvConfig& cfg = {});

struct Confusion {
    std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
    double precision() const;
    double recall() const;
    double f1() const;
};

// Sequences are compared over the shorter length; "voiced" is positive.
Confusion confusion(const std::vector<bool>& reference, const std::vector<bool>& degraded);
// F1 of degraded against reference voicing. With no voiced reference frame
// the score is 1 if the degraded signal is also all unvoiced, else 0.
double f1_from_labels(const std::vector<bool>& reference, const std::vector<bool>& degraded);
double f1_vuv(const Waveform& reference, const Waveform& degraded, const VuvConfig& cfg = {});

// ---- adapters ------------------------------------------------------------

inline constexpr double kPesqMin = -0.5;
inline constexpr double kPesqMax = 4.644;  // wideband ceiling 4.6439, usually quoted as 4.64

using PairMetric = std::function<double(const Waveform& reference, const Waveform& degraded)>;
using SingleMetric = std::function<double(const Waveform& wav)>;

void register_pesq(PairMetric fn);
void clear_pesq();
bool pesq_available();
// nullopt without an adapter; MetricError when the adapter leaves [-0.5, 4.644].
std::optional<double> pesq(const Waveform& reference, const Waveform& degraded);

void register_utmos(SingleMetric fn);
void clear_utmos();
bool utmos_available();
std::optional<double> utmos(const Waveform& wav);

// Runs `command <ref.wav> <deg.wav>` and parses the last number it prints.
// Scratch files go to `scratch_dir`.
PairMetric command_pesq(std::string command, std::filesystem::path scratch_dir);

}  // namespace dscodec::eval
