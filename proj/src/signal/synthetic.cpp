#include "dscodec/signal/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dscodec/util/random.hpp"

namespace dscodec::signal {

namespace {

// Two-pole resonator at `freq` with bandwidth `bw`, unity gain at DC-ish.
struct Resonator {
    double a1 = 0.0, a2 = 0.0, gain = 1.0, y1 = 0.0, y2 = 0.0;
    Resonator(double freq, double bw, int sr) {
        const double r = std::exp(-std::numbers::pi * bw / sr);
        a1 = 2.0 * r * std::cos(2.0 * std::numbers::pi * freq / sr);
        a2 = -r * r;
        gain = 1.0 - a1 - a2;
    }
    double step(double x) {
        const double y = gain * x + a1 * y1 + a2 * y2;
        y2 = y1;
        y1 = y;
        return y;
    }
};

double envelope(std::size_t i, std::size_t n) {
    const std::size_t ramp = std::min<std::size_t>(n / 4, 160);
    if (ramp == 0) return 1.0;
    if (i < ramp) return 0.5 - 0.5 * std::cos(std::numbers::pi * i / ramp);
    if (i >= n - ramp) return 0.5 - 0.5 * std::cos(std::numbers::pi * (n - i) / ramp);
    return 1.0;
}

}  // namespace

Waveform synth_speech_like(double seconds, std::uint64_t seed, int sample_rate) {
    util::Rng rng(seed);
    const auto total = static_cast<std::size_t>(std::llround(seconds * sample_rate));
    Waveform w;
    w.sample_rate = sample_rate;
    w.samples.reserve(total);
    double phase = 0.0;
    while (w.samples.size() < total) {
        const double kind = rng.uniform();
        std::size_t n;
        if (kind < 0.6) {
            n = static_cast<std::size_t>(rng.uniform(0.08, 0.25) * sample_rate);
            const double f0_start = rng.uniform(90.0, 220.0);
            const double f0_end = f0_start * rng.uniform(0.8, 1.25);
            Resonator f1(rng.uniform(300.0, 800.0), 80.0, sample_rate);
            Resonator f2(rng.uniform(900.0, 2200.0), 120.0, sample_rate);
            Resonator f3(rng.uniform(2400.0, 3200.0), 200.0, sample_rate);
            const double amp = rng.uniform(0.4, 1.0);
            for (std::size_t i = 0; i < n; ++i) {
                const double f0 = f0_start + (f0_end - f0_start) * static_cast<double>(i) / n;
                phase += 2.0 * std::numbers::pi * f0 / sample_rate;
                if (phase > 2.0 * std::numbers::pi) phase -= 2.0 * std::numbers::pi;
                double src = 0.0;
                const int harmonics = static_cast<int>(4000.0 / f0);
                for (int h = 1; h <= harmonics; ++h) src += std::sin(h * phase) / h;
                src += 0.02 * rng.normal();
                const double y = 0.5 * f1.step(src) + 0.3 * f2.step(src) + 0.2 * f3.step(src);
                w.samples.push_back(amp * envelope(i, n) * y);
            }
        } else if (kind < 0.85) {
            n = static_cast<std::size_t>(rng.uniform(0.06, 0.15) * sample_rate);
            const double amp = rng.uniform(0.05, 0.25);
            double prev = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double x = rng.normal();
                w.samples.push_back(amp * envelope(i, n) * (x - 0.9 * prev));  // pre-emphasized noise
                prev = x;
            }
        } else {
            n = static_cast<std::size_t>(rng.uniform(0.05, 0.2) * sample_rate);
            for (std::size_t i = 0; i < n; ++i) w.samples.push_back(0.002 * rng.normal());
        }
    }
    w.samples.resize(total);
    double peak = 0.0;
    for (double v : w.samples) peak = std::max(peak, std::abs(v));
    if (peak > 0.0)
        for (double& v : w.samples) v *= 0.5 / peak;
    return w;
}

std::vector<Waveform> synth_corpus(int count, double seconds, std::uint64_t seed) {
    std::vector<Waveform> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) out.push_back(synth_speech_like(seconds, util::derive_seed(seed, i + 1)));
    return out;
}

}  // namespace dscodec::signal
