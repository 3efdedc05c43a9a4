#include "dscodec/eval/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <numeric>
#include <regex>

#include "dscodec/signal/fft.hpp"

namespace dscodec::eval {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Symmetric Hann without the zero end points (numpy hanning(n + 2)[1:-1]).
std::vector<double> inner_hann(int n) {
    std::vector<double> w(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) w[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * M_PI * (i + 1) / (n + 1));
    return w;
}

using Frames = std::vector<std::vector<double>>;

Frames windowed_frames(const std::vector<double>& x, int len, int hop, const std::vector<double>& w) {
    Frames out;
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(x.size()) - len; i += hop) {
        std::vector<double> f(static_cast<std::size_t>(len));
        for (int k = 0; k < len; ++k) f[static_cast<std::size_t>(k)] = w[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(i + k)];
        out.push_back(std::move(f));
    }
    return out;
}

std::vector<double> overlap_add(const Frames& frames, int hop) {
    if (frames.empty()) return {};
    const std::size_t len = frames[0].size();
    std::vector<double> out((frames.size() - 1) * static_cast<std::size_t>(hop) + len, 0.0);
    for (std::size_t f = 0; f < frames.size(); ++f)
        for (std::size_t k = 0; k < len; ++k) out[f * static_cast<std::size_t>(hop) + k] += frames[f][k];
    return out;
}

double norm(const std::vector<double>& v) {
    return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

// (bands, frames) envelope.
std::vector<std::vector<double>> band_envelopes(const std::vector<double>& x, const StoiConfig& cfg,
                                                const std::vector<std::vector<double>>& obm) {
    const auto w = inner_hann(cfg.frame);
    const Frames frames = windowed_frames(x, cfg.frame, cfg.frame / 2, w);
    auto& fft = signal::cached_fft(cfg.fft);
    std::vector<double> buf(static_cast<std::size_t>(cfg.fft));
    std::vector<std::complex<double>> spec(static_cast<std::size_t>(fft.bins()));
    std::vector<std::vector<double>> env(obm.size(), std::vector<double>(frames.size()));
    for (std::size_t t = 0; t < frames.size(); ++t) {
        std::fill(buf.begin(), buf.end(), 0.0);
        std::copy(frames[t].begin(), frames[t].end(), buf.begin());
        fft.forward(buf, spec);
        for (std::size_t b = 0; b < obm.size(); ++b) {
            double s = 0.0;
            for (std::size_t k = 0; k < spec.size(); ++k) s += obm[b][k] * std::norm(spec[k]);
            env[b][t] = std::sqrt(s);
        }
    }
    return env;
}

}  // namespace

std::vector<std::vector<double>> third_octave_bands(int fs, int fft, int bands, double min_freq) {
    const int bins = fft / 2 + 1;
    std::vector<double> f(static_cast<std::size_t>(bins));
    for (int i = 0; i < bins; ++i) f[static_cast<std::size_t>(i)] = static_cast<double>(fs) * i / fft;
    auto nearest = [&](double target) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < f.size(); ++i)
            if ((f[i] - target) * (f[i] - target) < (f[best] - target) * (f[best] - target)) best = i;
        return best;
    };
    std::vector<std::vector<double>> obm(static_cast<std::size_t>(bands), std::vector<double>(f.size(), 0.0));
    for (int k = 0; k < bands; ++k) {
        const std::size_t lo = nearest(min_freq * std::pow(2.0, (2.0 * k - 1.0) / 6.0));
        const std::size_t hi = nearest(min_freq * std::pow(2.0, (2.0 * k + 1.0) / 6.0));
        for (std::size_t i = lo; i < hi; ++i) obm[static_cast<std::size_t>(k)][i] = 1.0;
    }
    return obm;
}

double stoi(const Waveform& reference, const Waveform& degraded, const StoiConfig& cfg) {
    if (reference.sample_rate != degraded.sample_rate)
        throw MetricError("stoi: sample rates differ (" + std::to_string(reference.sample_rate) + " vs " +
                          std::to_string(degraded.sample_rate) + ")");
    if (reference.size() != degraded.size())
        throw MetricError("stoi: signal lengths differ (" + std::to_string(reference.size()) + " vs " +
                          std::to_string(degraded.size()) + ")");
    auto x = signal::resample(reference.samples, reference.sample_rate, cfg.fs);
    auto y = signal::resample(degraded.samples, degraded.sample_rate, cfg.fs);

    // drop frames more than dyn_range below the loudest reference frame
    const int hop = cfg.frame / 2;
    const auto w = inner_hann(cfg.frame);
    Frames xf = windowed_frames(x, cfg.frame, hop, w), yf = windowed_frames(y, cfg.frame, hop, w);
    std::vector<double> energy(xf.size());
    for (std::size_t i = 0; i < xf.size(); ++i) energy[i] = 20.0 * std::log10(norm(xf[i]) + kEps);
    const double peak = energy.empty() ? 0.0 : *std::max_element(energy.begin(), energy.end());
    Frames xk, yk;
    for (std::size_t i = 0; i < xf.size(); ++i)
        if (peak - cfg.dyn_range - energy[i] < 0) {
            xk.push_back(std::move(xf[i]));
            yk.push_back(std::move(yf[i]));
        }
    x = overlap_add(xk, hop);
    y = overlap_add(yk, hop);

    const auto obm = third_octave_bands(cfg.fs, cfg.fft, cfg.bands, cfg.min_freq);
    const auto xe = band_envelopes(x, cfg, obm), ye = band_envelopes(y, cfg, obm);
    const std::size_t frames = xe.empty() ? 0 : xe[0].size();
    const auto n = static_cast<std::size_t>(cfg.segment);
    if (frames < n)
        throw MetricError("stoi: signal too short (" + std::to_string(frames) + " non-silent frames, need " +
                          std::to_string(n) + ")");

    const double clip = std::pow(10.0, -cfg.beta / 20.0);
    double total = 0.0;
    std::size_t count = 0;
    std::vector<double> xs(n), ys(n);
    for (std::size_t m = n; m <= frames; ++m)
        for (std::size_t b = 0; b < xe.size(); ++b) {
            std::copy(xe[b].begin() + static_cast<std::ptrdiff_t>(m - n), xe[b].begin() + static_cast<std::ptrdiff_t>(m), xs.begin());
            std::copy(ye[b].begin() + static_cast<std::ptrdiff_t>(m - n), ye[b].begin() + static_cast<std::ptrdiff_t>(m), ys.begin());
            const double scale = norm(xs) / (norm(ys) + kEps);
            for (std::size_t i = 0; i < n; ++i) ys[i] = std::min(ys[i] * scale, xs[i] * (1.0 + clip));
            const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(n);
            const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) xs[i] -= mx, ys[i] -= my;
            const double nx = norm(xs) + kEps, ny = norm(ys) + kEps;
            double c = 0.0;
            for (std::size_t i = 0; i < n; ++i) c += (xs[i] / nx) * (ys[i] / ny);
            total += c;
            ++count;
        }
    return total / static_cast<double>(count);
}

// ---------------------------------------------------------------------------

std::vector<bool> voicing(const Waveform& wav, const VuvConfig& cfg) {
    const int sr = wav.sample_rate;
    const auto len = static_cast<std::int64_t>(std::lround(cfg.frame_ms * sr / 1000.0));
    const auto hop = static_cast<std::int64_t>(std::lround(cfg.hop_ms * sr / 1000.0));
    const auto lag_lo = static_cast<std::int64_t>(std::floor(sr / cfg.max_f0));
    const auto lag_hi = std::min<std::int64_t>(static_cast<std::int64_t>(std::ceil(sr / cfg.min_f0)), len - 1);
    if (len < 2 || hop < 1 || lag_lo < 1 || lag_lo > lag_hi)
        throw MetricError("voicing: frame/lag configuration is empty at " + std::to_string(sr) + " Hz");
    const auto total = static_cast<std::int64_t>(wav.size());
    const std::int64_t frames = total == 0 ? 0 : 1 + std::max<std::int64_t>(0, (total - len + hop - 1) / hop);

    std::vector<std::vector<double>> buf(static_cast<std::size_t>(frames));
    std::vector<double> rms(static_cast<std::size_t>(frames));
    for (std::int64_t f = 0; f < frames; ++f) {
        auto& x = buf[static_cast<std::size_t>(f)];
        x.assign(static_cast<std::size_t>(len), 0.0);
        for (std::int64_t i = 0; i < len && f * hop + i < total; ++i)
            x[static_cast<std::size_t>(i)] = wav.samples[static_cast<std::size_t>(f * hop + i)];
        const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(len);
        for (double& v : x) v -= mean;
        rms[static_cast<std::size_t>(f)] = norm(x) / std::sqrt(static_cast<double>(len));
    }
    const double loudest = rms.empty() ? 0.0 : *std::max_element(rms.begin(), rms.end());
    const double gate = std::max(cfg.min_rms, loudest * std::pow(10.0, -cfg.silence_db / 20.0));

    std::vector<bool> out(static_cast<std::size_t>(frames), false);
    for (std::int64_t f = 0; f < frames; ++f) {
        if (rms[static_cast<std::size_t>(f)] < gate) continue;
        const auto& x = buf[static_cast<std::size_t>(f)];
        double best = 0.0;
        for (std::int64_t lag = lag_lo; lag <= lag_hi; ++lag) {
            double xy = 0.0, xx = 0.0, yy = 0.0;
            for (std::int64_t n = 0; n + lag < len; ++n) {
                const double a = x[static_cast<std::size_t>(n)], b = x[static_cast<std::size_t>(n + lag)];
                xy += a * b;
                xx += a * a;
                yy += b * b;
            }
            if (xx > 0 && yy > 0) best = std::max(best, xy / std::sqrt(xx * yy));
        }
        out[static_cast<std::size_t>(f)] = best > cfg.threshold;
    }
    return out;
}

double Confusion::precision() const { return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp); }
double Confusion::recall() const { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn); }
double Confusion::f1() const {
    const auto d = 2 * tp + fp + fn;
    return d == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(d);
}

Confusion confusion(const std::vector<bool>& reference, const std::vector<bool>& degraded) {
    Confusion c;
    const std::size_t n = std::min(reference.size(), degraded.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (reference[i] && degraded[i]) ++c.tp;
        else if (!reference[i] && degraded[i]) ++c.fp;
        else if (reference[i] && !degraded[i]) ++c.fn;
        else ++c.tn;
    }
    return c;
}

double f1_from_labels(const std::vector<bool>& reference, const std::vector<bool>& degraded) {
    const auto c = confusion(reference, degraded);
    if (c.tp + c.fn == 0) return c.fp == 0 ? 1.0 : 0.0;
    return c.f1();
}

double f1_vuv(const Waveform& reference, const Waveform& degraded, const VuvConfig& cfg) {
    if (reference.sample_rate != degraded.sample_rate) throw MetricError("f1_vuv: sample rates differ");
    return f1_from_labels(voicing(reference, cfg), voicing(degraded, cfg));
}

// ---------------------------------------------------------------------------

namespace {

std::mutex registry_mutex;
PairMetric pesq_fn;
SingleMetric utmos_fn;

}  // namespace

void register_pesq(PairMetric fn) {
    std::lock_guard lock(registry_mutex);
    pesq_fn = std::move(fn);
}
void clear_pesq() { register_pesq(nullptr); }
bool pesq_available() {
    std::lock_guard lock(registry_mutex);
    return static_cast<bool>(pesq_fn);
}

std::optional<double> pesq(const Waveform& reference, const Waveform& degraded) {
    PairMetric fn;
    {
        std::lock_guard lock(registry_mutex);
        fn = pesq_fn;
    }
    if (!fn) return std::nullopt;
    if (reference.sample_rate != 16000) throw MetricError("pesq: wideband mode needs 16 kHz input");
    const double v = fn(reference, degraded);
    if (!(v >= kPesqMin && v <= kPesqMax))
        throw MetricError("pesq adapter returned " + std::to_string(v) + ", outside [-0.5, 4.644]");
    return v;
}

void register_utmos(SingleMetric fn) {
    std::lock_guard lock(registry_mutex);
    utmos_fn = std::move(fn);
}
void clear_utmos() { register_utmos(nullptr); }
bool utmos_available() {
    std::lock_guard lock(registry_mutex);
    return static_cast<bool>(utmos_fn);
}
std::optional<double> utmos(const Waveform& wav) {
    SingleMetric fn;
    {
        std::lock_guard lock(registry_mutex);
        fn = utmos_fn;
    }
    if (!fn) return std::nullopt;
    return fn(wav);
}

PairMetric command_pesq(std::string command, std::filesystem::path scratch_dir) {
    return [command = std::move(command), dir = std::move(scratch_dir)](const Waveform& ref, const Waveform& deg) {
        static std::atomic<std::uint64_t> counter{0};
        std::filesystem::create_directories(dir);
        const auto id = std::to_string(counter++);
        const auto rp = dir / ("pesq_ref_" + id + ".wav"), dp = dir / ("pesq_deg_" + id + ".wav");
        signal::save_wav(rp, ref);
        signal::save_wav(dp, deg);
        const std::string cmd = command + " '" + rp.string() + "' '" + dp.string() + "'";
        std::string output;
        int status = -1;
        if (FILE* p = popen(cmd.c_str(), "r")) {
            char buf[256];
            while (std::fgets(buf, sizeof buf, p)) output += buf;
            status = pclose(p);
        }
        std::filesystem::remove(rp);
        std::filesystem::remove(dp);
        if (status != 0) throw MetricError("pesq command failed (status " + std::to_string(status) + "): " + cmd);
        static const std::regex number(R"([-+]?\d+(\.\d*)?([eE][-+]?\d+)?)");
        std::string last;
        for (auto it = std::sregex_iterator(output.begin(), output.end(), number); it != std::sregex_iterator(); ++it)
            last = it->str();
        if (last.empty()) throw MetricError("pesq command printed no score: " + output);
        return std::stod(last);
    };
}

}  // namespace dscodec::eval
