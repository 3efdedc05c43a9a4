#include <cmath>
#include <complex>
#include <stdexcept>

#include "dscodec/ad/ops.hpp"
#include "dscodec/signal/fft.hpp"

namespace dscodec::ad {

namespace {

// numpy "reflect" indexing (edge sample not repeated), folded as often as needed.
std::int64_t reflect_index(std::int64_t p, std::int64_t len) {
    if (len == 1) return 0;
    const std::int64_t period = 2 * (len - 1);
    std::int64_t m = p % period;
    if (m < 0) m += period;
    return m < len ? m : period - m;
}

}  // namespace

Var reflect_pad(const Var& x, int left, int right) {
    const std::int64_t len = x.dim(-1);
    if ((left > 0 || right > 0) && len == 0) throw std::invalid_argument("reflect_pad of an empty signal");
    const std::int64_t rows = len == 0 ? 0 : x.numel() / len;
    const std::int64_t out_len = len + left + right;
    std::vector<std::int64_t> src(static_cast<std::size_t>(out_len));
    for (std::int64_t i = 0; i < out_len; ++i) src[i] = reflect_index(i - left, len);
    std::vector<double> out(static_cast<std::size_t>(rows * out_len));
    for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t i = 0; i < out_len; ++i) out[r * out_len + i] = x.values()[r * len + src[i]];
    Shape shape = x.shape();
    shape.back() = out_len;
    return make_result(std::move(shape), std::move(out), {x}, [=, src = std::move(src)](Node& self) {
        Node& px = *self.parents[0];
        if (!px.requires_grad) return;
        px.ensure_grad();
        for (std::int64_t r = 0; r < rows; ++r)
            for (std::int64_t i = 0; i < out_len; ++i) px.grad[r * len + src[i]] += self.grad[r * out_len + i];
    });
}

Var stft(const Var& x, const StftOptions& opt) {
    if (x.ndim() != 2) throw std::invalid_argument("stft expects (B, T)");
    if (opt.hop < 1 || opt.window_size < opt.hop || opt.fft_size < opt.window_size)
        throw std::invalid_argument("stft: need 1 <= hop <= window_size <= fft_size");
    const int n = opt.fft_size;
    const int bins = n / 2 + 1;
    const std::int64_t batch = x.dim(0), len = x.dim(1);
    const int pad = n / 2;
    Var padded = reflect_pad(x, pad, pad);
    const std::int64_t plen = len + 2 * pad;
    const std::int64_t frames = plen >= n ? 1 + (plen - n) / opt.hop : 0;

    std::vector<double> window(static_cast<std::size_t>(n), 0.0);
    {
        auto w = signal::hann_window(opt.window_size);
        const int off = (n - opt.window_size) / 2;
        for (int i = 0; i < opt.window_size; ++i) window[off + i] = w[i];
    }
    double norm = 1.0;
    if (opt.normalized) {
        double s = 0.0;
        for (double v : window) s += v * v;
        norm = 1.0 / std::sqrt(s);
    }

    auto& fft = signal::cached_fft(n);
    std::vector<double> buf(static_cast<std::size_t>(n));
    std::vector<std::complex<double>> spec(static_cast<std::size_t>(bins));
    std::vector<double> out(static_cast<std::size_t>(batch * 2 * frames * bins));
    const std::int64_t plane = frames * bins;
    for (std::int64_t b = 0; b < batch; ++b)
        for (std::int64_t f = 0; f < frames; ++f) {
            const double* src = padded.values().data() + b * plen + f * opt.hop;
            for (int i = 0; i < n; ++i) buf[i] = src[i] * window[i];
            fft.forward(buf, spec);
            double* re = out.data() + (b * 2) * plane + f * bins;
            double* im = out.data() + (b * 2 + 1) * plane + f * bins;
            for (int k = 0; k < bins; ++k) {
                re[k] = spec[k].real() * norm;
                im[k] = spec[k].imag() * norm;
            }
        }

    return make_result({batch, 2, frames, bins}, std::move(out), {padded}, [=](Node& self) {
        Node& pp = *self.parents[0];
        if (!pp.requires_grad) return;
        pp.ensure_grad();
        auto& ifft = signal::cached_fft(n);
        std::vector<std::complex<double>> g(static_cast<std::size_t>(bins));
        std::vector<double> y(static_cast<std::size_t>(n));
        for (std::int64_t b = 0; b < batch; ++b)
            for (std::int64_t f = 0; f < frames; ++f) {
                const double* gre = self.grad.data() + (b * 2) * plane + f * bins;
                const double* gim = self.grad.data() + (b * 2 + 1) * plane + f * bins;
                // Adjoint of the half-spectrum DFT: interior bins are counted
                // twice by the Hermitian c2r, DC and Nyquist once.
                for (int k = 0; k < bins; ++k) {
                    const bool edge = k == 0 || (n % 2 == 0 && k == n / 2);
                    g[k] = edge ? std::complex<double>(gre[k], 0.0) : std::complex<double>(gre[k], gim[k]) * 0.5;
                }
                ifft.inverse(g, y);
                double* dst = pp.grad.data() + b * plen + f * opt.hop;
                for (int i = 0; i < n; ++i) dst[i] += y[i] * window[i] * norm;
            }
    });
}

Var complex_magnitude(const Var& spec, double eps) {
    if (spec.ndim() != 4 || spec.dim(1) != 2) throw std::invalid_argument("complex_magnitude expects (B, 2, F, K)");
    const std::int64_t batch = spec.dim(0), plane = spec.dim(2) * spec.dim(3);
    std::vector<double> out(static_cast<std::size_t>(batch * plane));
    for (std::int64_t b = 0; b < batch; ++b)
        for (std::int64_t i = 0; i < plane; ++i) {
            const double re = spec.values()[(b * 2) * plane + i];
            const double im = spec.values()[(b * 2 + 1) * plane + i];
            out[b * plane + i] = std::sqrt(re * re + im * im + eps);
        }
    return make_result({batch, spec.dim(2), spec.dim(3)}, std::move(out), {spec}, [=](Node& self) {
        Node& ps = *self.parents[0];
        if (!ps.requires_grad) return;
        ps.ensure_grad();
        for (std::int64_t b = 0; b < batch; ++b)
            for (std::int64_t i = 0; i < plane; ++i) {
                const double m = self.value[b * plane + i];
                if (m <= 0.0) continue;
                const double g = self.grad[b * plane + i] / m;
                ps.grad[(b * 2) * plane + i] += g * ps.value[(b * 2) * plane + i];
                ps.grad[(b * 2 + 1) * plane + i] += g * ps.value[(b * 2 + 1) * plane + i];
            }
    });
}

}  // namespace dscodec::ad
