#include "dscodec/signal/fft.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <numbers>
#include <stdexcept>

#include <fftw3.h>

namespace dscodec::signal {

RealFft::RealFft(int size) : size_(size) {
    if (size < 1) throw std::invalid_argument("fft size must be positive");
    real_ = fftw_alloc_real(static_cast<std::size_t>(size));
    auto* spec = fftw_alloc_complex(static_cast<std::size_t>(size / 2 + 1));
    spec_ = spec;
    fwd_ = fftw_plan_dft_r2c_1d(size, real_, spec, FFTW_ESTIMATE);
    inv_ = fftw_plan_dft_c2r_1d(size, spec, real_, FFTW_ESTIMATE);
}

RealFft::~RealFft() {
    fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
    fftw_destroy_plan(static_cast<fftw_plan>(inv_));
    fftw_free(real_);
    fftw_free(spec_);
}

void RealFft::forward(std::span<const double> in, std::span<std::complex<double>> out) {
    std::copy(in.begin(), in.begin() + size_, real_);
    fftw_execute(static_cast<fftw_plan>(fwd_));
    const auto* spec = static_cast<const fftw_complex*>(spec_);
    for (int k = 0; k < bins(); ++k) out[k] = {spec[k][0], spec[k][1]};
}

void RealFft::inverse(std::span<const std::complex<double>> in, std::span<double> out) {
    auto* spec = static_cast<fftw_complex*>(spec_);
    for (int k = 0; k < bins(); ++k) {
        spec[k][0] = in[k].real();
        spec[k][1] = in[k].imag();
    }
    fftw_execute(static_cast<fftw_plan>(inv_));  // c2r destroys its input; spec_ is scratch
    std::copy(real_, real_ + size_, out.begin());
}

RealFft& cached_fft(int size) {
    thread_local std::map<int, std::unique_ptr<RealFft>> cache;
    auto& slot = cache[size];
    if (!slot) slot = std::make_unique<RealFft>(size);
    return *slot;
}

std::vector<double> hann_window(int size) {
    std::vector<double> w(static_cast<std::size_t>(size));
    for (int n = 0; n < size; ++n) w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / size);
    return w;
}

}  // namespace dscodec::signal
