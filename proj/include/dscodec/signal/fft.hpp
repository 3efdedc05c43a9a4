#pragma once

#include <complex>
#include <span>
#include <vector>

namespace dscodec::signal {

// FFTW-backed real transform of a fixed size. Plans are cached per thread.
class RealFft {
public:
    explicit RealFft(int size);
    ~RealFft();
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;

    int size() const { return size_; }
    int bins() const { return size_ / 2 + 1; }

    // in: size samples -> out: size/2+1 bins.
    void forward(std::span<const double> in, std::span<std::complex<double>> out);
    // Hermitian half spectrum -> size samples, unnormalized (no 1/size).
    void inverse(std::span<const std::complex<double>> in, std::span<double> out);

private:
    int size_;
    double* real_;
    void* spec_;
    void* fwd_;
    void* inv_;
};

RealFft& cached_fft(int size);

// Periodic Hann window.
std::vector<double> hann_window(int size);

}  // namespace dscodec::signal
