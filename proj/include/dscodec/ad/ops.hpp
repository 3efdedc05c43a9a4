#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dscodec/ad/tensor.hpp"

namespace dscodec::ad {

// ---- elementwise -----------------------------------------------------------
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& x, double s);
Var add_scalar(const Var& x, double s);
Var square(const Var& x);
Var sigmoid(const Var& x);
Var tanh(const Var& x);
Var silu(const Var& x);
Var leaky_relu(const Var& x, double slope);
// log(max(x, floor)); zero gradient where clamped.
Var log_clamp(const Var& x, double floor);

// x + b broadcast along `axis` (b has x.dim(axis) elements).
Var add_bias(const Var& x, const Var& b, int axis);

// ---- reductions ------------------------------------------------------------
Var sum(const Var& x);
Var mean(const Var& x);
Var mean_abs_diff(const Var& a, const Var& b);
Var mean_sq_diff(const Var& a, const Var& b);
// Sum of a list of scalars.
Var sum_all(const std::vector<Var>& scalars);

// ---- shape -----------------------------------------------------------------
Var reshape(const Var& x, Shape shape);
Var permute(const Var& x, const std::vector<int>& axes);
Var slice(const Var& x, int axis, std::int64_t start, std::int64_t length);
Var concat(const std::vector<Var>& xs, int axis);

// ---- linear algebra ----------------------------------------------------------
// (M, K) x (K, N) or batched (B, M, K) x (B, K, N).
Var matmul(const Var& a, const Var& b);
// x (..., in) times w (out, in)^T -> (..., out).
Var linear(const Var& x, const Var& w);

// ---- convolution -----------------------------------------------------------
struct Conv1dOptions {
    int stride = 1;
    int dilation = 1;
    int pad_left = 0;
    int pad_right = 0;
};
// x (B, Cin, T), w (Cout, Cin, K), bias (Cout) or undefined.
Var conv1d(const Var& x, const Var& w, const Var& bias, const Conv1dOptions& opt);

// x (B, Cin, T), w (Cin, Cout, K). The full output ((T-1)*stride + K samples)
// is cropped by crop_left / crop_right.
Var conv_transpose1d(const Var& x, const Var& w, const Var& bias, int stride, int crop_left,
                     int crop_right);

struct Conv2dOptions {
    int stride_h = 1, stride_w = 1;
    int dilation_h = 1, dilation_w = 1;
    int pad_h = 0, pad_w = 0;
};
// x (B, Cin, H, W), w (Cout, Cin, KH, KW).
Var conv2d(const Var& x, const Var& w, const Var& bias, const Conv2dOptions& opt);

// ---- neural-network primitives ---------------------------------------------
// x (B, C, T); log_alpha (C). y = x + sin^2(alpha x) / alpha, alpha = exp(log_alpha).
Var snake(const Var& x, const Var& log_alpha);

// Single unidirectional LSTM layer, batch-first: x (B, T, I) -> (B, T, H).
// w_ih (4H, I), w_hh (4H, H), bias (4H); gate order i, f, g, o. Zero initial state.
Var lstm(const Var& x, const Var& w_ih, const Var& w_hh, const Var& bias);

// Normalizes the last axis to unit RMS and multiplies by gain (last-axis sized).
Var rms_norm(const Var& x, const Var& gain, double eps);
Var softmax(const Var& x);
// Rotary position encoding over (B, H, T, D) with interleaved (even, odd) pairs.
Var rope(const Var& x, double base);
// Divides every last-axis row by its L2 norm.
Var l2_normalize(const Var& x, double eps = 1e-12);
// table (S, D), indices into S -> (N, D); gradient scatters back into table.
Var gather_rows(const Var& table, std::span<const std::uint32_t> indices);
// Forward value of `c`, gradient passed unchanged to `z` (same shapes).
Var straight_through(const Var& z, const Var& c);
// Adds `mask` (constant, broadcast over the leading batch) to x (B, T, T).
Var add_constant(const Var& x, std::span<const double> mask);

// ---- spectral --------------------------------------------------------------
// Reflect padding over the last axis.
Var reflect_pad(const Var& x, int left, int right);

struct StftOptions {
    int fft_size = 1024;
    int hop = 256;
    int window_size = 1024;
    bool normalized = false;  // divide by sqrt(sum(window^2))
};
// x (B, T) -> (B, 2, frames, fft/2+1): real and imaginary planes. Centered
// with reflect padding of fft/2 on both sides; Hann window (periodic) of
// window_size samples centered in each fft frame.
Var stft(const Var& x, const StftOptions& opt);
// spec (B, 2, F, K) -> (B, F, K): sqrt(re^2 + im^2 + eps).
Var complex_magnitude(const Var& spec, double eps);

}  // namespace dscodec::ad
