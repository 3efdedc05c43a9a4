#pragma once

#include <string>
#include <vector>

#include "dscodec/ad/ops.hpp"
#include "dscodec/nn/params.hpp"

// Convolutional building blocks. All sequence tensors are channel-first
// (B, C, T); the LSTM stack permutes internally to batch-first.
namespace dscodec::nn {

class Conv1d {
public:
    Conv1d() = default;
    // Stride-1 convolutions are "same" padded (left gets the smaller half).
    Conv1d(int in_channels, int out_channels, int kernel, int dilation = 1, bool bias = true);
    // Strided variant with explicit padding.
    Conv1d(int in_channels, int out_channels, int kernel, int stride, int pad_left, int pad_right, bool bias);

    ad::Var forward(const ad::Var& x) const;
    void init(util::Rng& rng);
    void collect(ParamList& out, const std::string& prefix) const;

    ad::Var weight;  // (out, in, kernel)
    ad::Var bias;    // (out) or undefined
    ad::Conv1dOptions options;
};

class ConvTranspose1d {
public:
    ConvTranspose1d() = default;
    // Kernel 2*stride, cropped so output length is exactly input * stride.
    ConvTranspose1d(int in_channels, int out_channels, int stride);

    ad::Var forward(const ad::Var& x) const;
    void init(util::Rng& rng);
    void collect(ParamList& out, const std::string& prefix) const;

    ad::Var weight;  // (in, out, 2*stride)
    ad::Var bias;
    int stride = 1;
};

// Per-channel snake activation, alpha stored as log(alpha).
class Snake {
public:
    Snake() = default;
    explicit Snake(int channels);
    ad::Var forward(const ad::Var& x) const { return ad::snake(x, log_alpha); }
    void init(util::Rng&) {}
    void collect(ParamList& out, const std::string& prefix) const;

    ad::Var log_alpha;  // (C), 0 -> alpha = 1
};

// x + Conv1x1(Snake(DilatedConv(Snake(x)))).
class ResidualUnit {
public:
    ResidualUnit() = default;
    ResidualUnit(int channels, int kernel, int dilation);
    ad::Var forward(const ad::Var& x) const;
    void init(util::Rng& rng);
    void collect(ParamList& out, const std::string& prefix) const;
    // Zeroes the branch's last convolution so the unit is the identity.
    void zero_branch_output();

    Snake act1, act2;
    Conv1d conv1, conv2;
    int channels = 0;
};

struct ConvBlockSpec {
    int channels_in = 0;
    int channels_out = 0;
    int kernel = 7;  // residual-unit kernel
    int stride = 2;
    std::vector<int> dilations{1, 3, 9};

    void validate() const;
};

// Residual units at channels_in, then a strided conv (kernel 2*stride)
// down to channels_out. Output length is exactly input / stride.
class DownsampleBlock {
public:
    DownsampleBlock() = default;
    explicit DownsampleBlock(const ConvBlockSpec& spec);
    ad::Var forward(const ad::Var& x) const;
    void init(util::Rng& rng);
    void collect(ParamList& out, const std::string& prefix) const;

    ConvBlockSpec spec;
    std::vector<ResidualUnit> units;
    Snake act;
    Conv1d down;
};

// Mirror of DownsampleBlock: transposed conv from channels_in to
// channels_out (length x stride), then residual units at channels_out.
class UpsampleBlock {
public:
    UpsampleBlock() = default;
    explicit UpsampleBlock(const ConvBlockSpec& spec);
    ad::Var forward(const ad::Var& x) const;
    void init(util::Rng& rng);
    void collect(ParamList& out, const std::string& prefix) const;

    ConvBlockSpec spec;
    Snake act;
    ConvTranspose1d up;
    std::vector<ResidualUnit> units;
};

// Unidirectional LSTM layers with a residual connection around the stack.
// Causal: output frame t depends only on input frames <= t.
class LstmStack {
public:
    LstmStack() = default;
    LstmStack(int channels, int layers);
    ad::Var forward(const ad::Var& x) const;  // (B, C, T) -> (B, C, T)
    void init(util::Rng& rng);
    void collect(ParamList& out, const std::string& prefix) const;

    struct Layer {
        ad::Var w_ih, w_hh, bias;
    };
    std::vector<Layer> layers;
    int channels = 0;
};

}  // namespace dscodec::nn
