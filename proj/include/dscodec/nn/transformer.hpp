#pragma once

#include <string>
#include <vector>

#include "dscodec/ad/ops.hpp"
#include "dscodec/nn/params.hpp"

namespace dscodec::nn {

struct TransformerLayerSpec {
    int model_dim = 512;
    int n_heads = 8;
    int head_dim = 64;
    int ffn_hidden = 1376;
    double rope_base = 10000.0;
    bool causal = false;

    void validate() const;
};

// y = x + W_o(attention(RMSNorm(x))), full or causal, RoPE on q/k.
class Attention {
public:
    Attention() = default;
    explicit Attention(const TransformerLayerSpec& spec);
    ad::Var forward(const ad::Var& x) const;  // (B, T, D)
    void init(util::Rng& rng, bool zero_output);
    void collect(ParamList& out, const std::string& prefix) const;

    TransformerLayerSpec spec;
    ad::Var wq, wk, wv, wo;  // (D, D)
};

// W2(silu(W1 x) * W3 x)
class SwiGlu {
public:
    SwiGlu() = default;
    SwiGlu(int dim, int hidden);
    ad::Var forward(const ad::Var& x) const;
    void init(util::Rng& rng, bool zero_output);
    void collect(ParamList& out, const std::string& prefix) const;

    ad::Var w1, w3;  // (hidden, D)
    ad::Var w2;      // (D, hidden)
};

class TransformerLayer {
public:
    TransformerLayer() = default;
    explicit TransformerLayer(const TransformerLayerSpec& spec);
    ad::Var forward(const ad::Var& x) const;  // (B, T, D) or (T, D)
    void init(util::Rng& rng, bool zero_residual);
    void collect(ParamList& out, const std::string& prefix) const;

    TransformerLayerSpec spec;
    ad::Var attn_gain, ffn_gain;
    Attention attn;
    SwiGlu ffn;
    double eps = 1e-6;
};

// Stack of layers over channel-first frames (B, C, T). When C differs from
// model_dim, linear adapters map in and out, and the adapted stack is added
// to the input residually.
class TransformerBlock {
public:
    TransformerBlock() = default;
    TransformerBlock(int channels, const TransformerLayerSpec& spec, int layers);
    ad::Var forward(const ad::Var& x) const;
    void init(util::Rng& rng, bool zero_residual);
    void collect(ParamList& out, const std::string& prefix) const;

    int channels = 0;
    TransformerLayerSpec spec;
    std::vector<TransformerLayer> layers;
    ad::Var adapter_in, adapter_out;  // undefined when channels == model_dim
};

}  // namespace dscodec::nn
