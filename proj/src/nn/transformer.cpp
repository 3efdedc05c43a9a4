#include "dscodec/nn/transformer.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace dscodec::nn {

namespace {

void init_linear(ad::Var& w, util::Rng& rng, bool zero) {
    if (zero) {
        std::fill(w.values().begin(), w.values().end(), 0.0);
        return;
    }
    fill_uniform(w, rng, 1.0 / std::sqrt(static_cast<double>(w.dim(1))));
}

}  // namespace

void TransformerLayerSpec::validate() const {
    if (model_dim < 1 || n_heads < 1 || head_dim < 1 || ffn_hidden < 1)
        throw std::invalid_argument("transformer dimensions must be positive");
    if (model_dim != n_heads * head_dim)
        throw std::invalid_argument("transformer model_dim " + std::to_string(model_dim) + " != n_heads " +
                                    std::to_string(n_heads) + " x head_dim " + std::to_string(head_dim));
    if (head_dim % 2 != 0) throw std::invalid_argument("rotary encoding needs an even head_dim");
    if (!(rope_base > 1.0)) throw std::invalid_argument("rope_base must exceed 1");
}

Attention::Attention(const TransformerLayerSpec& s) : spec(s) {
    const int d = s.model_dim;
    wq = make_param({d, d});
    wk = make_param({d, d});
    wv = make_param({d, d});
    wo = make_param({d, d});
}

ad::Var Attention::forward(const ad::Var& x) const {
    const auto b = x.dim(0), t = x.dim(1);
    const int h = spec.n_heads, hd = spec.head_dim;
    auto heads = [&](const ad::Var& w) {
        return ad::permute(ad::reshape(ad::linear(x, w), {b, t, h, hd}), {0, 2, 1, 3});  // (B, H, T, hd)
    };
    auto q = ad::rope(heads(wq), spec.rope_base);
    auto k = ad::rope(heads(wk), spec.rope_base);
    auto v = heads(wv);
    q = ad::reshape(q, {b * h, t, hd});
    auto kt = ad::permute(ad::reshape(k, {b * h, t, hd}), {0, 2, 1});
    v = ad::reshape(v, {b * h, t, hd});
    auto scores = ad::scale(ad::matmul(q, kt), 1.0 / std::sqrt(static_cast<double>(hd)));
    if (spec.causal) {
        std::vector<double> mask(static_cast<std::size_t>(t * t), 0.0);
        for (std::int64_t i = 0; i < t; ++i)
            for (std::int64_t j = i + 1; j < t; ++j) mask[static_cast<std::size_t>(i * t + j)] = -1e30;
        scores = ad::add_constant(scores, mask);
    }
    auto ctx = ad::matmul(ad::softmax(scores), v);  // (B*H, T, hd)
    ctx = ad::reshape(ad::permute(ad::reshape(ctx, {b, h, t, hd}), {0, 2, 1, 3}), {b, t, spec.model_dim});
    return ad::linear(ctx, wo);
}

void Attention::init(util::Rng& rng, bool zero_output) {
    init_linear(wq, rng, false);
    init_linear(wk, rng, false);
    init_linear(wv, rng, false);
    init_linear(wo, rng, zero_output);
}

void Attention::collect(ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + "wq", wq});
    out.push_back({prefix + "wk", wk});
    out.push_back({prefix + "wv", wv});
    out.push_back({prefix + "wo", wo});
}

SwiGlu::SwiGlu(int dim, int hidden)
    : w1(make_param({hidden, dim})), w3(make_param({hidden, dim})), w2(make_param({dim, hidden})) {}

ad::Var SwiGlu::forward(const ad::Var& x) const {
    return ad::linear(ad::mul(ad::silu(ad::linear(x, w1)), ad::linear(x, w3)), w2);
}

void SwiGlu::init(util::Rng& rng, bool zero_output) {
    init_linear(w1, rng, false);
    init_linear(w3, rng, false);
    init_linear(w2, rng, zero_output);
}

void SwiGlu::collect(ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + "w1", w1});
    out.push_back({prefix + "w3", w3});
    out.push_back({prefix + "w2", w2});
}

TransformerLayer::TransformerLayer(const TransformerLayerSpec& s)
    : spec(s),
      attn_gain(make_param({s.model_dim})),
      ffn_gain(make_param({s.model_dim})),
      attn(s),
      ffn(s.model_dim, s.ffn_hidden) {
    spec.validate();
}

ad::Var TransformerLayer::forward(const ad::Var& x) const {
    if (x.shape().back() != spec.model_dim)
        throw std::invalid_argument("transformer layer expects model_dim " + std::to_string(spec.model_dim) + ", got " +
                                    ad::shape_str(x.shape()));
    if (x.ndim() == 2) {
        auto y = forward(ad::reshape(x, {1, x.dim(0), x.dim(1)}));
        return ad::reshape(y, x.shape());
    }
    if (x.ndim() != 3) throw std::invalid_argument("transformer layer expects (B, T, D) or (T, D)");
    auto h = ad::add(x, attn.forward(ad::rms_norm(x, attn_gain, eps)));
    return ad::add(h, ffn.forward(ad::rms_norm(h, ffn_gain, eps)));
}

void TransformerLayer::init(util::Rng& rng, bool zero_residual) {
    std::fill(attn_gain.values().begin(), attn_gain.values().end(), 1.0);
    std::fill(ffn_gain.values().begin(), ffn_gain.values().end(), 1.0);
    attn.init(rng, zero_residual);
    ffn.init(rng, zero_residual);
}

void TransformerLayer::collect(ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + "attn_norm.gain", attn_gain});
    attn.collect(out, prefix + "attn.");
    out.push_back({prefix + "ffn_norm.gain", ffn_gain});
    ffn.collect(out, prefix + "ffn.");
}

TransformerBlock::TransformerBlock(int ch, const TransformerLayerSpec& s, int n_layers) : channels(ch), spec(s) {
    spec.validate();
    if (n_layers < 1) throw std::invalid_argument("transformer block needs at least one layer");
    for (int i = 0; i < n_layers; ++i) layers.emplace_back(spec);
    if (ch != spec.model_dim) {
        adapter_in = make_param({spec.model_dim, ch});
        adapter_out = make_param({ch, spec.model_dim});
    }
}

ad::Var TransformerBlock::forward(const ad::Var& x) const {
    if (x.ndim() != 3 || x.dim(1) != channels)
        throw std::invalid_argument("transformer block expects (B, " + std::to_string(channels) + ", T)");
    auto h = ad::permute(x, {0, 2, 1});
    if (!adapter_in.defined()) {
        for (const auto& l : layers) h = l.forward(h);
        return ad::permute(h, {0, 2, 1});
    }
    auto z = ad::linear(h, adapter_in);
    for (const auto& l : layers) z = l.forward(z);
    return ad::add(x, ad::permute(ad::linear(z, adapter_out), {0, 2, 1}));
}

void TransformerBlock::init(util::Rng& rng, bool zero_residual) {
    for (auto& l : layers) l.init(rng, zero_residual);
    if (adapter_in.defined()) {
        init_linear(adapter_in, rng, false);
        init_linear(adapter_out, rng, zero_residual);
    }
}

void TransformerBlock::collect(ParamList& out, const std::string& prefix) const {
    for (std::size_t i = 0; i < layers.size(); ++i) layers[i].collect(out, prefix + "layer" + std::to_string(i) + ".");
    if (adapter_in.defined()) {
        out.push_back({prefix + "adapter_in", adapter_in});
        out.push_back({prefix + "adapter_out", adapter_out});
    }
}

}  // namespace dscodec::nn
