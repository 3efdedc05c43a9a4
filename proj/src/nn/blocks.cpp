#include "dscodec/nn/blocks.hpp"

#include <cmath>
#include <stdexcept>

namespace dscodec::nn {

void fill_uniform(ad::Var& v, util::Rng& rng, double bound) {
    for (auto& x : v.values()) x = rng.uniform(-bound, bound);
}

void set_requires_grad(const ParamList& params, bool on) {
    for (const auto& p : params) p.var.node()->requires_grad = on;
}

void zero_grads(const ParamList& params) {
    for (const auto& p : params) p.var.node()->grad.clear();
}

// ---------------------------------------------------------------------------

Conv1d::Conv1d(int in_channels, int out_channels, int kernel, int dilation, bool with_bias)
    : weight(make_param({out_channels, in_channels, kernel})) {
    if (with_bias) bias = make_param({out_channels});
    const int total = dilation * (kernel - 1);
    options = {1, dilation, total / 2, total - total / 2};
}

Conv1d::Conv1d(int in_channels, int out_channels, int kernel, int stride, int pad_left, int pad_right, bool with_bias)
    : weight(make_param({out_channels, in_channels, kernel})) {
    if (with_bias) bias = make_param({out_channels});
    options = {stride, 1, pad_left, pad_right};
}

ad::Var Conv1d::forward(const ad::Var& x) const { return ad::conv1d(x, weight, bias, options); }

void Conv1d::init(util::Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(weight.dim(1) * weight.dim(2)));
    fill_uniform(weight, rng, bound);
    if (bias.defined()) fill_uniform(bias, rng, bound);
}

void Conv1d::collect(ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + "weight", weight});
    if (bias.defined()) out.push_back({prefix + "bias", bias});
}

ConvTranspose1d::ConvTranspose1d(int in_channels, int out_channels, int s)
    : weight(make_param({in_channels, out_channels, 2 * s})), bias(make_param({out_channels})), stride(s) {}

ad::Var ConvTranspose1d::forward(const ad::Var& x) const {
    // Full length (T+1)*s; crop s samples in total.
    return ad::conv_transpose1d(x, weight, bias, stride, (stride + 1) / 2, stride / 2);
}

void ConvTranspose1d::init(util::Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(weight.dim(1) * weight.dim(2)));
    fill_uniform(weight, rng, bound);
    fill_uniform(bias, rng, bound);
}

void ConvTranspose1d::collect(ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + "weight", weight});
    out.push_back({prefix + "bias", bias});
}

Snake::Snake(int channels) : log_alpha(make_param({channels})) {}

void Snake::collect(ParamList& out, const std::string& prefix) const { out.push_back({prefix + "log_alpha", log_alpha}); }

// ---------------------------------------------------------------------------

ResidualUnit::ResidualUnit(int ch, int kernel, int dilation)
    : act1(ch), act2(ch), conv1(ch, ch, kernel, dilation), conv2(ch, ch, 1), channels(ch) {}

ad::Var ResidualUnit::forward(const ad::Var& x) const {
    if (x.ndim() != 3 || x.dim(1) != channels)
        throw std::invalid_argument("residual unit expects (B, " + std::to_string(channels) + ", T), got " +
                                    ad::shape_str(x.shape()));
    auto y = conv2.forward(act2.forward(conv1.forward(act1.forward(x))));
    return ad::add(x, y);
}

void ResidualUnit::init(util::Rng& rng) {
    conv1.init(rng);
    conv2.init(rng);
}

void ResidualUnit::collect(ParamList& out, const std::string& prefix) const {
    act1.collect(out, prefix + "act1.");
    conv1.collect(out, prefix + "conv1.");
    act2.collect(out, prefix + "act2.");
    conv2.collect(out, prefix + "conv2.");
}

void ResidualUnit::zero_branch_output() {
    std::fill(conv2.weight.values().begin(), conv2.weight.values().end(), 0.0);
    std::fill(conv2.bias.values().begin(), conv2.bias.values().end(), 0.0);
}

void ConvBlockSpec::validate() const {
    if (channels_in < 1 || channels_out < 1) throw std::invalid_argument("conv block channels must be positive");
    if (stride < 1) throw std::invalid_argument("conv block stride must be >= 1");
    if (dilations.empty()) throw std::invalid_argument("conv block needs at least one dilation");
    if (kernel < 1) throw std::invalid_argument("conv block kernel must be positive");
}

// ---------------------------------------------------------------------------

DownsampleBlock::DownsampleBlock(const ConvBlockSpec& s)
    : spec(s),
      act(s.channels_in),
      down(s.channels_in, s.channels_out, 2 * s.stride, s.stride, (s.stride + 1) / 2, s.stride / 2, true) {
    spec.validate();
    for (int d : spec.dilations) units.emplace_back(spec.channels_in, spec.kernel, d);
}

ad::Var DownsampleBlock::forward(const ad::Var& x) const {
    if (x.dim(2) % spec.stride != 0)
        throw std::invalid_argument("downsample block: length " + std::to_string(x.dim(2)) +
                                    " is not divisible by stride " + std::to_string(spec.stride));
    ad::Var h = x;
    for (const auto& u : units) h = u.forward(h);
    return down.forward(act.forward(h));
}

void DownsampleBlock::init(util::Rng& rng) {
    for (auto& u : units) u.init(rng);
    down.init(rng);
}

void DownsampleBlock::collect(ParamList& out, const std::string& prefix) const {
    for (std::size_t i = 0; i < units.size(); ++i) units[i].collect(out, prefix + "unit" + std::to_string(i) + ".");
    act.collect(out, prefix + "act.");
    down.collect(out, prefix + "down.");
}

UpsampleBlock::UpsampleBlock(const ConvBlockSpec& s) : spec(s), act(s.channels_in), up(s.channels_in, s.channels_out, s.stride) {
    spec.validate();
    for (int d : spec.dilations) units.emplace_back(spec.channels_out, spec.kernel, d);
}

ad::Var UpsampleBlock::forward(const ad::Var& x) const {
    ad::Var h = up.forward(act.forward(x));
    for (const auto& u : units) h = u.forward(h);
    return h;
}

void UpsampleBlock::init(util::Rng& rng) {
    up.init(rng);
    for (auto& u : units) u.init(rng);
}

void UpsampleBlock::collect(ParamList& out, const std::string& prefix) const {
    act.collect(out, prefix + "act.");
    up.collect(out, prefix + "up.");
    for (std::size_t i = 0; i < units.size(); ++i) units[i].collect(out, prefix + "unit" + std::to_string(i) + ".");
}

// ---------------------------------------------------------------------------

LstmStack::LstmStack(int ch, int n_layers) : channels(ch) {
    for (int i = 0; i < n_layers; ++i)
        layers.push_back({make_param({4 * ch, ch}), make_param({4 * ch, ch}), make_param({4 * ch})});
}

ad::Var LstmStack::forward(const ad::Var& x) const {
    if (x.ndim() != 3 || x.dim(1) != channels)
        throw std::invalid_argument("lstm stack expects (B, " + std::to_string(channels) + ", T)");
    if (layers.empty()) return x;
    ad::Var h = ad::permute(x, {0, 2, 1});
    for (const auto& l : layers) h = ad::lstm(h, l.w_ih, l.w_hh, l.bias);
    return ad::add(x, ad::permute(h, {0, 2, 1}));
}

void LstmStack::init(util::Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(channels));
    for (auto& l : layers) {
        fill_uniform(l.w_ih, rng, bound);
        fill_uniform(l.w_hh, rng, bound);
        fill_uniform(l.bias, rng, bound);
    }
}

void LstmStack::collect(ParamList& out, const std::string& prefix) const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::string p = prefix + "layer" + std::to_string(i) + ".";
        out.push_back({p + "w_ih", layers[i].w_ih});
        out.push_back({p + "w_hh", layers[i].w_hh});
        out.push_back({p + "bias", layers[i].bias});
    }
}

}  // namespace dscodec::nn
