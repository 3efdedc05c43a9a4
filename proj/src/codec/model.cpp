#include "dscodec/codec/model.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace dscodec::codec {

namespace {

nn::ConvBlockSpec block_spec(const CodecConfig& c, std::size_t i, bool down) {
    nn::ConvBlockSpec s;
    s.channels_in = down ? c.channels[i] : c.channels[i + 1];
    s.channels_out = down ? c.channels[i + 1] : c.channels[i];
    s.kernel = c.kernel;
    s.stride = c.strides[i];
    s.dilations = c.dilations;
    return s;
}

std::string hex(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------

Encoder::Encoder(const CodecConfig& c)
    : conv_in(1, c.channels.front(), c.kernel),
      lstm(c.channels.back(), c.lstm_layers),
      act(c.channels.back()),
      conv_out(c.channels.back(), c.effective_latent_dim(), 3) {
    for (std::size_t i = 0; i < c.strides.size(); ++i) blocks.emplace_back(block_spec(c, i, true));
}

ad::Var Encoder::forward(const ad::Var& wave) const {
    ad::Var h = conv_in.forward(ad::reshape(wave, {wave.dim(0), 1, wave.dim(1)}));
    for (const auto& b : blocks) h = b.forward(h);
    h = lstm.forward(h);
    return conv_out.forward(act.forward(h));
}

void Encoder::init(util::Rng& rng) {
    conv_in.init(rng);
    for (auto& b : blocks) b.init(rng);
    lstm.init(rng);
    conv_out.init(rng);
}

void Encoder::collect(nn::ParamList& out, const std::string& prefix) const {
    conv_in.collect(out, prefix + "conv_in.");
    for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].collect(out, prefix + "block" + std::to_string(i) + ".");
    lstm.collect(out, prefix + "lstm.");
    act.collect(out, prefix + "act.");
    conv_out.collect(out, prefix + "conv_out.");
}

Decoder::Decoder(const CodecConfig& c)
    : conv_in(c.effective_latent_dim(), c.channels.back(), c.kernel),
      act(c.channels.front()),
      conv_out(c.channels.front(), 1, c.kernel) {
    if (c.decoder_lstm) lstm.emplace(c.channels.back(), c.lstm_layers);
    for (std::size_t i = c.strides.size(); i-- > 0;) blocks.emplace_back(block_spec(c, i, false));
}

ad::Var Decoder::forward(const ad::Var& latent) const {
    ad::Var h = conv_in.forward(latent);
    if (lstm) h = lstm->forward(h);
    for (const auto& b : blocks) h = b.forward(h);
    h = ad::tanh(conv_out.forward(act.forward(h)));
    return ad::reshape(h, {h.dim(0), h.dim(2)});
}

void Decoder::init(util::Rng& rng) {
    conv_in.init(rng);
    if (lstm) lstm->init(rng);
    for (auto& b : blocks) b.init(rng);
    conv_out.init(rng);
}

void Decoder::collect(nn::ParamList& out, const std::string& prefix) const {
    conv_in.collect(out, prefix + "conv_in.");
    if (lstm) lstm->collect(out, prefix + "lstm.");
    for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].collect(out, prefix + "block" + std::to_string(i) + ".");
    act.collect(out, prefix + "act.");
    conv_out.collect(out, prefix + "conv_out.");
}

// ---------------------------------------------------------------------------

CodecModel::CodecModel(const CodecConfig& c) : config(c) {
    config.validate();
    encoder = Encoder(config);
    quantizer = quant::Quantizer(config.quantizer, config.effective_latent_dim());
    if (config.transformer.present)
        transformer.emplace(config.effective_latent_dim(), config.transformer.layer_spec(config.effective_latent_dim()),
                            config.transformer.layers);
    decoder = Decoder(config);
}

void CodecModel::init(std::uint64_t seed) {
    util::Rng enc(util::derive_seed(seed, "encoder"));
    encoder.init(enc);
    util::Rng q(util::derive_seed(seed, "quantizer"));
    quantizer.init(q);
    util::Rng dec(util::derive_seed(seed, "decoder"));
    decoder.init(dec);
    init_transformer(seed);
}

void CodecModel::init_transformer(std::uint64_t seed) {
    if (!transformer) return;
    util::Rng t(util::derive_seed(seed, "transformer"));
    transformer->init(t, config.transformer.zero_init_residual);
}

ad::Var CodecModel::decode_frames(const ad::Var& quantized) const {
    return decoder.forward(transformer ? transformer->forward(quantized) : quantized);
}

TrainOutput CodecModel::forward_train(const ad::Var& batch) const {
    if (batch.ndim() != 2) throw std::invalid_argument("forward_train expects (B, T), got " + ad::shape_str(batch.shape()));
    if (batch.dim(1) % config.hop() != 0)
        throw std::invalid_argument("forward_train: length " + std::to_string(batch.dim(1)) + " is not a multiple of " +
                                    std::to_string(config.hop()));
    TrainOutput out;
    out.quant = quantizer.forward(encoder.forward(batch));
    out.reconstruction = decode_frames(out.quant.quantized);
    return out;
}

TokenSequence CodecModel::encode(const signal::Waveform& wave) const {
    if (wave.sample_rate != config.sample_rate)
        throw signal::SignalError(signal::SignalError::Kind::SampleRateMismatch,
                                  "encode: expected " + std::to_string(config.sample_rate) + " Hz, got " +
                                      std::to_string(wave.sample_rate) + " Hz");
    TokenSequence t;
    t.codec_id = codec_id();
    t.group_sizes = config.quantizer.group_sizes;
    t.product = config.quantizer.product;
    t.token_rate = config.token_rate();
    t.original_length = wave.samples.size();
    if (wave.samples.empty()) return t;
    const std::size_t hop = static_cast<std::size_t>(config.hop());
    const std::size_t padded = (wave.samples.size() + hop - 1) / hop * hop;
    std::vector<double> x(wave.samples);
    x.resize(padded, 0.0);
    ad::NoGradGuard ng;
    auto q = quantizer.forward(encoder.forward(ad::Var::from({1, static_cast<std::int64_t>(padded)}, std::move(x))));
    t.codes = std::move(q.indices);
    return t;
}

signal::Waveform CodecModel::decode(const TokenSequence& tokens, bool strict) const {
    if (tokens.codec_id != codec_id()) {
        const std::string msg = "token codec_id " + hex(tokens.codec_id) + " does not match model codec_id " + hex(codec_id());
        if (strict) throw std::runtime_error(msg);
        spdlog::warn("{}", msg);
    }
    if (tokens.group_sizes != config.quantizer.group_sizes)
        throw std::invalid_argument("token group sizes do not match the model's codebooks");
    const std::uint64_t hop = static_cast<std::uint64_t>(config.hop());
    if (tokens.codes.size() != (tokens.original_length + hop - 1) / hop)
        throw std::invalid_argument("token count " + std::to_string(tokens.codes.size()) +
                                    " inconsistent with original length " + std::to_string(tokens.original_length));
    signal::Waveform out;
    out.sample_rate = config.sample_rate;
    if (tokens.codes.empty()) return out;
    ad::NoGradGuard ng;
    const auto frames = static_cast<std::int64_t>(tokens.codes.size());
    auto y = decode_frames(quantizer.lookup(tokens.codes, 1, frames));
    out.samples.assign(y.values().begin(), y.values().begin() + static_cast<std::ptrdiff_t>(tokens.original_length));
    return out;
}

nn::ParamList CodecModel::encoder_params() const {
    nn::ParamList p;
    encoder.collect(p, "encoder.");
    return p;
}

nn::ParamList CodecModel::quantizer_params() const {
    nn::ParamList p;
    quantizer.collect(p, "quantizer.");
    return p;
}

nn::ParamList CodecModel::transformer_params() const {
    nn::ParamList p;
    if (transformer) transformer->collect(p, "transformer.");
    return p;
}

nn::ParamList CodecModel::decoder_params() const {
    nn::ParamList p;
    decoder.collect(p, "decoder.");
    return p;
}

nn::ParamList CodecModel::params() const {
    nn::ParamList p = encoder_params();
    auto q = quantizer_params(), t = transformer_params(), d = decoder_params();
    p.insert(p.end(), q.begin(), q.end());
    p.insert(p.end(), t.begin(), t.end());
    p.insert(p.end(), d.begin(), d.end());
    return p;
}

}  // namespace dscodec::codec
