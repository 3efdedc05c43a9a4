#pragma once

#include <cstdint>
#include <optional>

#include "dscodec/codec/config.hpp"
#include "dscodec/codec/tokens.hpp"
#include "dscodec/nn/blocks.hpp"
#include "dscodec/nn/transformer.hpp"
#include "dscodec/quant/quantizer.hpp"
#include "dscodec/signal/wav.hpp"

namespace dscodec::codec {

// Waveform (B, T) -> latent frames (B, D, T / hop).
class Encoder {
public:
    Encoder() = default;
    explicit Encoder(const CodecConfig& config);
    ad::Var forward(const ad::Var& wave) const;
    void init(util::Rng& rng);
    void collect(nn::ParamList& out, const std::string& prefix) const;

    nn::Conv1d conv_in;
    std::vector<nn::DownsampleBlock> blocks;
    nn::LstmStack lstm;
    nn::Snake act;
    nn::Conv1d conv_out;
};

// Latent frames (B, D, T) -> waveform (B, T * hop), tanh-bounded.
class Decoder {
public:
    Decoder() = default;
    explicit Decoder(const CodecConfig& config);
    ad::Var forward(const ad::Var& latent) const;
    void init(util::Rng& rng);
    void collect(nn::ParamList& out, const std::string& prefix) const;

    nn::Conv1d conv_in;
    std::optional<nn::LstmStack> lstm;
    std::vector<nn::UpsampleBlock> blocks;
    nn::Snake act;
    nn::Conv1d conv_out;
};

struct TrainOutput {
    ad::Var reconstruction;  // (B, T)
    quant::QuantizerOutput quant;
};

class CodecModel {
public:
    explicit CodecModel(const CodecConfig& config);

    // Each submodule draws from its own seed stream, so adding or removing
    // the transformer leaves the other initial weights unchanged.
    void init(std::uint64_t seed);
    void init_transformer(std::uint64_t seed);

    Architecture architecture() const { return config.architecture(); }
    TrainOutput forward_train(const ad::Var& batch) const;  // (B, T), T a multiple of hop
    ad::Var decode_frames(const ad::Var& quantized) const;  // (B, D, T) -> (B, T * hop)

    TokenSequence encode(const signal::Waveform& wave) const;
    // strict: codec_id mismatch throws; otherwise it is logged and decoding proceeds.
    signal::Waveform decode(const TokenSequence& tokens, bool strict = true) const;

    nn::ParamList encoder_params() const;
    nn::ParamList quantizer_params() const;
    nn::ParamList transformer_params() const;
    nn::ParamList decoder_params() const;
    nn::ParamList params() const;  // all of the above

    std::uint64_t codec_id() const { return config.codec_id(); }

    CodecConfig config;
    Encoder encoder;
    quant::Quantizer quantizer;
    std::optional<nn::TransformerBlock> transformer;
    Decoder decoder;
};

}  // namespace dscodec::codec
