#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "dscodec/nn/transformer.hpp"
#include "dscodec/quant/quantizer.hpp"

namespace dscodec::codec {

using Json = nlohmann::ordered_json;

enum class Architecture { Mirror, NonMirror };

struct TransformerConfig {
    bool present = false;
    int layers = 2;
    int n_heads = 8;
    int model_dim = 0;   // 0: the quantizer output width
    int ffn_hidden = 0;  // 0: ~8/3 model_dim rounded up to a multiple of 8
    double rope_base = 10000.0;
    bool causal = false;
    bool zero_init_residual = true;

    nn::TransformerLayerSpec layer_spec(int latent_dim) const;
};

struct CodecConfig {
    int sample_rate = 16000;
    std::vector<int> strides{2, 2, 5, 5, 2};
    std::vector<int> channels{32, 64, 128, 256, 512, 512};  // strides.size() + 1 widths
    int latent_dim = 0;  // 0: channels.back()
    int kernel = 7;
    std::vector<int> dilations{1, 3, 9};
    int lstm_layers = 2;
    bool decoder_lstm = true;
    quant::QuantizerConfig quantizer;
    TransformerConfig transformer;

    void validate() const;
    int hop() const;
    int token_rate() const;
    int effective_latent_dim() const { return latent_dim > 0 ? latent_dim : channels.back(); }
    Architecture architecture() const { return transformer.present ? Architecture::NonMirror : Architecture::Mirror; }

    Json to_json() const;
    // Rejects unknown keys; missing keys keep their defaults.
    static CodecConfig from_json(const Json& j);
    // Stable hash of the canonical JSON.
    std::uint64_t codec_id() const;
};

// Throws std::invalid_argument naming the offending key.
void reject_unknown_keys(const Json& j, const std::vector<std::string>& allowed, const std::string& where);

}  // namespace dscodec::codec
