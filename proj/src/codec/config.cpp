#include "dscodec/codec/config.hpp"

#include <algorithm>
#include <stdexcept>

#include "dscodec/util/random.hpp"

namespace dscodec::codec {

void reject_unknown_keys(const Json& j, const std::vector<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw std::invalid_argument(where + ": expected an object");
    for (const auto& [k, v] : j.items())
        if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
            throw std::invalid_argument("unknown key '" + k + "' in " + where);
}

nn::TransformerLayerSpec TransformerConfig::layer_spec(int latent_dim) const {
    nn::TransformerLayerSpec s;
    s.model_dim = model_dim > 0 ? model_dim : latent_dim;
    s.n_heads = n_heads;
    s.head_dim = n_heads > 0 ? s.model_dim / n_heads : 0;
    s.ffn_hidden = ffn_hidden > 0 ? ffn_hidden : ((8 * s.model_dim / 3 + 7) / 8) * 8;
    s.rope_base = rope_base;
    s.causal = causal;
    return s;
}

void CodecConfig::validate() const {
    if (sample_rate <= 0) throw std::invalid_argument("sample_rate must be positive");
    if (strides.empty()) throw std::invalid_argument("strides must not be empty");
    for (int s : strides)
        if (s < 1) throw std::invalid_argument("strides must be >= 1");
    if (channels.size() != strides.size() + 1)
        throw std::invalid_argument("channels needs strides.size() + 1 = " + std::to_string(strides.size() + 1) +
                                    " entries, got " + std::to_string(channels.size()));
    for (int c : channels)
        if (c < 1) throw std::invalid_argument("channel widths must be positive");
    if (latent_dim < 0) throw std::invalid_argument("latent_dim must be >= 0");
    if (kernel < 1 || dilations.empty()) throw std::invalid_argument("kernel must be positive and dilations non-empty");
    if (lstm_layers < 0) throw std::invalid_argument("lstm_layers must be >= 0");
    if (sample_rate % hop() != 0)
        throw std::invalid_argument("sample_rate must be a multiple of the total stride " + std::to_string(hop()));
    if (token_rate() > 65535) throw std::invalid_argument("token rate exceeds 65535");
    quantizer.validate(effective_latent_dim());
    if (transformer.present) {
        if (transformer.layers < 1) throw std::invalid_argument("transformer.layers must be >= 1");
        transformer.layer_spec(effective_latent_dim()).validate();
    }
}

int CodecConfig::hop() const {
    int p = 1;
    for (int s : strides) p *= s;
    return p;
}

int CodecConfig::token_rate() const { return sample_rate / hop(); }

Json CodecConfig::to_json() const {
    Json q = {{"product", quantizer.product},
              {"group_sizes", quantizer.group_sizes},
              {"code_dim", quantizer.code_dim},
              {"commitment_beta", quantizer.commitment_beta},
              {"normalize_before_projection", quantizer.normalize_before_projection}};
    Json t = {{"present", transformer.present},     {"layers", transformer.layers},
              {"n_heads", transformer.n_heads},     {"model_dim", transformer.model_dim},
              {"ffn_hidden", transformer.ffn_hidden}, {"rope_base", transformer.rope_base},
              {"causal", transformer.causal},       {"zero_init_residual", transformer.zero_init_residual}};
    return Json{{"sample_rate", sample_rate}, {"strides", strides},       {"channels", channels},
                {"latent_dim", latent_dim},   {"kernel", kernel},         {"dilations", dilations},
                {"lstm_layers", lstm_layers}, {"decoder_lstm", decoder_lstm}, {"quantizer", q},
                {"transformer", t}};
}

namespace {

template <typename T>
void read(const Json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

CodecConfig CodecConfig::from_json(const Json& j) {
    reject_unknown_keys(j,
                        {"sample_rate", "strides", "channels", "latent_dim", "kernel", "dilations", "lstm_layers",
                         "decoder_lstm", "quantizer", "transformer"},
                        "codec config");
    CodecConfig c;
    read(j, "sample_rate", c.sample_rate);
    read(j, "strides", c.strides);
    read(j, "channels", c.channels);
    read(j, "latent_dim", c.latent_dim);
    read(j, "kernel", c.kernel);
    read(j, "dilations", c.dilations);
    read(j, "lstm_layers", c.lstm_layers);
    read(j, "decoder_lstm", c.decoder_lstm);
    if (j.contains("quantizer")) {
        const auto& q = j.at("quantizer");
        reject_unknown_keys(q, {"product", "group_sizes", "code_dim", "commitment_beta", "normalize_before_projection"},
                            "codec.quantizer");
        read(q, "product", c.quantizer.product);
        read(q, "group_sizes", c.quantizer.group_sizes);
        read(q, "code_dim", c.quantizer.code_dim);
        read(q, "commitment_beta", c.quantizer.commitment_beta);
        read(q, "normalize_before_projection", c.quantizer.normalize_before_projection);
    }
    if (j.contains("transformer")) {
        const auto& t = j.at("transformer");
        reject_unknown_keys(t,
                            {"present", "layers", "n_heads", "model_dim", "ffn_hidden", "rope_base", "causal",
                             "zero_init_residual"},
                            "codec.transformer");
        read(t, "present", c.transformer.present);
        read(t, "layers", c.transformer.layers);
        read(t, "n_heads", c.transformer.n_heads);
        read(t, "model_dim", c.transformer.model_dim);
        read(t, "ffn_hidden", c.transformer.ffn_hidden);
        read(t, "rope_base", c.transformer.rope_base);
        read(t, "causal", c.transformer.causal);
        read(t, "zero_init_residual", c.transformer.zero_init_residual);
    }
    c.validate();
    return c;
}

std::uint64_t CodecConfig::codec_id() const { return util::fnv1a64(to_json().dump()); }

}  // namespace dscodec::codec
