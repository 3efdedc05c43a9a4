#include "dscodec/adv/discriminators.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

#include "dscodec/codec/config.hpp"
#include "dscodec/util/random.hpp"

namespace dscodec::adv {

namespace {

void init_uniform(ad::Var& w, ad::Var& b, util::Rng& rng, std::int64_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    nn::fill_uniform(w, rng, bound);
    nn::fill_uniform(b, rng, bound);
}

}  // namespace

void DiscriminatorOutput::append(DiscriminatorOutput&& other) {
    for (auto& l : other.logits) logits.push_back(std::move(l));
    for (auto& f : other.features) features.push_back(std::move(f));
}

void MPDConfig::validate() const {
    if (periods.empty()) throw std::invalid_argument("mpd needs at least one period");
    std::set<int> seen;
    for (int p : periods) {
        if (p < 2) throw std::invalid_argument("mpd periods must be >= 2");
        if (!seen.insert(p).second) throw std::invalid_argument("mpd periods must be distinct");
    }
    if (channels.empty()) throw std::invalid_argument("mpd needs at least one layer");
    for (int c : channels)
        if (c < 1) throw std::invalid_argument("mpd channel widths must be positive");
    if (kernel < 1 || stride < 1) throw std::invalid_argument("mpd kernel and stride must be positive");
}

void MSSTFTConfig::validate() const {
    if (fft_sizes.empty()) throw std::invalid_argument("ms-stft needs at least one scale");
    std::set<int> seen;
    for (int f : fft_sizes) {
        if (f < 8 || f % 4 != 0) throw std::invalid_argument("ms-stft fft sizes must be multiples of 4 and >= 8");
        if (!seen.insert(f).second) throw std::invalid_argument("ms-stft scales must be distinct");
    }
    if (channels < 1) throw std::invalid_argument("ms-stft channels must be positive");
}

// ---------------------------------------------------------------------------

PeriodDiscriminator::PeriodDiscriminator(int p, const MPDConfig& cfg) : period(p), slope(cfg.slope) {
    const int pad = (cfg.kernel - 1) / 2;
    int in = 1;
    for (int c : cfg.channels) {
        layers.push_back({nn::make_param({c, in, cfg.kernel}), nn::make_param({c}), {cfg.stride, 1, pad, pad}});
        in = c;
    }
    layers.push_back({nn::make_param({in, in, cfg.kernel}), nn::make_param({in}), {1, 1, pad, pad}});
    layers.push_back({nn::make_param({1, in, 3}), nn::make_param({1}), {1, 1, 1, 1}});
}

void PeriodDiscriminator::forward(const ad::Var& x, DiscriminatorOutput& out) const {
    const auto b = x.dim(0), t = x.dim(1);
    const int pad = static_cast<int>((period - t % period) % period);
    ad::Var h = pad > 0 ? ad::reflect_pad(x, 0, pad) : x;
    const auto rows = (t + pad) / period;
    h = ad::reshape(ad::permute(ad::reshape(h, {b, rows, period}), {0, 2, 1}), {b * period, 1, rows});
    std::vector<ad::Var> feats;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        h = ad::conv1d(h, layers[i].w, layers[i].b, layers[i].opt);
        if (i + 1 < layers.size()) h = ad::leaky_relu(h, slope);
        feats.push_back(h);
    }
    out.logits.push_back(ad::reshape(h, {b, h.numel() / b}));
    out.features.push_back(std::move(feats));
}

void PeriodDiscriminator::init(util::Rng& rng) {
    for (auto& l : layers) init_uniform(l.w, l.b, rng, l.w.dim(1) * l.w.dim(2));
}

void PeriodDiscriminator::collect(nn::ParamList& out, const std::string& prefix) const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        out.push_back({prefix + "layer" + std::to_string(i) + ".weight", layers[i].w});
        out.push_back({prefix + "layer" + std::to_string(i) + ".bias", layers[i].b});
    }
}

StftDiscriminator::StftDiscriminator(int fft, const MSSTFTConfig& cfg) : fft_size(fft), slope(cfg.slope) {
    const int c = cfg.channels;
    ad::Conv2dOptions first;
    first.pad_h = 1;
    first.pad_w = 4;
    layers.push_back({nn::make_param({c, 2, 3, 9}), nn::make_param({c}), first});
    for (int d : cfg.dilations) {
        ad::Conv2dOptions o;
        o.stride_w = 2;
        o.dilation_h = d;
        o.pad_h = d;
        o.pad_w = 4;
        layers.push_back({nn::make_param({c, c, 3, 9}), nn::make_param({c}), o});
    }
    ad::Conv2dOptions k3;
    k3.pad_h = 1;
    k3.pad_w = 1;
    layers.push_back({nn::make_param({c, c, 3, 3}), nn::make_param({c}), k3});
    layers.push_back({nn::make_param({1, c, 3, 3}), nn::make_param({1}), k3});
}

void StftDiscriminator::forward(const ad::Var& x, DiscriminatorOutput& out) const {
    ad::Var h = ad::stft(x, {fft_size, fft_size / 4, fft_size, true});  // (B, 2, frames, bins)
    std::vector<ad::Var> feats;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        h = ad::conv2d(h, layers[i].w, layers[i].b, layers[i].opt);
        if (i + 1 < layers.size()) h = ad::leaky_relu(h, slope);
        feats.push_back(h);
    }
    const auto b = x.dim(0);
    out.logits.push_back(ad::reshape(h, {b, h.numel() / b}));
    out.features.push_back(std::move(feats));
}

void StftDiscriminator::init(util::Rng& rng) {
    for (auto& l : layers) init_uniform(l.w, l.b, rng, l.w.dim(1) * l.w.dim(2) * l.w.dim(3));
}

void StftDiscriminator::collect(nn::ParamList& out, const std::string& prefix) const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        out.push_back({prefix + "layer" + std::to_string(i) + ".weight", layers[i].w});
        out.push_back({prefix + "layer" + std::to_string(i) + ".bias", layers[i].b});
    }
}

// ---------------------------------------------------------------------------

nlohmann::ordered_json DiscriminatorConfig::to_json() const {
    return {{"mpd",
             {{"periods", mpd.periods},
              {"channels", mpd.channels},
              {"kernel", mpd.kernel},
              {"stride", mpd.stride},
              {"slope", mpd.slope}}},
            {"msstft",
             {{"fft_sizes", msstft.fft_sizes},
              {"channels", msstft.channels},
              {"dilations", msstft.dilations},
              {"slope", msstft.slope}}}};
}

DiscriminatorConfig DiscriminatorConfig::from_json(const nlohmann::ordered_json& j) {
    codec::reject_unknown_keys(j, {"mpd", "msstft"}, "discriminators");
    DiscriminatorConfig c;
    if (j.contains("mpd")) {
        const auto& m = j.at("mpd");
        codec::reject_unknown_keys(m, {"periods", "channels", "kernel", "stride", "slope"}, "discriminators.mpd");
        if (m.contains("periods")) c.mpd.periods = m.at("periods").get<std::vector<int>>();
        if (m.contains("channels")) c.mpd.channels = m.at("channels").get<std::vector<int>>();
        if (m.contains("kernel")) c.mpd.kernel = m.at("kernel").get<int>();
        if (m.contains("stride")) c.mpd.stride = m.at("stride").get<int>();
        if (m.contains("slope")) c.mpd.slope = m.at("slope").get<double>();
    }
    if (j.contains("msstft")) {
        const auto& s = j.at("msstft");
        codec::reject_unknown_keys(s, {"fft_sizes", "channels", "dilations", "slope"}, "discriminators.msstft");
        if (s.contains("fft_sizes")) c.msstft.fft_sizes = s.at("fft_sizes").get<std::vector<int>>();
        if (s.contains("channels")) c.msstft.channels = s.at("channels").get<int>();
        if (s.contains("dilations")) c.msstft.dilations = s.at("dilations").get<std::vector<int>>();
        if (s.contains("slope")) c.msstft.slope = s.at("slope").get<double>();
    }
    c.mpd.validate();
    c.msstft.validate();
    return c;
}

Discriminators::Discriminators(const DiscriminatorConfig& cfg) : config(cfg) {
    config.mpd.validate();
    config.msstft.validate();
    for (int p : config.mpd.periods) mpd.emplace_back(p, config.mpd);
    for (int f : config.msstft.fft_sizes) msstft.emplace_back(f, config.msstft);
}

DiscriminatorOutput Discriminators::mpd_forward(const ad::Var& x) const {
    DiscriminatorOutput out;
    for (const auto& d : mpd) d.forward(x, out);
    return out;
}

DiscriminatorOutput Discriminators::msstft_forward(const ad::Var& x) const {
    DiscriminatorOutput out;
    for (const auto& d : msstft) d.forward(x, out);
    return out;
}

DiscriminatorOutput Discriminators::forward(const ad::Var& x) const {
    auto out = mpd_forward(x);
    out.append(msstft_forward(x));
    return out;
}

void Discriminators::init(std::uint64_t seed) {
    for (auto& d : mpd) {
        util::Rng rng(util::derive_seed(seed, "mpd.p" + std::to_string(d.period)));
        d.init(rng);
    }
    for (auto& d : msstft) {
        util::Rng rng(util::derive_seed(seed, "msstft.fft" + std::to_string(d.fft_size)));
        d.init(rng);
    }
}

nn::ParamList Discriminators::params() const {
    nn::ParamList out;
    for (const auto& d : mpd) d.collect(out, "disc.mpd.p" + std::to_string(d.period) + ".");
    for (const auto& d : msstft) d.collect(out, "disc.msstft.fft" + std::to_string(d.fft_size) + ".");
    return out;
}

// ---------------------------------------------------------------------------

namespace {

void check_arity(const DiscriminatorOutput& real, const DiscriminatorOutput& fake) {
    if (real.logits.size() != fake.logits.size())
        throw std::invalid_argument("discriminator arity mismatch: " + std::to_string(real.logits.size()) + " vs " +
                                    std::to_string(fake.logits.size()));
}

}  // namespace

ad::Var discriminator_loss(const DiscriminatorOutput& real, const DiscriminatorOutput& fake) {
    check_arity(real, fake);
    std::vector<ad::Var> terms;
    for (std::size_t i = 0; i < real.logits.size(); ++i) {
        terms.push_back(ad::mean(ad::square(ad::add_scalar(real.logits[i], -1.0))));
        terms.push_back(ad::mean(ad::square(fake.logits[i])));
    }
    return ad::sum_all(terms);
}

ad::Var generator_adversarial_loss(const DiscriminatorOutput& fake) {
    std::vector<ad::Var> terms;
    for (const auto& l : fake.logits) terms.push_back(ad::mean(ad::square(ad::add_scalar(l, -1.0))));
    return ad::sum_all(terms);
}

AdversarialLosses adversarial_losses(const DiscriminatorOutput& real, const DiscriminatorOutput& fake) {
    return {discriminator_loss(real, fake), generator_adversarial_loss(fake)};
}

ad::Var feature_matching_loss(const DiscriminatorOutput& real, const DiscriminatorOutput& fake) {
    check_arity(real, fake);
    std::vector<ad::Var> terms;
    for (std::size_t s = 0; s < real.features.size(); ++s) {
        if (real.features[s].size() != fake.features[s].size())
            throw std::invalid_argument("feature-map count mismatch in sub-discriminator " + std::to_string(s));
        for (std::size_t l = 0; l < real.features[s].size(); ++l)
            terms.push_back(ad::mean_abs_diff(real.features[s][l].detach(), fake.features[s][l]));
    }
    if (terms.empty()) return ad::Var::scalar(0.0);
    return ad::scale(ad::sum_all(terms), 1.0 / static_cast<double>(terms.size()));
}

}  // namespace dscodec::adv
