#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "dscodec/ad/ops.hpp"
#include "dscodec/nn/params.hpp"

namespace dscodec::adv {

struct DiscriminatorOutput {
    std::vector<ad::Var> logits;                 // one per sub-discriminator
    std::vector<std::vector<ad::Var>> features;  // [sub][layer]

    void append(DiscriminatorOutput&& other);
};

struct MPDConfig {
    std::vector<int> periods{2, 3, 5, 7, 11};
    std::vector<int> channels{16, 32, 64, 128};  // strided layers; a stride-1 layer at channels.back() follows
    int kernel = 5;
    int stride = 3;
    double slope = 0.1;

    void validate() const;
};

struct MSSTFTConfig {
    std::vector<int> fft_sizes{2048, 1024, 512, 256, 128};
    int channels = 16;
    std::vector<int> dilations{1, 2, 4};
    double slope = 0.2;

    void validate() const;
};

// One period: the signal is folded into (T/p, p) and every column runs
// through the same (k x 1) convolution stack, implemented as 1-D convs on
// B*p sequences.
class PeriodDiscriminator {
public:
    PeriodDiscriminator() = default;
    PeriodDiscriminator(int period, const MPDConfig& cfg);
    void forward(const ad::Var& x, DiscriminatorOutput& out) const;  // x (B, T)
    void init(util::Rng& rng);
    void collect(nn::ParamList& out, const std::string& prefix) const;

    int period = 2;
    double slope = 0.1;
    struct Layer {
        ad::Var w, b;
        ad::Conv1dOptions opt;
    };
    std::vector<Layer> layers;  // last one is the 1-channel projection
};

class StftDiscriminator {
public:
    StftDiscriminator() = default;
    StftDiscriminator(int fft_size, const MSSTFTConfig& cfg);
    void forward(const ad::Var& x, DiscriminatorOutput& out) const;
    void init(util::Rng& rng);
    void collect(nn::ParamList& out, const std::string& prefix) const;

    int fft_size = 1024;
    double slope = 0.2;
    struct Layer {
        ad::Var w, b;
        ad::Conv2dOptions opt;
    };
    std::vector<Layer> layers;
};

struct DiscriminatorConfig {
    MPDConfig mpd;
    MSSTFTConfig msstft;

    nlohmann::ordered_json to_json() const;
    static DiscriminatorConfig from_json(const nlohmann::ordered_json& j);
};

class Discriminators {
public:
    Discriminators() = default;
    explicit Discriminators(const DiscriminatorConfig& cfg);

    DiscriminatorOutput mpd_forward(const ad::Var& x) const;
    DiscriminatorOutput msstft_forward(const ad::Var& x) const;
    DiscriminatorOutput forward(const ad::Var& x) const;  // MPD subs then STFT subs

    void init(std::uint64_t seed);
    nn::ParamList params() const;

    DiscriminatorConfig config;
    std::vector<PeriodDiscriminator> mpd;
    std::vector<StftDiscriminator> msstft;
};

struct AdversarialLosses {
    ad::Var d_loss;
    ad::Var g_loss;
};

// Least-squares GAN: d = sum mean((r-1)^2) + mean(f^2); g = sum mean((f-1)^2).
AdversarialLosses adversarial_losses(const DiscriminatorOutput& real, const DiscriminatorOutput& fake);
ad::Var discriminator_loss(const DiscriminatorOutput& real, const DiscriminatorOutput& fake);
ad::Var generator_adversarial_loss(const DiscriminatorOutput& fake);
// Mean |real - fake| per feature map, averaged over all maps; real is detached.
ad::Var feature_matching_loss(const DiscriminatorOutput& real, const DiscriminatorOutput& fake);

}  // namespace dscodec::adv
