#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dscodec/adv/discriminators.hpp"
#include "dscodec/codec/config.hpp"

namespace dscodec::train {

using Json = nlohmann::ordered_json;

// Linear from `start` at step 0 to `end` at step `ramp_steps`, constant after.
struct LrSchedule {
    double start = 1e-4;
    double end = 1e-5;
    std::int64_t ramp_steps = 1000;

    double at(std::int64_t step) const;
};

enum class StageKind { Stage1Mirror, Stage2NonMirror, Stage2T, JointNonMirror };
enum class InitPolicy { Fresh, CarryOver, FrozenCarryOver, Absent };

std::string to_string(StageKind kind);
StageKind stage_kind_from_string(const std::string& name);  // stage1 | stage2 | stage2t | joint
std::string to_string(InitPolicy policy);

struct LossWeights {
    double mel = 15.0;
    double adv = 1.0;
    double fm = 2.0;
    double vq = 1.0;
};

struct OptimSettings {
    double beta1 = 0.8;
    double beta2 = 0.9;
    double eps = 1e-8;
    double weight_decay = 0.01;
    double clip_norm = 1.0;  // global norm; <= 0 disables
};

struct StagePlan {
    StageKind kind = StageKind::Stage1Mirror;
    InitPolicy encoder = InitPolicy::Fresh;
    InitPolicy quantizer = InitPolicy::Fresh;
    InitPolicy transformer = InitPolicy::Absent;
    InitPolicy decoder = InitPolicy::Fresh;
    InitPolicy discriminators = InitPolicy::Fresh;
    std::int64_t batch_size = 10;
    std::int64_t total_steps = 2000;
    LrSchedule lr;

    bool has_transformer() const { return transformer != InitPolicy::Absent; }
    bool needs_checkpoint() const;
    static bool trainable(InitPolicy p) { return p == InitPolicy::Fresh || p == InitPolicy::CarryOver; }
    void validate() const;
    Json to_json() const;
};

struct TrainConfig {
    codec::CodecConfig codec;
    adv::DiscriminatorConfig discriminators;
    LossWeights loss;
    OptimSettings optim;

    std::uint64_t seed = 0;
    std::int64_t crop_length = 16000;
    std::int64_t stage1_steps = 2000;
    std::int64_t stage2_steps = 1000;
    std::int64_t stage1_batch = 10;
    std::int64_t stage2_batch = 24;
    LrSchedule stage1_lr{1e-4, 1e-5, 1000};
    double stage2_lr_start = 2e-5;
    double stage2_lr_end = 1e-5;

    // Multi-scale mel loss; empty uses the MS-STFT discriminator scales.
    std::vector<int> mel_fft_sizes;
    int mel_max_bands = 80;
    // Encoder frames used for k-means codebook init; 0 keeps the random init.
    std::int64_t codebook_init_frames = 0;
    std::int64_t freeze_check_every = 50;

    std::vector<int> effective_mel_sizes() const;
    StagePlan plan(StageKind kind) const;

    void validate() const;
    Json to_json() const;
    // Unknown keys are rejected; `seed` is required.
    static TrainConfig from_json(const Json& j);
};

}  // namespace dscodec::train
