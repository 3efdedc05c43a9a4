#include "dscodec/train/plan.hpp"

#include <stdexcept>

namespace dscodec::train {

double LrSchedule::at(std::int64_t step) const {
    if (step < 0) throw std::invalid_argument("learning-rate schedule: negative step");
    if (ramp_steps <= 0 || step >= ramp_steps) return end;
    return start + (end - start) * static_cast<double>(step) / static_cast<double>(ramp_steps);
}

std::string to_string(StageKind kind) {
    switch (kind) {
        case StageKind::Stage1Mirror: return "stage1";
        case StageKind::Stage2NonMirror: return "stage2";
        case StageKind::Stage2T: return "stage2t";
        case StageKind::JointNonMirror: return "joint";
    }
    return "?";
}

StageKind stage_kind_from_string(const std::string& name) {
    if (name == "stage1") return StageKind::Stage1Mirror;
    if (name == "stage2") return StageKind::Stage2NonMirror;
    if (name == "stage2t") return StageKind::Stage2T;
    if (name == "joint") return StageKind::JointNonMirror;
    throw std::invalid_argument("unknown stage '" + name + "' (expected stage1, stage2, stage2t or joint)");
}

std::string to_string(InitPolicy p) {
    switch (p) {
        case InitPolicy::Fresh: return "fresh";
        case InitPolicy::CarryOver: return "carry-over";
        case InitPolicy::FrozenCarryOver: return "frozen-carry-over";
        case InitPolicy::Absent: return "absent";
    }
    return "?";
}

bool StagePlan::needs_checkpoint() const {
    for (auto p : {encoder, quantizer, transformer, decoder, discriminators})
        if (p == InitPolicy::CarryOver || p == InitPolicy::FrozenCarryOver) return true;
    return false;
}

void StagePlan::validate() const {
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (total_steps < 0) throw std::invalid_argument("total_steps must be >= 0");
    if (encoder == InitPolicy::Absent || quantizer == InitPolicy::Absent || decoder == InitPolicy::Absent ||
        discriminators == InitPolicy::Absent)
        throw std::invalid_argument("only the transformer may be absent from a stage");
    if (kind == StageKind::Stage1Mirror && has_transformer())
        throw std::invalid_argument("the mirror stage has no transformer");
    if (kind == StageKind::Stage2NonMirror &&
        (encoder != InitPolicy::FrozenCarryOver || quantizer != InitPolicy::FrozenCarryOver ||
         decoder != InitPolicy::CarryOver || transformer != InitPolicy::Fresh || discriminators != InitPolicy::Fresh))
        throw std::invalid_argument("stage2 must freeze encoder+quantizer, carry the decoder, and start a fresh "
                                    "transformer and discriminators");
}

Json StagePlan::to_json() const {
    return {{"stage", to_string(kind)},
            {"encoder", to_string(encoder)},
            {"quantizer", to_string(quantizer)},
            {"transformer", to_string(transformer)},
            {"decoder", to_string(decoder)},
            {"discriminators", to_string(discriminators)},
            {"batch_size", batch_size},
            {"total_steps", total_steps},
            {"lr", {{"start", lr.start}, {"end", lr.end}, {"ramp_steps", lr.ramp_steps}}}};
}

std::vector<int> TrainConfig::effective_mel_sizes() const {
    return mel_fft_sizes.empty() ? discriminators.msstft.fft_sizes : mel_fft_sizes;
}

StagePlan TrainConfig::plan(StageKind kind) const {
    StagePlan p;
    p.kind = kind;
    switch (kind) {
        case StageKind::Stage1Mirror:
        case StageKind::JointNonMirror:
            p.transformer = kind == StageKind::JointNonMirror ? InitPolicy::Fresh : InitPolicy::Absent;
            p.batch_size = stage1_batch;
            p.total_steps = stage1_steps;
            p.lr = stage1_lr;
            break;
        case StageKind::Stage2NonMirror:
        case StageKind::Stage2T:
            p.encoder = InitPolicy::FrozenCarryOver;
            p.quantizer = InitPolicy::FrozenCarryOver;
            p.transformer = kind == StageKind::Stage2NonMirror ? InitPolicy::Fresh : InitPolicy::Absent;
            p.decoder = InitPolicy::CarryOver;
            p.discriminators = InitPolicy::Fresh;
            p.batch_size = stage2_batch;
            p.total_steps = stage2_steps;
            p.lr = {stage2_lr_start, stage2_lr_end, stage2_steps};
            break;
    }
    return p;
}

void TrainConfig::validate() const {
    codec.validate();
    discriminators.mpd.validate();
    discriminators.msstft.validate();
    if (crop_length < codec.hop() || crop_length % codec.hop() != 0)
        throw std::invalid_argument("crop_length must be a positive multiple of " + std::to_string(codec.hop()));
    for (double w : {loss.mel, loss.adv, loss.fm, loss.vq})
        if (!(w >= 0.0)) throw std::invalid_argument("loss weights must be >= 0");
    if (!(optim.beta1 >= 0 && optim.beta1 < 1 && optim.beta2 >= 0 && optim.beta2 < 1))
        throw std::invalid_argument("optimizer betas must lie in [0, 1)");
    if (stage1_batch < 1 || stage2_batch < 1) throw std::invalid_argument("batch sizes must be >= 1");
    if (stage1_steps < 0 || stage2_steps < 0) throw std::invalid_argument("step counts must be >= 0");
    if (mel_max_bands < 1) throw std::invalid_argument("mel_max_bands must be >= 1");
    for (int f : effective_mel_sizes())
        if (f < 16 || f % 4 != 0) throw std::invalid_argument("mel fft sizes must be multiples of 4 and >= 16");
    if (codebook_init_frames < 0) throw std::invalid_argument("codebook_init_frames must be >= 0");
}

Json TrainConfig::to_json() const {
    return {{"seed", seed},
            {"codec", codec.to_json()},
            {"discriminators", discriminators.to_json()},
            {"loss", {{"mel", loss.mel}, {"adv", loss.adv}, {"fm", loss.fm}, {"vq", loss.vq}}},
            {"optim",
             {{"beta1", optim.beta1},
              {"beta2", optim.beta2},
              {"eps", optim.eps},
              {"weight_decay", optim.weight_decay},
              {"clip_norm", optim.clip_norm}}},
            {"crop_length", crop_length},
            {"stage1_steps", stage1_steps},
            {"stage2_steps", stage2_steps},
            {"stage1_batch", stage1_batch},
            {"stage2_batch", stage2_batch},
            {"stage1_lr", {{"start", stage1_lr.start}, {"end", stage1_lr.end}, {"ramp_steps", stage1_lr.ramp_steps}}},
            {"stage2_lr", {{"start", stage2_lr_start}, {"end", stage2_lr_end}}},
            {"mel_fft_sizes", mel_fft_sizes},
            {"mel_max_bands", mel_max_bands},
            {"codebook_init_frames", codebook_init_frames},
            {"freeze_check_every", freeze_check_every}};
}

namespace {

template <typename T>
void read(const Json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

TrainConfig TrainConfig::from_json(const Json& j) {
    codec::reject_unknown_keys(j,
                               {"seed", "codec", "discriminators", "loss", "optim", "crop_length", "stage1_steps",
                                "stage2_steps", "stage1_batch", "stage2_batch", "stage1_lr", "stage2_lr",
                                "mel_fft_sizes", "mel_max_bands", "codebook_init_frames", "freeze_check_every"},
                               "train config");
    if (!j.contains("seed")) throw std::invalid_argument("train config: 'seed' is required");
    TrainConfig c;
    c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("codec")) c.codec = codec::CodecConfig::from_json(j.at("codec"));
    if (j.contains("discriminators")) c.discriminators = adv::DiscriminatorConfig::from_json(j.at("discriminators"));
    if (j.contains("loss")) {
        const auto& l = j.at("loss");
        codec::reject_unknown_keys(l, {"mel", "adv", "fm", "vq"}, "train config loss");
        read(l, "mel", c.loss.mel);
        read(l, "adv", c.loss.adv);
        read(l, "fm", c.loss.fm);
        read(l, "vq", c.loss.vq);
    }
    if (j.contains("optim")) {
        const auto& o = j.at("optim");
        codec::reject_unknown_keys(o, {"beta1", "beta2", "eps", "weight_decay", "clip_norm"}, "train config optim");
        read(o, "beta1", c.optim.beta1);
        read(o, "beta2", c.optim.beta2);
        read(o, "eps", c.optim.eps);
        read(o, "weight_decay", c.optim.weight_decay);
        read(o, "clip_norm", c.optim.clip_norm);
    }
    read(j, "crop_length", c.crop_length);
    read(j, "stage1_steps", c.stage1_steps);
    read(j, "stage2_steps", c.stage2_steps);
    read(j, "stage1_batch", c.stage1_batch);
    read(j, "stage2_batch", c.stage2_batch);
    if (j.contains("stage1_lr")) {
        const auto& s = j.at("stage1_lr");
        codec::reject_unknown_keys(s, {"start", "end", "ramp_steps"}, "train config stage1_lr");
        read(s, "start", c.stage1_lr.start);
        read(s, "end", c.stage1_lr.end);
        read(s, "ramp_steps", c.stage1_lr.ramp_steps);
    }
    if (j.contains("stage2_lr")) {
        const auto& s = j.at("stage2_lr");
        codec::reject_unknown_keys(s, {"start", "end"}, "train config stage2_lr");
        read(s, "start", c.stage2_lr_start);
        read(s, "end", c.stage2_lr_end);
    }
    read(j, "mel_fft_sizes", c.mel_fft_sizes);
    read(j, "mel_max_bands", c.mel_max_bands);
    read(j, "codebook_init_frames", c.codebook_init_frames);
    read(j, "freeze_check_every", c.freeze_check_every);
    c.validate();
    return c;
}

}  // namespace dscodec::train
