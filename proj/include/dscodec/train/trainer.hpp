#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dscodec/adv/discriminators.hpp"
#include "dscodec/codec/model.hpp"
#include "dscodec/signal/dataset.hpp"
#include "dscodec/train/checkpoint.hpp"
#include "dscodec/train/optimizer.hpp"
#include "dscodec/train/plan.hpp"

namespace dscodec::train {

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Mean over scales of the L1 distance between log-mel spectrograms
// (hop fft/4, min(max_bands, fft/8) bands, floor 1e-5).
ad::Var mel_loss(const ad::Var& reconstruction, const ad::Var& reference, const std::vector<int>& fft_sizes,
                 int max_bands, int sample_rate);

struct GeneratorLoss {
    ad::Var total;
    ad::Var mel, adv, fm, vq;
};

GeneratorLoss generator_loss(const ad::Var& reconstruction, const ad::Var& reference,
                             const quant::QuantizerOutput& quant, const adv::DiscriminatorOutput& real,
                             const adv::DiscriminatorOutput& fake, const TrainConfig& cfg);

struct RunOptions {
    // Curve log (NDJSON, appended every step) and NaN dumps go here; empty disables files.
    std::filesystem::path out_dir;
    std::string curve_file = "curves.ndjson";
    std::int64_t log_every = 0;  // progress lines on stderr; 0 = silent
};

class Trainer {
public:
    // `init` is required when the plan carries anything over.
    Trainer(const TrainConfig& cfg, const StagePlan& plan, const signal::CropDataset& data,
            const Checkpoint* init = nullptr, RunOptions options = {});

    void step();
    Checkpoint run();  // all remaining steps, then snapshot()
    Checkpoint snapshot() const;

    std::int64_t current_step() const { return step_; }
    const std::vector<CurveRecord>& curves() const { return curves_; }
    ad::Var batch_at(std::int64_t step) const;

    nn::ParamList trainable_generator_params() const;
    nn::ParamList frozen_params() const;

    TrainConfig config;
    StagePlan plan;
    codec::CodecModel model;
    adv::Discriminators discriminators;
    AdamW gen_opt, disc_opt;

private:
    void record(const std::string& name, double value);
    void check_frozen() const;
    [[noreturn]] void nan_abort(const std::string& what, const std::vector<std::pair<std::string, double>>& losses) const;
    void init_codebook_from_data(util::Rng& rng);

    const signal::CropDataset& data_;
    RunOptions options_;
    std::int64_t step_ = 0;
    std::uint64_t sample_offset_ = 0;
    std::uint64_t frozen_hash_ = 0;
    util::Rng rng_;
    std::vector<CurveRecord> curves_;
    std::size_t flushed_ = 0;
};

Checkpoint run_stage(const StagePlan& plan, const TrainConfig& cfg, const signal::CropDataset& data,
                     const Checkpoint* init = nullptr, const RunOptions& options = {});

struct DualStageResult {
    Checkpoint stage1;
    Checkpoint stage2;
    std::vector<CurveRecord> merged_curves;  // stage-2 steps offset by the stage-1 length
};

// Codec with the checkpoint's architecture and weights.
codec::CodecModel model_from_checkpoint(const Checkpoint& ckpt);

// Stage 1 (mirror) then stage 2 (non-mirror) from the stage-1 checkpoint.
// With an out_dir, writes stage1.ckpt, stage2.ckpt and the curve logs.
DualStageResult dual_stage_train(const TrainConfig& cfg, const signal::CropDataset& data, const RunOptions& options = {});

}  // namespace dscodec::train
