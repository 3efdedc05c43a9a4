#pragma once

#include "dscodec/signal/dataset.hpp"
#include "dscodec/signal/synthetic.hpp"
#include "dscodec/train/plan.hpp"

namespace testutil {

// Smallest configuration that still exercises every submodule.
inline dscodec::train::TrainConfig tiny_train_config(std::uint64_t seed = 11) {
    dscodec::train::TrainConfig cfg;
    cfg.seed = seed;
    auto& c = cfg.codec;
    c.channels = {2, 2, 3, 3, 4, 4};
    c.kernel = 3;
    c.dilations = {1};
    c.lstm_layers = 1;
    c.quantizer.group_sizes = {64};
    c.quantizer.code_dim = 2;
    c.transformer.n_heads = 2;
    c.transformer.layers = 1;
    cfg.discriminators.mpd.periods = {2, 3};
    cfg.discriminators.mpd.channels = {2, 2};
    cfg.discriminators.msstft.fft_sizes = {128, 64};
    cfg.discriminators.msstft.channels = 2;
    cfg.discriminators.msstft.dilations = {1};
    cfg.crop_length = 400;
    cfg.stage1_steps = 4;
    cfg.stage2_steps = 3;
    cfg.stage1_batch = 2;
    cfg.stage2_batch = 3;
    cfg.stage1_lr = {1e-3, 1e-4, 2};
    cfg.freeze_check_every = 1;
    return cfg;
}

inline dscodec::signal::CropDataset tiny_dataset(std::int64_t crop = 400, std::uint64_t seed = 3) {
    return dscodec::signal::CropDataset(dscodec::signal::synth_corpus(4, 0.2, seed), crop, seed);
}

}  // namespace testutil
