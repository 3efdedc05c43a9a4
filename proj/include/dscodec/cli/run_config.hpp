#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dscodec/signal/dataset.hpp"
#include "dscodec/train/plan.hpp"

namespace dscodec::cli {

using Json = nlohmann::ordered_json;

// Training corpus: a manifest of WAV files, or (when no manifest is given)
// a synthetic speech-like corpus.
struct DataConfig {
    std::filesystem::path manifest;  // relative paths resolve against the config file
    int synthetic_utterances = 30;
    double synthetic_seconds = 10.0;
    std::uint64_t synthetic_seed = 0;  // 0: derived from train.seed
    std::uint64_t crop_seed = 0;       // 0: derived from train.seed
    bool allow_resample = false;

    Json to_json() const;
    static DataConfig from_json(const Json& j);
};

struct RunConfig {
    train::TrainConfig train;
    DataConfig data;
    std::filesystem::path out_dir = "runs/default";
    std::vector<std::uint64_t> compare_seeds{1, 2, 3};
    std::string pesq_command;  // empty: PESQ reported as absent

    Json to_json() const;
    // Unknown keys anywhere are rejected; train.seed is required.
    static RunConfig from_json(const Json& j);
    static RunConfig load(const std::filesystem::path& path);

    signal::CropDataset dataset() const;
};

// Desk-scale starting point for a first run: the default codec with the
// default stage plans, seed 1, synthetic data.
RunConfig default_run_config();

}  // namespace dscodec::cli
