#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dscodec/train/trainer.hpp"

namespace dscodec::train {

struct ModeSummary {
    std::string mode;  // "stage1" or "joint"
    std::filesystem::path curve_file;
    std::vector<double> vq_loss, io_mse;  // per step
    double final_vq_loss = 0.0;           // mean over the tail window
    double final_io_mse = 0.0;
};

struct SeedComparison {
    std::uint64_t seed = 0;
    ModeSummary mirror, joint;
    std::string lower_io_mse;   // mode name
    std::string lower_vq_loss;
};

struct ComparisonReport {
    std::int64_t steps = 0;
    double tail_fraction = 0.1;
    std::vector<SeedComparison> seeds;

    int mirror_lower_io_mse_count() const;
    // Mirror ends with lower io_mse in a strict majority of seeds.
    bool trend_holds() const;
    Json to_json() const;
};

struct ComparisonOptions {
    std::filesystem::path out_dir;  // required
    double tail_fraction = 0.1;
    std::int64_t log_every = 0;
};

// Trains the mirror stage-1 plan and the joint non-mirror plan for the same
// number of steps on the same data and seed, once per seed. Writes
// curves_seed<S>_<mode>.ndjson, report.json and io_vq_curves.svg to out_dir.
ComparisonReport mirror_vs_nonmirror(const TrainConfig& cfg, const signal::CropDataset& data,
                                     const std::vector<std::uint64_t>& seeds, const ComparisonOptions& options);

// Mean of the last ceil(fraction * n) values.
double tail_mean(const std::vector<double>& v, double fraction);
// Trailing moving average.
std::vector<double> smooth(const std::vector<double>& v, std::size_t window);

// Two-panel line plot (vq_loss, io_mse) with one line per seed and mode.
std::string render_comparison_svg(const ComparisonReport& report);

}  // namespace dscodec::train
