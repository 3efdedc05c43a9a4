#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dscodec/eval/metrics.hpp"
#include "json.hpp"

namespace dscodec::eval {

struct UtteranceScores {
    std::string file;
    std::optional<double> pesq, stoi, f1_vuv, utmos;
};

struct Exclusion {
    std::string file;
    std::string reason;
};

struct MetricResult {
    std::vector<UtteranceScores> rows;
    std::vector<Exclusion> excluded;
    bool has_pesq = false;
    bool has_utmos = false;

    // Mean over rows that have the metric; nullopt when none do.
    std::optional<double> mean(const std::string& metric) const;
    std::string csv() const;
    nlohmann::ordered_json summary() const;
};

// Reconstruction under test: waveform in, waveform out.
using Pipeline = std::function<Waveform(const Waveform&)>;

inline Waveform identity_pipeline(const Waveform& w) { return w; }

struct CorpusOptions {
    std::filesystem::path out_dir;  // metrics.csv and summary.json; empty skips writing
    int workers = 0;                // 0: DSCODEC_NUM_WORKERS
    VuvConfig vuv;
};

// Loads every manifest entry, reconstructs it, scores it. Files that fail to
// load or score are excluded and counted.
MetricResult evaluate_corpus(const std::vector<std::filesystem::path>& files, const Pipeline& pipeline,
                             const CorpusOptions& options = {});
MetricResult evaluate_manifest(const std::filesystem::path& manifest, const Pipeline& pipeline,
                               const CorpusOptions& options = {});

}  // namespace dscodec::eval
