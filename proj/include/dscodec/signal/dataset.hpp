#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dscodec/ad/tensor.hpp"
#include "dscodec/signal/wav.hpp"

namespace dscodec::signal {

// Reads a newline-separated list of paths; blank lines and '#' comments are
// skipped. Relative paths resolve against the manifest's directory.
std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& manifest);

// Fixed-length random crops over an in-memory corpus. Every crop is a pure
// function of (seed, epoch, position), so access order never changes content.
class CropDataset {
public:
    CropDataset(std::vector<Waveform> utterances, std::int64_t crop_length, std::uint64_t seed);

    // Loads every manifest entry, using up to DSCODEC_NUM_WORKERS threads.
    static CropDataset from_manifest(const std::filesystem::path& manifest, std::int64_t crop_length,
                                     std::uint64_t seed, const LoadOptions& opt = {});

    std::size_t num_utterances() const { return utterances_.size(); }
    const Waveform& utterance(std::size_t i) const { return utterances_.at(i); }
    std::int64_t crop_length() const { return crop_length_; }
    std::uint64_t seed() const { return seed_; }
    double total_seconds() const;

    // Utterance visited at `position` of `epoch` (a seeded permutation).
    std::size_t utterance_index(std::uint64_t epoch, std::uint64_t position) const;
    // Start offset of the crop; 0 when the utterance is not longer than the crop.
    std::int64_t crop_start(std::uint64_t epoch, std::uint64_t position) const;
    // Exactly crop_length samples, right zero-padded for short utterances.
    Waveform random_crop(std::uint64_t epoch, std::uint64_t position) const;
    // Global sample index -> (epoch, position).
    Waveform sample(std::uint64_t index) const;

    // Crops for samples [step*batch, (step+1)*batch) as a (batch, crop_length) tensor.
    ad::Var batch(std::uint64_t step, std::int64_t batch_size) const;

private:
    std::vector<Waveform> utterances_;
    std::int64_t crop_length_;
    std::uint64_t seed_;
};

// DSCODEC_NUM_WORKERS if set and positive, else 1.
int configured_workers();

}  // namespace dscodec::signal
