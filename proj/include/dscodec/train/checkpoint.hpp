#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dscodec/ad/tensor.hpp"
#include "dscodec/adv/discriminators.hpp"
#include "dscodec/codec/config.hpp"
#include "dscodec/nn/params.hpp"

namespace dscodec::train {

struct TensorBlob {
    std::string name;
    ad::Shape shape;
    std::vector<float> data;

    bool operator==(const TensorBlob&) const = default;
};

struct CurveRecord {
    std::int64_t step = 0;
    std::string name;
    double value = 0.0;

    bool operator==(const CurveRecord&) const = default;
};

// One newline-delimited {"step", "loss_name", "value"} record per entry.
std::string curve_to_ndjson(const std::vector<CurveRecord>& records);
std::vector<CurveRecord> curve_from_ndjson(const std::string& text);
// Values of one named series, in step order.
std::vector<double> curve_series(const std::vector<CurveRecord>& records, const std::string& name);

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Single-file archive: "DSCK" | u32 version | u64 manifest length | manifest
// JSON | tensor payloads (little-endian f32, in manifest order).
struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;

    std::string stage;
    std::int64_t step = 0;
    codec::CodecConfig config;
    adv::DiscriminatorConfig discriminators;
    std::string rng_state;
    std::int64_t generator_steps = 0;
    std::int64_t discriminator_steps = 0;
    std::vector<TensorBlob> tensors;  // parameters, then "opt.*" moments
    std::vector<CurveRecord> curves;

    std::vector<std::uint8_t> serialize() const;
    static Checkpoint deserialize(const std::vector<std::uint8_t>& bytes);
    void save(const std::filesystem::path& path) const;
    static Checkpoint load(const std::filesystem::path& path);

    const TensorBlob* find(const std::string& name) const;
    // FNV-1a over names, shapes and f32 bytes of tensors whose name starts with prefix.
    std::uint64_t hash(const std::string& prefix) const;

    // Appends parameters as f32 blobs.
    void store(const nn::ParamList& params);
    // Copies the named blobs into the parameters (exact shape match required).
    void restore(const nn::ParamList& params) const;
};

// Hash of the live parameters after rounding to f32, comparable with Checkpoint::hash.
std::uint64_t hash_params(const nn::ParamList& params);

}  // namespace dscodec::train
