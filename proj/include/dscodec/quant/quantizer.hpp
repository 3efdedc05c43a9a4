#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dscodec/ad/ops.hpp"
#include "dscodec/nn/params.hpp"

namespace dscodec::quant {

struct VQConfig {
    int codebook_size = 8192;
    int code_dim = 8;
    int input_dim = 512;
    double commitment_beta = 0.25;
    bool normalize_before_projection = false;

    void validate() const;
};

// Per-group result. Frames are flattened batch-major: index n = b * T + t.
struct GroupOutput {
    ad::Var quantized;  // (B, input_dim, T)
    ad::Var projected;  // (N, code_dim), unit rows; receives the straight-through gradient
    std::vector<std::uint32_t> indices;
    ad::Var codebook_loss;
    ad::Var commitment_loss;  // already scaled by beta
    ad::Var vq_loss;          // codebook_loss + commitment_loss
    double utilization = 0.0;
};

// Exhaustive nearest neighbour by squared Euclidean distance; strict '<'
// so ties resolve to the lowest index.
std::vector<std::uint32_t> nearest_codes(std::span<const double> codes, int code_count, int dim,
                                         std::span<const double> queries);

class VectorQuantizer {
public:
    VectorQuantizer() = default;
    explicit VectorQuantizer(const VQConfig& config);

    GroupOutput quantize(const ad::Var& latent) const;  // latent (B, input_dim, T)
    // Gradient-free decode of indices into (batch, input_dim, frames).
    ad::Var lookup(std::span<const std::uint32_t> indices, std::int64_t batch, std::int64_t frames) const;

    // Projections U(+-1/sqrt(fan_in)); codebook from normalized Gaussians.
    void init(util::Rng& rng);
    // k-means++ plus spherical Lloyd refinement on projected, normalized
    // samples (rows of length input_dim). Falls back to the Gaussian init
    // (returning false) when there are fewer distinct samples than codes.
    bool init_codebook_from(std::span<const double> latents, util::Rng& rng, int lloyd_iterations = 10);

    // Unit-norm copy of the codebook, (S, code_dim) row-major.
    std::vector<double> normalized_codebook() const;
    // Normalized projection of latent rows (N, input_dim) -> (N, code_dim).
    std::vector<double> project(std::span<const double> latents) const;

    void collect(nn::ParamList& out, const std::string& prefix) const;

    VQConfig config;
    ad::Var down_proj;  // (code_dim, input_dim)
    ad::Var codebook;   // (S, code_dim), normalized on read
    ad::Var up_proj;    // (input_dim, code_dim)
};

struct QuantizerConfig {
    bool product = false;
    std::vector<int> group_sizes{8192};
    int code_dim = 8;  // per group
    double commitment_beta = 0.25;
    bool normalize_before_projection = false;

    void validate(int input_dim) const;
    std::uint64_t effective_size() const;
};

struct QuantizerOutput {
    ad::Var quantized;  // (B, D, T)
    std::vector<std::uint64_t> indices;  // composed per frame, batch-major
    std::int64_t batch = 0, frames = 0;
    ad::Var vq_loss;
    double io_mse = 0.0;
    double utilization = 0.0;  // mean over groups of distinct-codes / group size
    std::vector<GroupOutput> groups;
};

// VQ (one group) or PQ (contiguous equal channel split, one VQ per group).
class Quantizer {
public:
    Quantizer() = default;
    Quantizer(const QuantizerConfig& config, int input_dim);

    QuantizerOutput forward(const ad::Var& latent) const;
    ad::Var lookup(std::span<const std::uint64_t> codes, std::int64_t batch, std::int64_t frames) const;
    void init(util::Rng& rng);
    void collect(nn::ParamList& out, const std::string& prefix) const;

    std::uint64_t effective_size() const { return config.effective_size(); }
    std::vector<int> sizes() const;

    QuantizerConfig config;
    int input_dim = 0;
    std::vector<VectorQuantizer> groups;
};

// Mixed-radix composition: code = code * S_i + c_i for i = 1..Nq.
std::uint64_t pq_compose(std::span<const std::uint32_t> sub_indices, std::span<const int> group_sizes);
std::vector<std::uint32_t> pq_decompose(std::uint64_t code, std::span<const int> group_sizes);

// ceil(log2(effective_size)) * token_rate, bits per second.
double bitrate(std::uint64_t effective_size, double token_rate);

}  // namespace dscodec::quant
