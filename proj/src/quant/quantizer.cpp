#include "dscodec/quant/quantizer.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <unordered_set>

namespace dscodec::quant {

namespace {

void normalize_rows(std::vector<double>& m, int dim) {
    for (std::size_t r = 0; r < m.size() / static_cast<std::size_t>(dim); ++r) {
        double* row = m.data() + r * static_cast<std::size_t>(dim);
        double n2 = 0.0;
        for (int k = 0; k < dim; ++k) n2 += row[k] * row[k];
        const double inv = 1.0 / std::max(std::sqrt(n2), 1e-12);
        for (int k = 0; k < dim; ++k) row[k] *= inv;
    }
}

double sq_dist(const double* a, const double* b, int dim) {
    double d = 0.0;
    for (int k = 0; k < dim; ++k) {
        const double e = a[k] - b[k];
        d += e * e;
    }
    return d;
}

// (B, D, T) -> (B*T, D)
ad::Var frames_major(const ad::Var& x) {
    return ad::reshape(ad::permute(x, {0, 2, 1}), {x.dim(0) * x.dim(2), x.dim(1)});
}

ad::Var channels_major(const ad::Var& rows, std::int64_t batch, std::int64_t frames) {
    return ad::permute(ad::reshape(rows, {batch, frames, rows.dim(1)}), {0, 2, 1});
}

double distinct_fraction(std::span<const std::uint32_t> idx, int size) {
    std::unordered_set<std::uint32_t> seen(idx.begin(), idx.end());
    return static_cast<double>(seen.size()) / static_cast<double>(size);
}

}  // namespace

void VQConfig::validate() const {
    if (codebook_size < 2) throw std::invalid_argument("codebook_size must be >= 2");
    if (code_dim < 1 || input_dim < 1) throw std::invalid_argument("quantizer dimensions must be positive");
    if (code_dim > input_dim)
        throw std::invalid_argument("code_dim " + std::to_string(code_dim) + " exceeds input_dim " +
                                    std::to_string(input_dim));
    if (!(commitment_beta >= 0.0)) throw std::invalid_argument("commitment_beta must be >= 0");
}

std::vector<std::uint32_t> nearest_codes(std::span<const double> codes, int code_count, int dim,
                                         std::span<const double> queries) {
    const std::size_t n = queries.size() / static_cast<std::size_t>(dim);
    std::vector<std::uint32_t> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* q = queries.data() + i * static_cast<std::size_t>(dim);
        double best = std::numeric_limits<double>::infinity();
        std::uint32_t arg = 0;
        for (int j = 0; j < code_count; ++j) {
            const double d = sq_dist(q, codes.data() + static_cast<std::size_t>(j) * dim, dim);
            if (d < best) {
                best = d;
                arg = static_cast<std::uint32_t>(j);
            }
        }
        out[i] = arg;
    }
    return out;
}

// ---------------------------------------------------------------------------

VectorQuantizer::VectorQuantizer(const VQConfig& c)
    : config(c),
      down_proj(nn::make_param({c.code_dim, c.input_dim})),
      codebook(nn::make_param({c.codebook_size, c.code_dim})),
      up_proj(nn::make_param({c.input_dim, c.code_dim})) {
    config.validate();
}

GroupOutput VectorQuantizer::quantize(const ad::Var& latent) const {
    if (latent.ndim() != 3 || latent.dim(1) != config.input_dim)
        throw std::invalid_argument("vector quantizer expects (B, " + std::to_string(config.input_dim) + ", T), got " +
                                    ad::shape_str(latent.shape()));
    const auto batch = latent.dim(0), frames = latent.dim(2);
    const auto n = batch * frames;
    GroupOutput out;
    if (n == 0) {
        out.quantized = ad::Var::zeros(latent.shape());
        out.projected = ad::Var::zeros({0, config.code_dim});
        out.codebook_loss = ad::Var::scalar(0.0);
        out.commitment_loss = ad::Var::scalar(0.0);
        out.vq_loss = ad::Var::scalar(0.0);
        return out;
    }
    ad::Var rows = frames_major(latent);
    if (config.normalize_before_projection) rows = ad::l2_normalize(rows);
    ad::Var z = ad::l2_normalize(ad::linear(rows, down_proj));
    ad::Var cb = ad::l2_normalize(codebook);

    out.indices = nearest_codes(cb.values(), config.codebook_size, config.code_dim, z.values());
    ad::Var c = ad::gather_rows(cb, out.indices);

    const double dim = config.code_dim;
    out.codebook_loss = ad::scale(ad::mean_sq_diff(z.detach(), c), dim);
    out.commitment_loss = ad::scale(ad::mean_sq_diff(z, c.detach()), dim * config.commitment_beta);
    out.vq_loss = ad::add(out.codebook_loss, out.commitment_loss);

    ad::Var zq = ad::straight_through(z, c);
    out.quantized = channels_major(ad::linear(zq, up_proj), batch, frames);
    out.projected = z;
    out.utilization = distinct_fraction(out.indices, config.codebook_size);
    return out;
}

ad::Var VectorQuantizer::lookup(std::span<const std::uint32_t> indices, std::int64_t batch, std::int64_t frames) const {
    if (static_cast<std::int64_t>(indices.size()) != batch * frames)
        throw std::invalid_argument("lookup: index count does not match batch x frames");
    for (auto i : indices)
        if (i >= static_cast<std::uint32_t>(config.codebook_size))
            throw std::out_of_range("code index " + std::to_string(i) + " out of range for codebook of " +
                                    std::to_string(config.codebook_size));
    ad::NoGradGuard ng;
    if (indices.empty()) return ad::Var::zeros({batch, config.input_dim, frames});
    ad::Var c = ad::gather_rows(ad::l2_normalize(codebook), indices);
    return channels_major(ad::linear(c, up_proj), batch, frames);
}

void VectorQuantizer::init(util::Rng& rng) {
    nn::fill_uniform(down_proj, rng, 1.0 / std::sqrt(static_cast<double>(config.input_dim)));
    nn::fill_uniform(up_proj, rng, 1.0 / std::sqrt(static_cast<double>(config.code_dim)));
    auto& v = codebook.values();
    for (auto& x : v) x = rng.normal();
    normalize_rows(v, config.code_dim);
}

std::vector<double> VectorQuantizer::normalized_codebook() const {
    std::vector<double> cb = codebook.values();
    normalize_rows(cb, config.code_dim);
    return cb;
}

std::vector<double> VectorQuantizer::project(std::span<const double> latents) const {
    ad::NoGradGuard ng;
    const auto n = static_cast<std::int64_t>(latents.size()) / config.input_dim;
    ad::Var rows = ad::Var::from({n, config.input_dim}, std::vector<double>(latents.begin(), latents.end()));
    if (config.normalize_before_projection) rows = ad::l2_normalize(rows);
    return ad::l2_normalize(ad::linear(rows, down_proj)).values();
}

bool VectorQuantizer::init_codebook_from(std::span<const double> latents, util::Rng& rng, int lloyd_iterations) {
    const int d = config.code_dim, s = config.codebook_size;
    std::vector<double> pts = project(latents);
    const std::size_t n = pts.size() / static_cast<std::size_t>(d);

    std::set<std::vector<double>> distinct;
    for (std::size_t i = 0; i < n && distinct.size() < static_cast<std::size_t>(s); ++i)
        distinct.emplace(pts.begin() + static_cast<std::ptrdiff_t>(i * d), pts.begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
    if (distinct.size() < static_cast<std::size_t>(s)) {
        spdlog::warn("codebook init: {} distinct samples for {} codes, using random unit codes", distinct.size(), s);
        auto& v = codebook.values();
        for (auto& x : v) x = rng.normal();
        normalize_rows(v, d);
        return false;
    }

    // k-means++ seeding
    std::vector<double> centers(static_cast<std::size_t>(s) * d);
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    std::size_t pick = static_cast<std::size_t>(rng.below(n));
    for (int c = 0; c < s; ++c) {
        std::copy_n(pts.begin() + static_cast<std::ptrdiff_t>(pick * d), d, centers.begin() + static_cast<std::ptrdiff_t>(c) * d);
        if (c + 1 == s) break;
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], sq_dist(pts.data() + i * d, centers.data() + static_cast<std::size_t>(c) * d, d));
            total += d2[i];
        }
        double target = rng.uniform() * total;
        pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
            if (d2[i] <= 0.0) continue;
            target -= d2[i];
            if (target < 0.0) {
                pick = i;
                break;
            }
        }
        while (d2[pick] <= 0.0) --pick;  // rounding at the tail
    }

    // spherical Lloyd
    std::vector<double> sums(centers.size());
    std::vector<std::size_t> counts(static_cast<std::size_t>(s));
    for (int it = 0; it < lloyd_iterations; ++it) {
        auto assign = nearest_codes(centers, s, d, pts);
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++counts[assign[i]];
            for (int k = 0; k < d; ++k) sums[assign[i] * static_cast<std::size_t>(d) + k] += pts[i * d + k];
        }
        for (int c = 0; c < s; ++c) {
            double n2 = 0.0;
            for (int k = 0; k < d; ++k) n2 += sums[static_cast<std::size_t>(c) * d + k] * sums[static_cast<std::size_t>(c) * d + k];
            if (counts[c] == 0 || n2 < 1e-24) continue;
            const double inv = 1.0 / std::sqrt(n2);
            for (int k = 0; k < d; ++k) centers[static_cast<std::size_t>(c) * d + k] = sums[static_cast<std::size_t>(c) * d + k] * inv;
        }
    }
    codebook.values() = std::move(centers);
    return true;
}

void VectorQuantizer::collect(nn::ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + "down_proj", down_proj});
    out.push_back({prefix + "codebook", codebook});
    out.push_back({prefix + "up_proj", up_proj});
}

// ---------------------------------------------------------------------------

void QuantizerConfig::validate(int input_dim) const {
    if (group_sizes.empty()) throw std::invalid_argument("quantizer needs at least one codebook");
    if (!product && group_sizes.size() != 1) throw std::invalid_argument("a VQ quantizer has exactly one codebook size");
    for (int s : group_sizes)
        if (s < 2 || s > 65535) throw std::invalid_argument("codebook sizes must lie in [2, 65535]");
    if (input_dim % static_cast<int>(group_sizes.size()) != 0)
        throw std::invalid_argument("input_dim " + std::to_string(input_dim) + " is not divisible into " +
                                    std::to_string(group_sizes.size()) + " groups");
    if (code_dim > input_dim / static_cast<int>(group_sizes.size()))
        throw std::invalid_argument("code_dim exceeds the per-group width");
    if (effective_size() == 0) throw std::invalid_argument("effective codebook size overflows 64 bits");
}

std::uint64_t QuantizerConfig::effective_size() const {
    std::uint64_t p = 1;
    for (int s : group_sizes) {
        if (p > std::numeric_limits<std::uint64_t>::max() / static_cast<std::uint64_t>(s)) return 0;
        p *= static_cast<std::uint64_t>(s);
    }
    return p;
}

Quantizer::Quantizer(const QuantizerConfig& c, int dim) : config(c), input_dim(dim) {
    config.validate(dim);
    const int g = static_cast<int>(config.group_sizes.size());
    for (int s : config.group_sizes)
        groups.emplace_back(VQConfig{s, config.code_dim, dim / g, config.commitment_beta, config.normalize_before_projection});
}

std::vector<int> Quantizer::sizes() const { return config.group_sizes; }

QuantizerOutput Quantizer::forward(const ad::Var& latent) const {
    if (latent.ndim() != 3 || latent.dim(1) != input_dim)
        throw std::invalid_argument("quantizer expects (B, " + std::to_string(input_dim) + ", T), got " +
                                    ad::shape_str(latent.shape()));
    QuantizerOutput out;
    out.batch = latent.dim(0);
    out.frames = latent.dim(2);
    const std::int64_t width = input_dim / static_cast<std::int64_t>(groups.size());
    std::vector<ad::Var> parts, losses;
    double util_sum = 0.0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        ad::Var x = groups.size() == 1 ? latent : ad::slice(latent, 1, static_cast<std::int64_t>(g) * width, width);
        out.groups.push_back(groups[g].quantize(x));
        parts.push_back(out.groups.back().quantized);
        losses.push_back(out.groups.back().vq_loss);
        util_sum += out.groups.back().utilization;
    }
    out.quantized = parts.size() == 1 ? parts[0] : ad::concat(parts, 1);
    out.vq_loss = losses.size() == 1 ? losses[0] : ad::sum_all(losses);
    out.utilization = util_sum / static_cast<double>(groups.size());

    const std::size_t n = static_cast<std::size_t>(out.batch * out.frames);
    out.indices.resize(n);
    std::vector<std::uint32_t> sub(groups.size());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t g = 0; g < groups.size(); ++g) sub[g] = out.groups[g].indices[i];
        out.indices[i] = pq_compose(sub, config.group_sizes);
    }

    const auto& a = latent.values();
    const auto& b = out.quantized.values();
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    out.io_mse = a.empty() ? 0.0 : acc / static_cast<double>(a.size());
    return out;
}

ad::Var Quantizer::lookup(std::span<const std::uint64_t> codes, std::int64_t batch, std::int64_t frames) const {
    const std::uint64_t limit = effective_size();
    std::vector<std::vector<std::uint32_t>> per_group(groups.size(), std::vector<std::uint32_t>(codes.size()));
    for (std::size_t i = 0; i < codes.size(); ++i) {
        if (codes[i] >= limit)
            throw std::out_of_range("code " + std::to_string(codes[i]) + " out of range for effective size " +
                                    std::to_string(limit));
        auto sub = pq_decompose(codes[i], config.group_sizes);
        for (std::size_t g = 0; g < groups.size(); ++g) per_group[g][i] = sub[g];
    }
    if (groups.size() == 1) return groups[0].lookup(per_group[0], batch, frames);
    ad::NoGradGuard ng;
    std::vector<ad::Var> parts;
    for (std::size_t g = 0; g < groups.size(); ++g) parts.push_back(groups[g].lookup(per_group[g], batch, frames));
    return ad::concat(parts, 1);
}

void Quantizer::init(util::Rng& rng) {
    for (auto& g : groups) g.init(rng);
}

void Quantizer::collect(nn::ParamList& out, const std::string& prefix) const {
    if (groups.size() == 1) {
        groups[0].collect(out, prefix);
        return;
    }
    for (std::size_t g = 0; g < groups.size(); ++g) groups[g].collect(out, prefix + "group" + std::to_string(g) + ".");
}

// ---------------------------------------------------------------------------

std::uint64_t pq_compose(std::span<const std::uint32_t> sub, std::span<const int> sizes) {
    if (sub.size() != sizes.size())
        throw std::invalid_argument("pq_compose: " + std::to_string(sub.size()) + " sub-indices for " +
                                    std::to_string(sizes.size()) + " groups");
    std::uint64_t code = 0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (sub[i] >= static_cast<std::uint32_t>(sizes[i]))
            throw std::out_of_range("pq_compose: sub-index " + std::to_string(sub[i]) + " out of range for group " +
                                    std::to_string(i));
        code = code * static_cast<std::uint64_t>(sizes[i]) + sub[i];
    }
    return code;
}

std::vector<std::uint32_t> pq_decompose(std::uint64_t code, std::span<const int> sizes) {
    std::uint64_t total = 1;
    for (int s : sizes) total *= static_cast<std::uint64_t>(s);
    if (code >= total)
        throw std::out_of_range("pq_decompose: code " + std::to_string(code) + " >= " + std::to_string(total));
    std::vector<std::uint32_t> sub(sizes.size());
    for (std::size_t i = sizes.size(); i-- > 0;) {
        sub[i] = static_cast<std::uint32_t>(code % static_cast<std::uint64_t>(sizes[i]));
        code /= static_cast<std::uint64_t>(sizes[i]);
    }
    return sub;
}

double bitrate(std::uint64_t effective_size, double token_rate) {
    if (effective_size < 2) throw std::invalid_argument("bitrate: effective size must be >= 2");
    if (!(token_rate > 0.0)) throw std::invalid_argument("bitrate: token rate must be positive");
    int bits = 0;
    while (bits < 64 && (std::uint64_t{1} << bits) < effective_size) ++bits;
    return bits * token_rate;
}

}  // namespace dscodec::quant
