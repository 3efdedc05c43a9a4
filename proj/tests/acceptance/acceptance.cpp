// Acceptance checks: one [PASS]/[FAIL] line per criterion.
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <set>

#include "CLI11.hpp"
#include "dscodec/cli/run_config.hpp"
#include "dscodec/codec/model.hpp"
#include "dscodec/codec/tokens.hpp"
#include "dscodec/eval/corpus.hpp"
#include "dscodec/nn/blocks.hpp"
#include "dscodec/nn/transformer.hpp"
#include "dscodec/quant/quantizer.hpp"
#include "dscodec/signal/synthetic.hpp"
#include "dscodec/train/experiment.hpp"
#include "dscodec/train/trainer.hpp"
#include "gradcheck.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace dscodec;
using ad::Var;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Context {
    fs::path out_dir;
    fs::path configs;
    bool fast = false;

    std::optional<cli::RunConfig> toy_config;
    std::optional<train::Checkpoint> toy_stage1;
    std::vector<signal::Waveform> toy_corpus;
    double stage1_seconds = 0.0;

    cli::RunConfig& toy() {
        if (!toy_config) {
            toy_config = cli::RunConfig::load(configs / "toy.json");
            if (fast) {
                toy_config->train.stage1_steps = 200;
                toy_config->train.stage2_steps = 10;
            }
        }
        return *toy_config;
    }

    // 5-minute synthetic corpus at the toy preset, trained once and shared.
    const train::Checkpoint& stage1() {
        if (!toy_stage1) {
            auto& rc = toy();
            const auto data = rc.dataset();
            toy_corpus.clear();
            for (std::size_t i = 0; i < data.num_utterances(); ++i) toy_corpus.push_back(data.utterance(i));
            const auto t0 = Clock::now();
            train::RunOptions ro;
            ro.out_dir = out_dir / "toy";
            ro.curve_file = "stage1_curves.ndjson";
            ro.log_every = 250;
            auto ck = train::run_stage(rc.train.plan(train::StageKind::Stage1Mirror), rc.train, data, nullptr, ro);
            stage1_seconds = seconds_since(t0);
            ck = train::Checkpoint::deserialize(ck.serialize());
            ck.save(out_dir / "toy" / "stage1.ckpt");
            toy_stage1 = std::move(ck);
        }
        return *toy_stage1;
    }
};

// ---------------------------------------------------------------------------

Outcome token_rate(Context&) {
    codec::CodecModel model(codec::CodecConfig{});
    model.init(1);
    std::vector<signal::Waveform> inputs;
    inputs.push_back(signal::synth_speech_like(1.0, 5));
    signal::Waveform silence;
    silence.samples.assign(16000, 0.0);
    inputs.push_back(silence);
    util::Rng rng(6);
    signal::Waveform noise;
    for (int i = 0; i < 16000; ++i) noise.samples.push_back(rng.uniform(-1.0, 1.0));
    inputs.push_back(noise);
    double worst = 0.0;
    for (const auto& w : inputs) {
        const auto t0 = Clock::now();
        const auto tokens = model.encode(w);
        worst = std::max(worst, seconds_since(t0));
        if (tokens.codes.size() != 80)
            return {false, fmt::format("1 s input gave {} tokens", tokens.codes.size())};
    }
    return {worst < 1.0, fmt::format("80 tokens for each of 3 one-second inputs (desk codec); slowest encode {:.3f} s", worst)};
}

Outcome bitrate_facts(Context&) {
    const double a = quant::bitrate(8192, 80), b = quant::bitrate(65536, 80);
    return {a == 1040.0 && b == 1280.0, fmt::format("bitrate(8192, 80) = {}, bitrate(65536, 80) = {}", a, b)};
}

Outcome pq_bijection(Context&) {
    const auto t0 = Clock::now();
    const std::vector<int> s{16, 16, 16, 16};
    for (std::uint64_t c = 0; c < 65536; ++c) {
        const auto parts = quant::pq_decompose(c, s);
        // positional oracle: digits in base 16, most significant first
        for (int g = 0; g < 4; ++g)
            if (parts[static_cast<std::size_t>(g)] != ((c >> (4 * (3 - g))) & 15u))
                return {false, fmt::format("decompose({}) disagrees with base-16 digits", c)};
        if (quant::pq_compose(parts, s) != c) return {false, fmt::format("compose(decompose({})) != {}", c, c)};
    }
    util::Rng rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<int> sizes;
        std::uint64_t total = 1;
        const int groups = 1 + static_cast<int>(rng.below(4));
        for (int g = 0; g < groups; ++g) {
            sizes.push_back(2 + static_cast<int>(rng.below(999)));
            total *= static_cast<std::uint64_t>(sizes.back());
        }
        for (int k = 0; k < 200; ++k) {
            std::vector<std::uint32_t> digits;
            for (int sz : sizes) digits.push_back(static_cast<std::uint32_t>(rng.below(static_cast<std::uint64_t>(sz))));
            // value = sum_i d_i * prod_{j > i} S_j
            std::uint64_t expect = 0;
            for (std::size_t i = 0; i < digits.size(); ++i) {
                std::uint64_t place = 1;
                for (std::size_t j = i + 1; j < sizes.size(); ++j) place *= static_cast<std::uint64_t>(sizes[j]);
                expect += digits[i] * place;
            }
            const auto code = quant::pq_compose(digits, sizes);
            if (code != expect || code >= total || quant::pq_decompose(code, sizes) != digits)
                return {false, fmt::format("positional oracle mismatch for size list #{}", trial)};
        }
    }
    const double t = seconds_since(t0);
    return {t < 10.0, fmt::format("65,536 codes exhaustive + 50 random size lists x 200 digits; {:.2f} s", t)};
}

Outcome vq_oracle(Context&) {
    const auto t0 = Clock::now();
    util::Rng rng(91);
    std::int64_t ties = 0;
    for (int inst = 0; inst < 10000; ++inst) {
        const int s = 1 + static_cast<int>(rng.below(64)), d = 1 + static_cast<int>(rng.below(8));
        const int n = 1 + static_cast<int>(rng.below(16));
        std::vector<double> cb(static_cast<std::size_t>(s * d)), q(static_cast<std::size_t>(n * d));
        // coarse grid values make exact ties common
        const bool grid = inst % 2 == 0;
        for (auto& v : cb) v = grid ? static_cast<double>(rng.below(3)) - 1.0 : rng.normal();
        for (auto& v : q) v = grid ? static_cast<double>(rng.below(3)) - 1.0 : rng.normal();
        const auto got = quant::nearest_codes(cb, s, d, q);
        for (int i = 0; i < n; ++i) {
            std::vector<double> dist(static_cast<std::size_t>(s));
            for (int j = 0; j < s; ++j) {
                double acc = 0;
                for (int k = 0; k < d; ++k) {
                    const double diff = q[static_cast<std::size_t>(i * d + k)] - cb[static_cast<std::size_t>(j * d + k)];
                    acc += diff * diff;
                }
                dist[static_cast<std::size_t>(j)] = acc;
            }
            const double best = *std::min_element(dist.begin(), dist.end());
            const auto expect = static_cast<std::uint32_t>(std::find(dist.begin(), dist.end(), best) - dist.begin());
            ties += std::count(dist.begin(), dist.end(), best) > 1;
            if (got[static_cast<std::size_t>(i)] != expect)
                return {false, fmt::format("instance {}: got {}, exhaustive search {}", inst, got[static_cast<std::size_t>(i)], expect)};
        }
    }
    const double t = seconds_since(t0);
    return {t < 30.0, fmt::format("10,000 instances (S <= 64, dim <= 8), 100% agreement, {} tied queries; {:.2f} s", ties, t)};
}

Outcome straight_through(Context&) {
    util::Rng rng(31);
    double worst = 0.0;
    for (int inst = 0; inst < 100; ++inst) {
        const int s = 2 + static_cast<int>(rng.below(30)), cd = 1 + static_cast<int>(rng.below(6));
        const int in = cd + static_cast<int>(rng.below(6));
        const int b = 1 + static_cast<int>(rng.below(3)), t = 1 + static_cast<int>(rng.below(6));
        quant::VectorQuantizer vq(quant::VQConfig{s, cd, in, 0.25, false});
        vq.init(rng);
        auto x = testutil::random_var({b, in, t}, rng);
        auto out = vq.quantize(x);
        auto w = testutil::random_var(out.quantized.shape(), rng, 1.0, false);
        ad::sum(ad::mul(out.quantized, w)).backward();

        // copy-through reference: differentiate the same downstream function at the selected codes
        auto c = Var::from(out.projected.shape(),
                           ad::gather_rows(Var::from({s, cd}, vq.normalized_codebook()), out.indices).values(), true);
        auto q = ad::permute(ad::reshape(ad::linear(c, vq.up_proj.detach()), {b, t, in}), {0, 2, 1});
        ad::sum(ad::mul(q, w)).backward();
        for (std::size_t i = 0; i < c.grad().size(); ++i) {
            const double a = out.projected.grad()[i], r = c.grad()[i];
            worst = std::max(worst, std::abs(a - r) / std::max(std::abs(r), 1e-12));
        }
    }
    return {worst <= 1e-5, fmt::format("100 instances, max relative error {:.3g}", worst)};
}

Outcome pq_additivity(Context&) {
    util::Rng rng(41);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        quant::QuantizerConfig cfg;
        cfg.product = true;
        const int groups = 2 + static_cast<int>(rng.below(3));
        cfg.group_sizes.assign(static_cast<std::size_t>(groups), 8 + static_cast<int>(rng.below(57)));
        cfg.code_dim = 2;
        const int width = 2 + static_cast<int>(rng.below(3));
        quant::Quantizer q(cfg, groups * width);
        q.init(rng);
        auto x = testutil::random_var({1 + static_cast<std::int64_t>(rng.below(4)), groups * width,
                                       1 + static_cast<std::int64_t>(rng.below(20))}, rng, 1.0, false);
        auto out = q.forward(x);
        double sum = 0.0;
        for (const auto& g : out.groups) sum += g.vq_loss.item();
        worst = std::max(worst, std::abs(out.vq_loss.item() - sum));
    }
    return {worst <= 1e-6, fmt::format("20 random PQ batches, max |vq_loss - sum of groups| = {:.3g}", worst)};
}

bool blobs_equal(const train::TensorBlob& a, const train::TensorBlob& b) {
    return a.shape == b.shape && a.data.size() == b.data.size() &&
           std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) == 0;
}

Outcome dual_stage(Context& ctx) {
    const auto& s1 = ctx.stage1();
    auto& rc = ctx.toy();
    const auto data = rc.dataset();
    const auto t0 = Clock::now();
    auto plan = rc.train.plan(train::StageKind::Stage2NonMirror);
    plan.total_steps = 50;
    train::RunOptions ro;
    ro.out_dir = ctx.out_dir / "toy";
    ro.curve_file = "stage2_curves.ndjson";
    train::Trainer t(rc.train, plan, data, &s1, ro);

    // step 0
    const bool decoder_kept = train::hash_params(t.model.decoder_params()) == s1.hash("decoder.");
    const auto snap0 = t.snapshot();
    int disc_total = 0, disc_changed = 0;
    for (const auto& p : t.discriminators.params()) {
        ++disc_total;
        const auto* before = s1.find(p.name);
        if (before && !blobs_equal(*before, *snap0.find(p.name))) ++disc_changed;
    }
    const auto s2 = t.run();
    s2.save(ctx.out_dir / "toy" / "stage2.ckpt");
    const double secs = seconds_since(t0);
    const bool enc = s2.hash("encoder.") == s1.hash("encoder.");
    const bool cb = s2.hash("quantizer.") == s1.hash("quantizer.");
    const bool pass = enc && cb && decoder_kept && disc_total > 0 && disc_changed == disc_total && secs < 300.0;
    return {pass, fmt::format("after 50 stage-2 steps: encoder hash {}, quantizer hash {}; step-0 decoder {}; "
                              "{}/{} discriminator tensors differ; {:.0f} s",
                              enc ? "equal" : "CHANGED", cb ? "equal" : "CHANGED",
                              decoder_kept ? "bit-equal" : "DIFFERENT", disc_changed, disc_total, secs)};
}

Outcome schedule_facts(Context&) {
    train::TrainConfig cfg;
    const auto s1 = cfg.plan(train::StageKind::Stage1Mirror), s2 = cfg.plan(train::StageKind::Stage2NonMirror);
    const bool ok = s1.lr.at(0) == 1e-4 && s1.lr.at(1000) == 1e-5 && s1.lr.at(5000) == 1e-5 && s2.lr.at(0) == 2e-5 &&
                    s2.lr.at(s2.total_steps) == 1e-5;
    return {ok, fmt::format("stage1: {} @0, {} @1000; stage2: {} -> {} over {} steps", s1.lr.at(0), s1.lr.at(1000),
                            s2.lr.at(0), s2.lr.at(s2.total_steps), s2.total_steps)};
}

std::vector<Var> vars_of(const nn::ParamList& ps) {
    std::vector<Var> v;
    for (const auto& p : ps) v.push_back(p.var);
    return v;
}

Outcome gradient_checks(Context&) {
    const auto t0 = Clock::now();
    util::Rng rng(51);
    using testutil::max_grad_error;
    using testutil::project;
    std::vector<std::pair<std::string, double>> errs;

    auto x = testutil::random_var({2, 3, 7}, rng, 2.0);
    auto la = testutil::random_var({3}, rng, 0.5);
    errs.emplace_back("snake", max_grad_error([&] { return project(ad::snake(x, la)); }, {x, la}));

    nn::ResidualUnit unit(3, 3, 2);
    unit.init(rng);
    nn::ParamList up;
    unit.collect(up, "");
    for (auto& p : up)
        if (p.name.find("log_alpha") != std::string::npos)
            for (auto& v : p.var.values()) v = rng.uniform(-0.5, 0.5);
    auto xr = testutil::random_var({2, 3, 9}, rng);
    auto ri = vars_of(up);
    ri.push_back(xr);
    errs.emplace_back("residual_unit", max_grad_error([&] { return project(unit.forward(xr)); }, ri));

    nn::TransformerLayer layer(nn::TransformerLayerSpec{4, 2, 2, 6, 100.0, false});
    layer.init(rng, false);
    nn::ParamList lp;
    layer.collect(lp, "");
    for (auto& p : lp)
        if (p.name.find("gain") != std::string::npos)
            for (auto& v : p.var.values()) v = rng.uniform(0.5, 1.5);
    auto xt = testutil::random_var({2, 3, 4}, rng);
    auto ti = vars_of(lp);
    ti.push_back(xt);
    errs.emplace_back("transformer_layer", max_grad_error([&] { return project(layer.forward(xt)); }, ti));

    quant::VectorQuantizer vq(quant::VQConfig{6, 3, 4, 0.25, false});
    vq.init(rng);
    auto xq = testutil::random_var({1, 4, 5}, rng);
    const double e1 = max_grad_error([&] { return vq.quantize(xq).commitment_loss; }, {xq, vq.down_proj});
    const double e2 = max_grad_error([&] { return vq.quantize(xq).codebook_loss; }, {vq.codebook});
    const double e3 = max_grad_error([&] { return project(vq.quantize(xq).quantized); }, {vq.up_proj});
    errs.emplace_back("vq_projection", std::max({e1, e2, e3}));

    bool pass = true;
    std::string detail;
    for (const auto& [name, e] : errs) {
        pass = pass && e <= 1e-3;
        detail += fmt::format("{} {:.2g}, ", name, e);
    }
    const double t = seconds_since(t0);
    return {pass && t < 120.0, detail + fmt::format("max relative error; {:.2f} s", t)};
}

Outcome toy_training(Context& ctx) {
    const auto& ck = ctx.stage1();
    const double secs = ctx.stage1_seconds;
    const auto mel = train::curve_series(ck.curves, "mel");
    const std::size_t n = mel.size();
    if (n < 200) return {false, fmt::format("only {} steps recorded", n)};
    auto window_mean = [&](std::size_t lo, std::size_t hi) {
        double s = 0;
        for (std::size_t i = lo; i < hi; ++i) s += mel[i];
        return s / static_cast<double>(hi - lo);
    };
    const double base = window_mean(50, 150);  // 100-step window centred on step 100
    const double last = window_mean(n - 100, n);
    const double drop = 1.0 - last / base;

    auto model = train::model_from_checkpoint(ck);
    std::set<std::uint64_t> used;
    std::size_t frames = 0;
    for (const auto& w : ctx.toy_corpus) {
        const auto t = model.encode(w);
        used.insert(t.codes.begin(), t.codes.end());
        frames += t.codes.size();
    }
    const double util = static_cast<double>(used.size()) / static_cast<double>(ck.config.quantizer.effective_size());
    double corpus_s = 0;
    for (const auto& w : ctx.toy_corpus) corpus_s += w.seconds();
    const bool pass = drop >= 0.20 && util > 0.05 && secs <= 3600.0 && n == 2000;
    return {pass, fmt::format("{} steps on {:.0f} s corpus: smoothed L_mel {:.4f} (step 100) -> {:.4f} (last 100), "
                              "drop {:.1f}%; utilization {} / {} codes = {:.1f}% over {} frames; {:.0f} s",
                              n, corpus_s, base, last, 100 * drop, used.size(), ck.config.quantizer.effective_size(),
                              100 * util, frames, secs)};
}

Outcome io_mse_trend(Context& ctx) {
    auto rc = cli::RunConfig::load(ctx.configs / "compare.json");
    if (ctx.fast) rc.train.stage1_steps = 20;
    train::ComparisonOptions opt;
    opt.out_dir = ctx.out_dir / "compare";
    opt.log_every = 0;
    const auto t0 = Clock::now();
    const auto report = train::mirror_vs_nonmirror(rc.train, rc.dataset(), rc.compare_seeds, opt);
    const double secs = seconds_since(t0);

    // The artifact itself is the hard requirement.
    std::string problem;
    try {
        auto j = nlohmann::json::parse(std::ifstream(opt.out_dir / "report.json"));
        if (j["seeds"].size() != rc.compare_seeds.size()) problem = "seed count";
        for (const auto& s : j["seeds"]) {
            for (const char* mode : {"stage1", "joint"}) {
                const auto f = opt.out_dir / s[mode]["curve_file"].get<std::string>();
                if (!fs::exists(f) || fs::file_size(f) == 0) problem = "missing curve file " + f.string();
                if (!s[mode]["final_io_mse"].is_number() || !s[mode]["final_vq_loss"].is_number()) problem = "final values";
            }
            const auto lower = s["lower_io_mse"].get<std::string>();
            if (lower != "stage1" && lower != "joint") problem = "lower_io_mse";
        }
        if (fs::file_size(opt.out_dir / "io_vq_curves.svg") == 0) problem = "empty plot";
    } catch (const std::exception& e) {
        problem = e.what();
    }
    std::string per_seed;
    for (const auto& s : report.seeds)
        per_seed += fmt::format(" seed {}: io_mse {:.4g} vs {:.4g};", s.seed, s.mirror.final_io_mse, s.joint.final_io_mse);
    const auto detail = fmt::format(
        "report well-formed{}; {} steps per run; mirror lower io_mse in {}/{} seeds ({}, soft);{} {:.0f} s",
        problem.empty() ? "" : " NO (" + problem + ")", report.steps, report.mirror_lower_io_mse_count(),
        report.seeds.size(), report.trend_holds() ? "trend reproduced" : "trend not reproduced", per_seed, secs);
    return {problem.empty(), detail};
}

Outcome metric_harness(Context& ctx) {
    const auto t0 = Clock::now();
    const auto dir = ctx.out_dir / "metrics";
    fs::create_directories(dir);
    std::vector<fs::path> files;
    double worst_stoi = 0.0;
    bool f1_ok = true;
    for (int i = 0; i < 5; ++i) {
        const auto w = signal::synth_speech_like(2.0, 300 + static_cast<std::uint64_t>(i));
        worst_stoi = std::max(worst_stoi, std::abs(eval::stoi(w, w) - 1.0));
        f1_ok = f1_ok && eval::f1_vuv(w, w) == 1.0;
        files.push_back(dir / fmt::format("utt{}.wav", i));
        signal::save_wav(files.back(), w);
    }
    eval::CorpusOptions opt;
    opt.out_dir = dir;
    const auto r = eval::evaluate_corpus(files, eval::identity_pipeline, opt);
    const double mean = r.mean("stoi").value_or(0.0);
    const double t = seconds_since(t0);
    const bool pass = worst_stoi <= 1e-6 && f1_ok && std::abs(mean - 1.0) <= 1e-6 && r.excluded.empty() && t < 60.0;
    return {pass, fmt::format("max |stoi(x,x) - 1| = {:.2g}; f1_vuv(x,x) {}; bypass corpus STOI mean {:.9f} over {} "
                              "files; {:.2f} s",
                              worst_stoi, f1_ok ? "= 1" : "!= 1", mean, r.rows.size(), t)};
}

Outcome serialization(Context& ctx) {
    const auto t0 = Clock::now();
    util::Rng rng(61);
    for (int inst = 0; inst < 100; ++inst) {
        codec::TokenSequence t;
        t.product = inst % 2 == 1;
        const int groups = t.product ? 2 + static_cast<int>(rng.below(2)) : 1;
        for (int g = 0; g < groups; ++g) t.group_sizes.push_back(2 + static_cast<int>(rng.below(t.product ? 300 : 65534)));
        t.codec_id = rng.next();
        t.token_rate = 80;
        const auto n = rng.below(400);
        t.original_length = n * 200 - (n ? rng.below(200) : 0);
        for (std::uint64_t i = 0; i < n; ++i) t.codes.push_back(rng.below(t.effective_size()));
        const auto bytes = codec::serialize_tokens(t);
        const auto back = codec::deserialize_tokens(bytes);
        if (!(back == t) || codec::serialize_tokens(back) != bytes)
            return {false, fmt::format("token instance {} did not round-trip", inst)};
    }
    for (int inst = 0; inst < 100; ++inst) {
        train::Checkpoint c;
        c.stage = inst % 2 ? "stage1" : "stage2";
        c.step = static_cast<std::int64_t>(rng.below(1000000));
        c.rng_state = std::to_string(rng.next());
        c.generator_steps = c.step;
        c.discriminator_steps = c.step;
        const auto n = 1 + rng.below(6);
        for (std::uint64_t k = 0; k < n; ++k) {
            train::TensorBlob b;
            b.name = fmt::format("module{}.weight", k);
            b.shape = {static_cast<std::int64_t>(1 + rng.below(8)), static_cast<std::int64_t>(1 + rng.below(8))};
            for (std::int64_t i = 0; i < b.shape[0] * b.shape[1]; ++i) {
                float v = static_cast<float>(rng.normal() * std::pow(10.0, static_cast<double>(rng.below(20)) - 10.0));
                b.data.push_back(v);
            }
            c.tensors.push_back(std::move(b));
        }
        for (int s = 0; s < 3; ++s) c.curves.push_back({s, "mel", rng.normal()});
        const auto bytes = c.serialize();
        const auto back = train::Checkpoint::deserialize(bytes);
        if (back.serialize() != bytes || back.tensors.size() != c.tensors.size())
            return {false, fmt::format("checkpoint instance {} did not round-trip", inst)};
        for (std::size_t k = 0; k < c.tensors.size(); ++k)
            if (!blobs_equal(back.tensors[k], c.tensors[k])) return {false, "tensor bits changed"};
        if (inst < 5) {
            const auto path = ctx.out_dir / "serial.ckpt";
            c.save(path);
            if (train::Checkpoint::load(path).serialize() != bytes) return {false, "file round trip changed bytes"};
            fs::remove(path);
        }
    }
    const double t = seconds_since(t0);
    return {t < 10.0, fmt::format("100 token sequences and 100 checkpoints byte-identical after round trip; {:.2f} s", t)};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance checks"};
    Context ctx;
    std::string out = "acceptance_artifacts", configs = DSCODEC_CONFIGS, only;
    app.add_option("--out", out, "Artifact directory");
    app.add_option("--configs", configs, "Directory with toy.json and compare.json");
    app.add_option("--only", only, "Run only criteria whose name contains this text");
    app.add_flag("--fast", ctx.fast, "Shortened training runs (training criteria will not meet their budgets)");
    CLI11_PARSE(app, argc, argv);
    ctx.out_dir = out;
    ctx.configs = configs;
    fs::create_directories(ctx.out_dir);
    spdlog::set_level(spdlog::level::warn);
    if (!ctx.fast) spdlog::set_level(spdlog::level::info);

    const std::vector<std::pair<std::string, std::function<Outcome(Context&)>>> criteria{
        {"token rate: 1 s at 16 kHz -> 80 tokens", token_rate},
        {"bitrate facts", bitrate_facts},
        {"product-quantizer index bijection", pq_bijection},
        {"VQ nearest-neighbour oracle", vq_oracle},
        {"straight-through gradient contract", straight_through},
        {"PQ loss additivity", pq_additivity},
        {"dual-stage invariants", dual_stage},
        {"schedule facts", schedule_facts},
        {"gradient checks", gradient_checks},
        {"toy-training sanity", toy_training},
        {"mirror vs non-mirror trend report", io_mse_trend},
        {"metric harness", metric_harness},
        {"serialization round trips", serialization},
    };
    int failed = 0;
    nlohmann::ordered_json summary = nlohmann::ordered_json::array();
    for (const auto& [name, fn] : criteria) {
        if (!only.empty() && name.find(only) == std::string::npos) continue;
        Outcome o;
        try {
            o = fn(ctx);
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << name << ": " << o.detail << std::endl;
        summary.push_back({{"criterion", name}, {"pass", o.pass}, {"detail", o.detail}});
    }
    std::ofstream(ctx.out_dir / "acceptance.json") << summary.dump(2) << "\n";
    return failed == 0 ? 0 : 1;
}
