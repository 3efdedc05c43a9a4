#include "dscodec/train/trainer.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <fstream>

#include "dscodec/signal/spectral.hpp"

namespace dscodec::train {

namespace {

bool finite(const ad::Var& v) { return std::isfinite(v.item()); }

void write_text(const std::filesystem::path& path, const std::string& text, bool append) {
    std::ofstream f(path, append ? std::ios::app : std::ios::trunc);
    if (!f) throw TrainingError("cannot write " + path.string());
    f << text;
}

}  // namespace

ad::Var mel_loss(const ad::Var& reconstruction, const ad::Var& reference, const std::vector<int>& fft_sizes,
                 int max_bands, int sample_rate) {
    std::vector<ad::Var> terms;
    for (int fft : fft_sizes) {
        signal::SpectrogramConfig sc;
        sc.fft_size = fft;
        sc.window_size = fft;
        sc.hop = fft / 4;
        sc.n_mels = std::min(max_bands, fft / 8);
        sc.fmin = 0.0;
        sc.fmax = sample_rate / 2.0;
        ad::Var ref;
        {
            ad::NoGradGuard ng;
            ref = signal::log_mel(reference, sc, sample_rate);
        }
        terms.push_back(ad::mean_abs_diff(signal::log_mel(reconstruction, sc, sample_rate), ref));
    }
    return ad::scale(ad::sum_all(terms), 1.0 / static_cast<double>(terms.size()));
}

GeneratorLoss generator_loss(const ad::Var& reconstruction, const ad::Var& reference,
                             const quant::QuantizerOutput& quant, const adv::DiscriminatorOutput& real,
                             const adv::DiscriminatorOutput& fake, const TrainConfig& cfg) {
    GeneratorLoss g;
    g.mel = mel_loss(reconstruction, reference, cfg.effective_mel_sizes(), cfg.mel_max_bands, cfg.codec.sample_rate);
    g.adv = adv::generator_adversarial_loss(fake);
    g.fm = adv::feature_matching_loss(real, fake);
    g.vq = quant.vq_loss;
    g.total = ad::sum_all({ad::scale(g.mel, cfg.loss.mel), ad::scale(g.adv, cfg.loss.adv), ad::scale(g.fm, cfg.loss.fm),
                           ad::scale(g.vq, cfg.loss.vq)});
    return g;
}

// ---------------------------------------------------------------------------

Trainer::Trainer(const TrainConfig& cfg, const StagePlan& p, const signal::CropDataset& data, const Checkpoint* init,
                 RunOptions options)
    : config(cfg),
      plan(p),
      model([&] {
          codec::CodecConfig c = init ? init->config : cfg.codec;
          c.transformer = cfg.codec.transformer;
          c.transformer.present = p.has_transformer();
          return c;
      }()),
      discriminators(cfg.discriminators),
      data_(data),
      options_(std::move(options)),
      rng_(util::derive_seed(cfg.seed, "trainer")) {
    config.validate();
    plan.validate();
    if (data.crop_length() % model.config.hop() != 0)
        throw std::invalid_argument("dataset crop length is not a multiple of the codec hop");
    if (plan.needs_checkpoint() && !init)
        throw TrainingError("stage " + to_string(plan.kind) + " requires a stage-1 checkpoint (none supplied)");

    model.init(config.seed);
    if (init) {
        auto carry = [&](InitPolicy pol, const nn::ParamList& ps) {
            if (pol == InitPolicy::CarryOver || pol == InitPolicy::FrozenCarryOver) init->restore(ps);
        };
        carry(plan.encoder, model.encoder_params());
        carry(plan.quantizer, model.quantizer_params());
        carry(plan.transformer, model.transformer_params());
        carry(plan.decoder, model.decoder_params());
        if (plan.discriminators == InitPolicy::CarryOver || plan.discriminators == InitPolicy::FrozenCarryOver)
            init->restore(discriminators.params());
    }
    if (plan.quantizer == InitPolicy::Fresh && config.codebook_init_frames > 0) init_codebook_from_data(rng_);

    const bool second_stage = plan.kind == StageKind::Stage2NonMirror || plan.kind == StageKind::Stage2T;
    if (plan.discriminators == InitPolicy::Fresh)
        discriminators.init(util::derive_seed(config.seed, second_stage ? "disc.stage2" : "disc.stage1"));
    if (second_stage) sample_offset_ = static_cast<std::uint64_t>(config.stage1_steps * config.stage1_batch);

    nn::set_requires_grad(frozen_params(), false);
    gen_opt = AdamW(trainable_generator_params(), config.optim);
    disc_opt = AdamW(discriminators.params(), config.optim);
    frozen_hash_ = hash_params(frozen_params());

    if (!options_.out_dir.empty()) {
        std::filesystem::create_directories(options_.out_dir);
        write_text(options_.out_dir / options_.curve_file, "", false);
    }
}

nn::ParamList Trainer::trainable_generator_params() const {
    nn::ParamList out;
    auto add = [&](InitPolicy pol, const nn::ParamList& ps) {
        if (StagePlan::trainable(pol)) out.insert(out.end(), ps.begin(), ps.end());
    };
    add(plan.encoder, model.encoder_params());
    add(plan.quantizer, model.quantizer_params());
    add(plan.transformer, model.transformer_params());
    add(plan.decoder, model.decoder_params());
    return out;
}

nn::ParamList Trainer::frozen_params() const {
    nn::ParamList out;
    auto add = [&](InitPolicy pol, const nn::ParamList& ps) {
        if (pol == InitPolicy::FrozenCarryOver) out.insert(out.end(), ps.begin(), ps.end());
    };
    add(plan.encoder, model.encoder_params());
    add(plan.quantizer, model.quantizer_params());
    add(plan.transformer, model.transformer_params());
    add(plan.decoder, model.decoder_params());
    return out;
}

ad::Var Trainer::batch_at(std::int64_t step) const {
    const auto b = plan.batch_size, len = data_.crop_length();
    std::vector<double> v;
    v.reserve(static_cast<std::size_t>(b * len));
    for (std::int64_t i = 0; i < b; ++i) {
        const auto w = data_.sample(sample_offset_ + static_cast<std::uint64_t>(step * b + i));
        v.insert(v.end(), w.samples.begin(), w.samples.end());
    }
    return ad::Var::from({b, len}, std::move(v));
}

void Trainer::init_codebook_from_data(util::Rng& rng) {
    const int width = model.quantizer.input_dim / static_cast<int>(model.quantizer.groups.size());
    std::vector<std::vector<double>> rows(model.quantizer.groups.size());
    std::int64_t frames = 0;
    ad::NoGradGuard ng;
    for (std::int64_t s = 0; frames < config.codebook_init_frames; ++s) {
        auto lat = model.encoder.forward(batch_at(s));  // (B, D, T)
        const auto b = lat.dim(0), d = lat.dim(1), t = lat.dim(2);
        const auto& v = lat.values();
        for (std::int64_t bi = 0; bi < b; ++bi)
            for (std::int64_t ti = 0; ti < t; ++ti) {
                for (std::size_t g = 0; g < rows.size(); ++g)
                    for (int c = 0; c < width; ++c)
                        rows[g].push_back(v[static_cast<std::size_t>((bi * d + static_cast<std::int64_t>(g) * width + c) * t + ti)]);
                ++frames;
            }
    }
    for (std::size_t g = 0; g < rows.size(); ++g) model.quantizer.groups[g].init_codebook_from(rows[g], rng);
}

void Trainer::record(const std::string& name, double value) { curves_.push_back({step_, name, value}); }

void Trainer::check_frozen() const {
    if (hash_params(frozen_params()) != frozen_hash_)
        throw TrainingError("frozen parameters changed during stage " + to_string(plan.kind) + " at step " +
                            std::to_string(step_));
}

void Trainer::nan_abort(const std::string& what, const std::vector<std::pair<std::string, double>>& losses) const {
    std::string where = "(no output directory)";
    if (!options_.out_dir.empty()) {
        Json dump = {{"stage", to_string(plan.kind)}, {"step", step_}, {"failed", what}};
        for (const auto& [k, v] : losses) dump["losses"][k] = std::isfinite(v) ? Json(v) : Json(std::to_string(v));
        auto add_stats = [&](const nn::ParamList& ps) {
            for (const auto& p : ps) {
                double mx = 0.0, n2 = 0.0;
                bool ok = true;
                for (double x : p.var.values()) {
                    ok = ok && std::isfinite(x);
                    mx = std::max(mx, std::abs(x));
                    n2 += x * x;
                }
                dump["params"][p.name] = {{"finite", ok}, {"max_abs", ok ? Json(mx) : Json("nan")},
                                          {"norm", ok ? Json(std::sqrt(n2)) : Json("nan")}};
            }
        };
        add_stats(model.params());
        add_stats(discriminators.params());
        const auto path = options_.out_dir / ("nan_dump_step" + std::to_string(step_) + ".json");
        write_text(path, dump.dump(2), false);
        where = path.string();
    }
    throw TrainingError("non-finite " + what + " at step " + std::to_string(step_) + "; diagnostics: " + where);
}

void Trainer::step() {
    const double lr = plan.lr.at(step_);
    const ad::Var batch = batch_at(step_);
    const auto disc_params = discriminators.params();

    // generator update
    nn::set_requires_grad(disc_params, false);
    auto out = model.forward_train(batch);
    adv::DiscriminatorOutput real;
    {
        ad::NoGradGuard ng;
        real = discriminators.forward(batch);
    }
    auto fake = discriminators.forward(out.reconstruction);
    auto g = generator_loss(out.reconstruction, batch, out.quant, real, fake, config);
    const std::vector<std::pair<std::string, double>> comps{{"loss_total", g.total.item()}, {"mel", g.mel.item()},
                                                            {"adv_g", g.adv.item()},       {"fm", g.fm.item()},
                                                            {"vq_loss", g.vq.item()}};
    if (!finite(g.total)) nan_abort("generator loss", comps);
    gen_opt.zero_grad();
    g.total.backward();
    const double g_norm = gen_opt.step(lr);

    // discriminator update on the same batch
    nn::set_requires_grad(disc_params, true);
    const ad::Var fake_wave = out.reconstruction.detach();
    auto d_loss = adv::discriminator_loss(discriminators.forward(batch), discriminators.forward(fake_wave));
    if (!finite(d_loss)) {
        auto all = comps;
        all.emplace_back("d_loss", d_loss.item());
        nan_abort("discriminator loss", all);
    }
    disc_opt.zero_grad();
    d_loss.backward();
    const double d_norm = disc_opt.step(lr);

    record("lr", lr);
    for (const auto& [k, v] : comps) record(k, v);
    record("io_mse", out.quant.io_mse);
    record("utilization", out.quant.utilization);
    record("d_loss", d_loss.item());
    record("grad_norm_g", g_norm);
    record("grad_norm_d", d_norm);

    if (!options_.out_dir.empty()) {
        std::vector<CurveRecord> fresh(curves_.begin() + static_cast<std::ptrdiff_t>(flushed_), curves_.end());
        write_text(options_.out_dir / options_.curve_file, curve_to_ndjson(fresh), true);
        flushed_ = curves_.size();
    }
    if (options_.log_every > 0 && step_ % options_.log_every == 0)
        spdlog::info("[{}] step {} lr {:.3g} mel {:.4f} adv {:.4f} fm {:.4f} vq {:.4f} io_mse {:.4g} d {:.4f} util {:.3f}",
                     to_string(plan.kind), step_, lr, g.mel.item(), g.adv.item(), g.fm.item(), g.vq.item(),
                     out.quant.io_mse, d_loss.item(), out.quant.utilization);
    ++step_;
    if (config.freeze_check_every > 0 && step_ % config.freeze_check_every == 0) check_frozen();
}

Checkpoint Trainer::run() {
    while (step_ < plan.total_steps) step();
    check_frozen();
    return snapshot();
}

Checkpoint Trainer::snapshot() const {
    Checkpoint c;
    c.stage = to_string(plan.kind);
    c.step = step_;
    c.config = model.config;
    c.discriminators = discriminators.config;
    c.rng_state = rng_.state();
    c.generator_steps = gen_opt.steps();
    c.discriminator_steps = disc_opt.steps();
    c.store(model.params());
    c.store(discriminators.params());
    auto moments = [&](const AdamW& opt, const std::string& tag) {
        auto& o = const_cast<AdamW&>(opt);
        for (std::size_t i = 0; i < opt.params().size(); ++i) {
            const auto& p = opt.params()[i];
            nn::ParamList tmp{{"opt." + tag + ".m." + p.name, ad::Var::from(p.var.shape(), o.first_moment(i))},
                              {"opt." + tag + ".v." + p.name, ad::Var::from(p.var.shape(), o.second_moment(i))}};
            c.store(tmp);
        }
    };
    moments(gen_opt, "gen");
    moments(disc_opt, "disc");
    c.curves = curves_;
    return c;
}

// ---------------------------------------------------------------------------

Checkpoint run_stage(const StagePlan& plan, const TrainConfig& cfg, const signal::CropDataset& data,
                     const Checkpoint* init, const RunOptions& options) {
    Trainer t(cfg, plan, data, init, options);
    return t.run();
}

codec::CodecModel model_from_checkpoint(const Checkpoint& ckpt) {
    codec::CodecModel m(ckpt.config);
    ckpt.restore(m.params());
    return m;
}

DualStageResult dual_stage_train(const TrainConfig& cfg, const signal::CropDataset& data, const RunOptions& options) {
    DualStageResult r;
    RunOptions o1 = options, o2 = options;
    o1.curve_file = "stage1_curves.ndjson";
    o2.curve_file = "stage2_curves.ndjson";
    r.stage1 = run_stage(cfg.plan(StageKind::Stage1Mirror), cfg, data, nullptr, o1);
    // Round-trip through the serialized form so in-process and resumed runs match.
    r.stage1 = Checkpoint::deserialize(r.stage1.serialize());
    if (!options.out_dir.empty()) r.stage1.save(options.out_dir / "stage1.ckpt");
    r.stage2 = run_stage(cfg.plan(StageKind::Stage2NonMirror), cfg, data, &r.stage1, o2);
    if (!options.out_dir.empty()) r.stage2.save(options.out_dir / "stage2.ckpt");

    r.merged_curves = r.stage1.curves;
    for (auto rec : r.stage2.curves) {
        rec.step += r.stage1.step;
        r.merged_curves.push_back(std::move(rec));
    }
    if (!options.out_dir.empty()) write_text(options.out_dir / "curves.ndjson", curve_to_ndjson(r.merged_curves), false);
    return r;
}

}  // namespace dscodec::train
