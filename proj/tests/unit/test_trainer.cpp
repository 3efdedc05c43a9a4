#include "doctest.h"

#include <cmath>
#include <cstring>
#include <limits>
#include <filesystem>
#include <fstream>

#include "dscodec/train/experiment.hpp"
#include "dscodec/train/trainer.hpp"
#include "json.hpp"
#include "fixtures.hpp"

using namespace dscodec;
using train::StageKind;

namespace {

std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("dscodec_test_" + name);
    std::filesystem::remove_all(p);
    return p;
}

bool blob_equal(const train::TensorBlob& a, const train::TensorBlob& b) {
    return a.shape == b.shape && std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) == 0;
}

}  // namespace

TEST_CASE("stage-1 schedule matches the closed form at every step") {
    train::TrainConfig cfg;
    cfg.seed = 1;
    auto p1 = cfg.plan(StageKind::Stage1Mirror);
    CHECK(p1.lr.at(0) == 1e-4);
    CHECK(p1.lr.at(1000) == 1e-5);
    CHECK(p1.lr.at(500) == doctest::Approx(5.5e-5).epsilon(1e-12));
    for (std::int64_t s = 0; s < cfg.stage1_steps; ++s) {
        const double expect = s >= 1000 ? 1e-5 : 1e-4 + (1e-5 - 1e-4) * static_cast<double>(s) / 1000.0;
        REQUIRE(p1.lr.at(s) == doctest::Approx(expect).epsilon(1e-14));
    }
    auto p2 = cfg.plan(StageKind::Stage2NonMirror);
    CHECK(p2.lr.at(0) == 2e-5);
    CHECK(p2.lr.at(cfg.stage2_steps) == 1e-5);
    for (std::int64_t s = 0; s <= cfg.stage2_steps; ++s)
        REQUIRE(p2.lr.at(s) ==
                doctest::Approx(2e-5 - 1e-5 * static_cast<double>(s) / static_cast<double>(cfg.stage2_steps))
                    .epsilon(1e-14));
    CHECK_THROWS_AS(p1.lr.at(-1), std::invalid_argument);
}

TEST_CASE("stage plans follow the two-stage recipe") {
    train::TrainConfig cfg;
    cfg.seed = 1;
    auto s1 = cfg.plan(StageKind::Stage1Mirror);
    CHECK(s1.batch_size == 10);
    CHECK_FALSE(s1.has_transformer());
    CHECK_FALSE(s1.needs_checkpoint());
    auto s2 = cfg.plan(StageKind::Stage2NonMirror);
    CHECK(s2.batch_size == 24);
    CHECK(s2.encoder == train::InitPolicy::FrozenCarryOver);
    CHECK(s2.quantizer == train::InitPolicy::FrozenCarryOver);
    CHECK(s2.decoder == train::InitPolicy::CarryOver);
    CHECK(s2.transformer == train::InitPolicy::Fresh);
    CHECK(s2.discriminators == train::InitPolicy::Fresh);
    auto s2t = cfg.plan(StageKind::Stage2T);
    CHECK_FALSE(s2t.has_transformer());
    CHECK(s2t.needs_checkpoint());
    auto j = cfg.plan(StageKind::JointNonMirror);
    CHECK(j.has_transformer());
    CHECK_FALSE(j.needs_checkpoint());
    CHECK(j.total_steps == s1.total_steps);
    CHECK(train::stage_kind_from_string("stage2t") == StageKind::Stage2T);
    CHECK_THROWS(train::stage_kind_from_string("stage3"));

    auto bad = s1;
    bad.transformer = train::InitPolicy::Fresh;
    CHECK_THROWS(bad.validate());
}

TEST_CASE("train config JSON is strict and round-trips") {
    auto cfg = testutil::tiny_train_config();
    auto j = cfg.to_json();
    auto back = train::TrainConfig::from_json(j);
    CHECK(back.to_json() == j);
    auto extra = j;
    extra["learning_rate"] = 1.0;
    CHECK_THROWS_AS(train::TrainConfig::from_json(extra), std::invalid_argument);
    auto noseed = j;
    noseed.erase("seed");
    CHECK_THROWS_AS(train::TrainConfig::from_json(noseed), std::invalid_argument);
}

TEST_CASE("checkpoint save/load/save is byte stable") {
    util::Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        train::Checkpoint c;
        c.stage = trial % 2 ? "stage1" : "stage2";
        c.step = static_cast<std::int64_t>(rng.below(100001));
        c.config = testutil::tiny_train_config().codec;
        c.rng_state = std::to_string(rng.next());
        const int n = 1 + static_cast<int>(rng.below(6));
        for (int t = 0; t < n; ++t) {
            train::TensorBlob b;
            b.name = "p" + std::to_string(t);
            b.shape = {1 + static_cast<std::int64_t>(rng.below(5)), 1 + static_cast<std::int64_t>(rng.below(7))};
            for (std::int64_t i = 0; i < b.shape[0] * b.shape[1]; ++i) b.data.push_back(static_cast<float>(rng.normal()));
            c.tensors.push_back(b);
        }
        c.curves.push_back({3, "mel", rng.normal()});
        const auto bytes = c.serialize();
        const auto back = train::Checkpoint::deserialize(bytes);
        REQUIRE(back.serialize() == bytes);
        REQUIRE(back.tensors == c.tensors);
        REQUIRE(back.curves == c.curves);
    }
    auto dir = scratch("ckpt");
    std::filesystem::create_directories(dir);
    train::Checkpoint c;
    c.config = testutil::tiny_train_config().codec;
    c.save(dir / "a.ckpt");
    CHECK(train::Checkpoint::load(dir / "a.ckpt").serialize() == c.serialize());
    auto bytes = c.serialize();
    bytes.pop_back();
    CHECK_THROWS_AS(train::Checkpoint::deserialize(bytes), train::CheckpointError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("generator loss components match recomputation") {
    auto cfg = testutil::tiny_train_config();
    auto data = testutil::tiny_dataset();
    codec::CodecModel model(cfg.codec);
    model.init(1);
    adv::Discriminators d(cfg.discriminators);
    d.init(2);
    auto batch = data.batch(0, 2);
    auto out = model.forward_train(batch);
    auto real = d.forward(batch), fake = d.forward(out.reconstruction);
    auto g = train::generator_loss(out.reconstruction, batch, out.quant, real, fake, cfg);
    const double mel = train::mel_loss(out.reconstruction, batch, {128, 64}, 80, 16000).item();
    CHECK(g.mel.item() == doctest::Approx(mel).epsilon(1e-9));
    CHECK(g.adv.item() == doctest::Approx(adv::generator_adversarial_loss(fake).item()).epsilon(1e-9));
    CHECK(g.fm.item() == doctest::Approx(adv::feature_matching_loss(real, fake).item()).epsilon(1e-9));
    CHECK(g.vq.item() == doctest::Approx(out.quant.vq_loss.item()).epsilon(1e-9));
    const double expect = 15 * g.mel.item() + g.adv.item() + 2 * g.fm.item() + g.vq.item();
    CHECK(g.total.item() == doctest::Approx(expect).epsilon(1e-9));

    cfg.loss = {0, 0, 0, 0};
    CHECK(train::generator_loss(out.reconstruction, batch, out.quant, real, fake, cfg).total.item() == 0.0);

    // identical signals: no spectral or feature distance
    auto real2 = d.forward(batch);
    CHECK(train::mel_loss(batch, batch, {128, 64}, 80, 16000).item() == 0.0);
    CHECK(adv::feature_matching_loss(real, real2).item() == 0.0);
}

TEST_CASE("mel loss is an L1 log-mel distance over scales") {
    util::Rng rng(9);
    std::vector<double> a(800), b(800);
    for (auto& x : a) x = 0.3 * rng.normal();
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = 0.5 * a[i];
    auto va = ad::Var::from({1, 800}, a), vb = ad::Var::from({1, 800}, b);
    // Halving the amplitude shifts every log-mel bin above the floor by log 2.
    CHECK(train::mel_loss(vb, va, {256}, 80, 16000).item() == doctest::Approx(std::log(2.0)).epsilon(0.05));
}

TEST_CASE("stage 2 refuses to start without a stage-1 checkpoint") {
    auto cfg = testutil::tiny_train_config();
    auto data = testutil::tiny_dataset();
    CHECK_THROWS_AS(train::Trainer(cfg, cfg.plan(StageKind::Stage2NonMirror), data), train::TrainingError);
    CHECK_THROWS_AS(train::Trainer(cfg, cfg.plan(StageKind::Stage2T), data), train::TrainingError);
}

TEST_CASE("dual-stage carry-over, freeze and reinit invariants") {
    auto cfg = testutil::tiny_train_config();
    auto data = testutil::tiny_dataset();
    auto dir = scratch("dual");
    train::RunOptions opt;
    opt.out_dir = dir;
    auto r = train::dual_stage_train(cfg, data, opt);
    CHECK(std::filesystem::exists(dir / "stage1.ckpt"));
    CHECK(std::filesystem::exists(dir / "stage2.ckpt"));
    CHECK(std::filesystem::exists(dir / "curves.ndjson"));
    CHECK(r.stage1.step == cfg.stage1_steps);
    CHECK(r.stage2.step == cfg.stage2_steps);
    CHECK(r.stage1.config.transformer.present == false);
    CHECK(r.stage2.config.transformer.present == true);
    CHECK(r.stage1.find("transformer.layer0.attn.wq") == nullptr);
    CHECK(r.stage2.find("transformer.layer0.attn.wq") != nullptr);

    // frozen parts survive the whole stage
    CHECK(r.stage2.hash("encoder.") == r.stage1.hash("encoder."));
    CHECK(r.stage2.hash("quantizer.") == r.stage1.hash("quantizer."));
    CHECK(r.stage2.hash("decoder.") != r.stage1.hash("decoder."));

    // step-0 state of a fresh stage-2 trainer
    train::Trainer t2(cfg, cfg.plan(StageKind::Stage2NonMirror), data, &r.stage1);
    CHECK(train::hash_params(t2.model.decoder_params()) == r.stage1.hash("decoder."));
    CHECK(train::hash_params(t2.model.encoder_params()) == r.stage1.hash("encoder."));
    auto snap = t2.snapshot();
    int disc_tensors = 0;
    for (const auto& p : t2.discriminators.params()) {
        const auto* before = r.stage1.find(p.name);
        REQUIRE(before != nullptr);
        CHECK_FALSE(blob_equal(*before, *snap.find(p.name)));
        ++disc_tensors;
    }
    CHECK(disc_tensors > 0);
    // frozen parameters get no optimizer slots
    for (const auto& p : t2.gen_opt.params()) {
        CHECK(p.name.rfind("encoder.", 0) != 0);
        CHECK(p.name.rfind("quantizer.", 0) != 0);
    }

    // merged curve log: stage-2 steps continue after stage 1
    const auto merged = train::curve_series(r.merged_curves, "lr");
    CHECK(merged.size() == static_cast<std::size_t>(cfg.stage1_steps + cfg.stage2_steps));
    CHECK(merged[static_cast<std::size_t>(cfg.stage1_steps)] == cfg.stage2_lr_start);
    std::ifstream f(dir / "curves.ndjson");
    std::string text((std::istreambuf_iterator<char>(f)), {});
    CHECK(train::curve_from_ndjson(text) == r.merged_curves);
    std::filesystem::remove_all(dir);
}

TEST_CASE("stage-2t fine-tunes only the decoder") {
    auto cfg = testutil::tiny_train_config();
    auto data = testutil::tiny_dataset();
    auto s1 = train::run_stage(cfg.plan(StageKind::Stage1Mirror), cfg, data);
    s1 = train::Checkpoint::deserialize(s1.serialize());
    train::Trainer t(cfg, cfg.plan(StageKind::Stage2T), data, &s1);
    CHECK(t.model.transformer_params().empty());
    for (const auto& p : t.gen_opt.params()) CHECK(p.name.rfind("decoder.", 0) == 0);
    auto s2 = t.run();
    CHECK(s2.hash("encoder.") == s1.hash("encoder."));
    CHECK(s2.hash("quantizer.") == s1.hash("quantizer."));
}

TEST_CASE("training is deterministic and modes agree at step 0") {
    auto cfg = testutil::tiny_train_config();
    auto data = testutil::tiny_dataset();
    auto a = train::run_stage(cfg.plan(StageKind::Stage1Mirror), cfg, data);
    auto b = train::run_stage(cfg.plan(StageKind::Stage1Mirror), cfg, data);
    CHECK(a.curves == b.curves);
    CHECK(a.serialize() == b.serialize());

    train::Trainer mirror(cfg, cfg.plan(StageKind::Stage1Mirror), data);
    train::Trainer joint(cfg, cfg.plan(StageKind::JointNonMirror), data);
    mirror.step();
    joint.step();
    for (const char* name : {"mel", "adv_g", "fm", "vq_loss", "io_mse", "loss_total"}) {
        CAPTURE(name);
        CHECK(train::curve_series(mirror.curves(), name)[0] == train::curve_series(joint.curves(), name)[0]);
    }
    CHECK(train::curve_series(mirror.curves(), "lr")[0] == 1e-3);
}

TEST_CASE("negative or NaN loss weights are rejected") {
    auto cfg = testutil::tiny_train_config();
    cfg.loss.mel = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS(cfg.validate());
    cfg.loss.mel = -1.0;
    CHECK_THROWS(cfg.validate());
}

TEST_CASE("non-finite loss aborts with a diagnostic dump") {
    auto cfg = testutil::tiny_train_config();
    auto data = testutil::tiny_dataset();
    auto dir = scratch("nan");
    train::RunOptions opt;
    opt.out_dir = dir;
    train::Trainer t(cfg, cfg.plan(StageKind::Stage1Mirror), data, nullptr, opt);
    t.model.decoder_params()[0].var.values()[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(t.step(), train::TrainingError);
    CHECK(std::filesystem::exists(dir / "nan_dump_step0.json"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("frozen parameter tampering is detected") {
    auto cfg = testutil::tiny_train_config();
    auto data = testutil::tiny_dataset();
    auto s1 = train::Checkpoint::deserialize(train::run_stage(cfg.plan(StageKind::Stage1Mirror), cfg, data).serialize());
    train::Trainer t(cfg, cfg.plan(StageKind::Stage2NonMirror), data, &s1);
    t.step();
    t.model.encoder_params()[0].var.values()[0] += 1.0;
    CHECK_THROWS_AS(t.step(), train::TrainingError);
}

TEST_CASE("optimizer clips by global norm and applies decoupled decay") {
    auto w = ad::Var::from({2}, {1.0, -2.0}, true);
    train::OptimSettings s;
    s.weight_decay = 0.0;
    s.clip_norm = 1.0;
    train::AdamW opt({{"w", w}}, s);
    w.node()->grad = {3.0, 4.0};
    CHECK(opt.grad_norm() == doctest::Approx(5.0));
    CHECK(opt.step(0.1) == doctest::Approx(5.0));
    // first Adam step moves each coordinate by ~lr * sign(grad)
    CHECK(w.values()[0] == doctest::Approx(0.9).epsilon(1e-6));
    CHECK(w.values()[1] == doctest::Approx(-2.1).epsilon(1e-6));

    auto v = ad::Var::from({1}, {2.0}, true);
    train::OptimSettings d;
    d.weight_decay = 0.5;
    train::AdamW o2({{"v", v}}, d);
    o2.step(0.1);  // no gradient: decay only
    CHECK(v.values()[0] == doctest::Approx(2.0 * (1 - 0.1 * 0.5)));
}

TEST_CASE("tail mean and smoothing") {
    CHECK(train::tail_mean({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, 0.1) == 10.0);
    CHECK(train::tail_mean({1, 2, 3, 4}, 0.5) == 3.5);
    CHECK(train::tail_mean({2.0}, 0.1) == 2.0);
    CHECK(train::smooth({1, 3, 5, 7}, 2) == std::vector<double>{1, 2, 4, 6});
}

TEST_CASE("mirror vs non-mirror comparison writes paired curves and a report") {
    auto cfg = testutil::tiny_train_config();
    cfg.stage1_steps = 3;
    auto data = testutil::tiny_dataset();
    auto dir = scratch("compare");
    train::ComparisonOptions opt;
    opt.out_dir = dir;
    auto r = train::mirror_vs_nonmirror(cfg, data, {5, 6}, opt);
    REQUIRE(r.seeds.size() == 2);
    int files = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        files += e.path().extension() == ".ndjson" ? 1 : 0;
    CHECK(files == 4);
    CHECK(std::filesystem::exists(dir / "curves_seed5_stage1.ndjson"));
    CHECK(std::filesystem::exists(dir / "curves_seed6_joint.ndjson"));
    for (const auto& s : r.seeds) {
        CHECK(s.mirror.io_mse.size() == 3);
        CHECK(s.joint.io_mse.size() == s.mirror.io_mse.size());
        CHECK(s.mirror.vq_loss.size() == s.joint.vq_loss.size());
        // zero-residual transformer: both modes start from the same function
        CHECK(s.mirror.io_mse[0] == s.joint.io_mse[0]);
        CHECK(s.mirror.vq_loss[0] == s.joint.vq_loss[0]);
        CHECK((s.lower_io_mse == "stage1" || s.lower_io_mse == "joint"));
    }
    std::ifstream f(dir / "report.json");
    auto j = nlohmann::json::parse(f);
    CHECK(j["seeds"].size() == 2);
    CHECK(j["seeds"][0].contains("lower_io_mse"));
    CHECK(j["seeds"][0]["stage1"].contains("final_io_mse"));
    CHECK(j["trend_holds"].is_boolean());
    CHECK(std::filesystem::file_size(dir / "io_vq_curves.svg") > 200);
    std::filesystem::remove_all(dir);
}
