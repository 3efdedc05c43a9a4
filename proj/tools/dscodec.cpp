// dscodec: train, encode, decode, eval and compare from the command line.
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "dscodec/cli/run_config.hpp"
#include "dscodec/codec/tokens.hpp"
#include "dscodec/eval/corpus.hpp"
#include "dscodec/signal/wav.hpp"
#include "dscodec/train/experiment.hpp"
#include "dscodec/train/trainer.hpp"

using namespace dscodec;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

// Configuration and precondition problems map to exit code 1.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

cli::RunConfig load_config(const std::string& path) {
    if (path.empty()) return cli::default_run_config();
    return cli::RunConfig::load(path);
}

struct TrainArgs {
    std::string config, stage, init_from, out;
    bool dump = false;
    std::int64_t log_every = 50;
};

int cmd_train(const TrainArgs& a) {
    auto rc = load_config(a.config);
    if (!a.out.empty()) rc.out_dir = a.out;
    if (a.dump) {
        std::cout << rc.to_json().dump(2) << "\n";
        return 0;
    }
    if (a.config.empty()) throw UsageError("train needs --config (use --dump-config for a starting point)");
    std::optional<train::StageKind> kind;
    if (!a.stage.empty()) kind = train::stage_kind_from_string(a.stage);
    std::optional<train::Checkpoint> init;
    if (kind && rc.train.plan(*kind).needs_checkpoint()) {
        if (a.init_from.empty())
            throw UsageError("--stage " + a.stage + " requires a stage-1 checkpoint: pass --init-from <stage1.ckpt>");
        if (!std::filesystem::exists(a.init_from))
            throw UsageError("stage-1 checkpoint " + a.init_from + " does not exist");
    }
    if (!a.init_from.empty()) init = train::Checkpoint::load(a.init_from);

    const auto data = rc.dataset();
    spdlog::info("corpus: {} utterances, {:.1f} s; output under {}", data.num_utterances(), data.total_seconds(),
                 rc.out_dir.string());
    std::filesystem::create_directories(rc.out_dir);
    std::ofstream(rc.out_dir / "config.json") << rc.to_json().dump(2) << "\n";
    train::RunOptions ro;
    ro.out_dir = rc.out_dir;
    ro.log_every = a.log_every;
    if (!kind) {
        train::dual_stage_train(rc.train, data, ro);
        spdlog::info("wrote {} and {}", (rc.out_dir / "stage1.ckpt").string(), (rc.out_dir / "stage2.ckpt").string());
        return 0;
    }
    ro.curve_file = a.stage + "_curves.ndjson";
    auto ck = train::run_stage(rc.train.plan(*kind), rc.train, data, init ? &*init : nullptr, ro);
    const auto path = rc.out_dir / (a.stage + ".ckpt");
    ck.save(path);
    spdlog::info("wrote {}", path.string());
    return 0;
}

int cmd_encode(const std::string& ckpt, const std::string& in, const std::string& out) {
    auto model = train::model_from_checkpoint(train::Checkpoint::load(ckpt));
    const auto wav = signal::load_wav(in, {model.config.sample_rate, false});
    const auto tokens = model.encode(wav);
    codec::write_tokens(out, tokens);
    spdlog::info("{}: {} samples -> {} tokens ({} bps)", in, wav.size(), tokens.codes.size(),
                 quant::bitrate(tokens.effective_size(), tokens.token_rate));
    return 0;
}

int cmd_decode(const std::string& ckpt, const std::string& in, const std::string& out, bool force) {
    auto model = train::model_from_checkpoint(train::Checkpoint::load(ckpt));
    const auto tokens = codec::read_tokens(in);
    signal::save_wav(out, model.decode(tokens, !force));
    return 0;
}

struct EvalArgs {
    std::string ckpt, manifest, out, pesq_cmd;
    bool bypass = false;
};

int cmd_eval(const EvalArgs& a) {
    if (a.ckpt.empty() == !a.bypass) throw UsageError("eval needs exactly one of --checkpoint or --bypass");
    eval::Pipeline pipeline = eval::identity_pipeline;
    std::optional<codec::CodecModel> model;
    if (!a.bypass) {
        model.emplace(train::model_from_checkpoint(train::Checkpoint::load(a.ckpt)));
        pipeline = [&](const eval::Waveform& w) { return model->decode(model->encode(w)); };
    }
    if (!a.pesq_cmd.empty()) eval::register_pesq(eval::command_pesq(a.pesq_cmd, std::filesystem::path(a.out) / ".pesq"));
    eval::CorpusOptions opt;
    opt.out_dir = a.out;
    const auto r = eval::evaluate_manifest(a.manifest, pipeline, opt);
    std::filesystem::remove_all(std::filesystem::path(a.out) / ".pesq");
    std::cout << r.summary().dump(2) << "\n";
    return 0;
}

int cmd_compare(const std::string& config, const std::vector<std::uint64_t>& seeds, const std::string& out) {
    auto rc = cli::RunConfig::load(config);
    if (!out.empty()) rc.out_dir = out;
    if (!seeds.empty()) rc.compare_seeds = seeds;
    train::ComparisonOptions opt;
    opt.out_dir = rc.out_dir;
    opt.log_every = 100;
    const auto report = train::mirror_vs_nonmirror(rc.train, rc.dataset(), rc.compare_seeds, opt);
    for (const auto& s : report.seeds)
        std::cout << "seed " << s.seed << ": lower io_mse = " << s.lower_io_mse << " (stage1 " << s.mirror.final_io_mse
                  << ", joint " << s.joint.final_io_mse << "); lower vq_loss = " << s.lower_vq_loss << "\n";
    std::cout << "mirror lower io_mse in " << report.mirror_lower_io_mse_count() << " of " << report.seeds.size()
              << " seeds; report: " << (rc.out_dir / "report.json").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dual-stage neural speech codec: training, tokenization and evaluation"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "Debug logging");

    TrainArgs ta;
    auto* train_cmd = app.add_subcommand("train", "Dual-stage training, or one named stage");
    train_cmd->add_option("-c,--config", ta.config, "Run config (JSON)");
    train_cmd->add_option("--stage", ta.stage, "stage1 | stage2 | stage2t | joint (default: stage1 then stage2)")
        ->check(CLI::IsMember({"stage1", "stage2", "stage2t", "joint"}));
    train_cmd->add_option("--init-from", ta.init_from, "Stage-1 checkpoint for stage2/stage2t");
    train_cmd->add_option("-o,--out", ta.out, "Output directory (overrides out_dir)");
    train_cmd->add_option("--log-every", ta.log_every, "Progress line interval in steps (0: silent)");
    train_cmd->add_flag("--dump-config", ta.dump, "Print the effective config with all defaults and exit");

    std::string ckpt, in, out;
    bool force = false;
    auto* enc = app.add_subcommand("encode", "WAV -> token file");
    enc->add_option("--checkpoint", ckpt, "Checkpoint")->required();
    enc->add_option("-i,--input", in, "Input WAV")->required();
    enc->add_option("-o,--output", out, "Output token file")->required();
    auto* dec = app.add_subcommand("decode", "Token file -> WAV");
    dec->add_option("--checkpoint", ckpt, "Checkpoint")->required();
    dec->add_option("-i,--input", in, "Input token file")->required();
    dec->add_option("-o,--output", out, "Output WAV")->required();
    dec->add_flag("--force", force, "Decode even when the codec_id does not match");

    EvalArgs ea;
    auto* ev = app.add_subcommand("eval", "Encode/decode a manifest and score it");
    ev->add_option("--checkpoint", ea.ckpt, "Checkpoint");
    ev->add_flag("--bypass", ea.bypass, "Score the references against themselves");
    ev->add_option("-m,--manifest", ea.manifest, "Manifest of reference WAVs")->required();
    ev->add_option("-o,--out", ea.out, "Output directory for metrics.csv and summary.json")->required();
    ev->add_option("--pesq-cmd", ea.pesq_cmd, "External PESQ scorer: '<cmd> ref.wav deg.wav' prints a score");

    std::string cmp_config, cmp_out;
    std::vector<std::uint64_t> seeds;
    auto* cmp = app.add_subcommand("compare", "Mirror vs non-mirror training at matched step budgets");
    cmp->add_option("-c,--config", cmp_config, "Run config (JSON)")->required();
    cmp->add_option("--seeds", seeds, "Seeds (overrides compare.seeds)")->delimiter(',');
    cmp->add_option("-o,--out", cmp_out, "Output directory (overrides out_dir)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }
    spdlog::set_default_logger(spdlog::stderr_color_mt("dscodec"));
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

    try {
        if (*train_cmd) return cmd_train(ta);
        if (*enc) return cmd_encode(ckpt, in, out);
        if (*dec) return cmd_decode(ckpt, in, out, force);
        if (*ev) {
            if (ea.pesq_cmd.empty() && std::getenv("DSCODEC_PESQ_CMD")) ea.pesq_cmd = std::getenv("DSCODEC_PESQ_CMD");
            return cmd_eval(ea);
        }
        if (*cmp) return cmd_compare(cmp_config, seeds, cmp_out);
    } catch (const UsageError& e) {
        spdlog::error("{}", e.what());
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        spdlog::error("{}", e.what());
        return kExitUsage;
    } catch (const nlohmann::json::exception& e) {
        spdlog::error("config: {}", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kExitRuntime;
    }
    return kExitUsage;
}
