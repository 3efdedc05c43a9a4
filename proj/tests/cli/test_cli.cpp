#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "dscodec/codec/tokens.hpp"
#include "dscodec/signal/synthetic.hpp"
#include "dscodec/signal/wav.hpp"
#include "dscodec/train/checkpoint.hpp"
#include "json.hpp"

#include <fmt/format.h>

namespace fs = std::filesystem;
using namespace dscodec;

namespace {

const std::string kCli = DSCODEC_CLI;
const fs::path kConfigs = DSCODEC_CONFIGS;

struct Result {
    int code;
    std::string output;
};

// Runs the CLI inside `cwd`, capturing stdout and stderr.
Result run(const fs::path& cwd, const std::string& args) {
    const auto log = cwd / "cli_output.txt";
    const std::string cmd = "cd '" + cwd.string() + "' && '" + kCli + "' " + args + " > '" + log.string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    std::ifstream f(log);
    std::string text((std::istreambuf_iterator<char>(f)), {});
    fs::remove(log);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, text};
}

fs::path fresh(const std::string& name) {
    auto p = fs::temp_directory_path() / ("dscodec_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string tiny() { return "'" + (kConfigs / "tiny.json").string() + "'"; }

std::vector<std::string> listing(const fs::path& dir) {
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) out.push_back(e.path().filename().string());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

TEST_CASE("dump-config prints every default and exits 0") {
    auto dir = fresh("dump");
    auto r = run(dir, "train --dump-config");
    REQUIRE(r.code == 0);
    auto j = nlohmann::json::parse(r.output);
    CHECK(j["train"]["seed"] == 1);
    CHECK(j["train"]["codec"]["quantizer"]["group_sizes"][0] == 8192);
    CHECK(j["train"]["optim"]["beta1"] == 0.8);
    CHECK(j["train"]["stage1_batch"] == 10);
    CHECK(j["train"]["stage2_batch"] == 24);
    CHECK(j["train"]["stage1_lr"]["start"] == 1e-4);
    auto r2 = run(dir, "train -c " + tiny() + " --dump-config");
    REQUIRE(r2.code == 0);
    CHECK(nlohmann::json::parse(r2.output)["train"]["crop_length"] == 400);
    CHECK(listing(dir).empty());
}

TEST_CASE("config errors exit 1") {
    auto dir = fresh("badcfg");
    auto j = nlohmann::json::parse(std::ifstream(kConfigs / "tiny.json"));
    j["train"]["learning_rate"] = 3;
    std::ofstream(dir / "extra.json") << j.dump();
    auto r = run(dir, "train -c extra.json");
    CHECK(r.code == 1);
    CHECK(r.output.find("learning_rate") != std::string::npos);
    j["train"].erase("learning_rate");
    j["train"].erase("seed");
    std::ofstream(dir / "noseed.json") << j.dump();
    r = run(dir, "train -c noseed.json");
    CHECK(r.code == 1);
    CHECK(r.output.find("seed") != std::string::npos);
    std::ofstream(dir / "broken.json") << "{";
    CHECK(run(dir, "train -c broken.json").code == 1);
    CHECK(run(dir, "train -c " + tiny() + " --stage stage3").code == 1);
    CHECK(run(dir, "").code == 1);
}

TEST_CASE("stage 2 without a checkpoint names the missing input") {
    auto dir = fresh("stage2");
    auto r = run(dir, "train -c " + tiny() + " --stage stage2 -o out");
    CHECK(r.code == 1);
    CHECK(r.output.find("--init-from") != std::string::npos);
    CHECK(r.output.find("stage-1 checkpoint") != std::string::npos);
    r = run(dir, "train -c " + tiny() + " --stage stage2t --init-from missing.ckpt -o out");
    CHECK(r.code == 1);
    CHECK(r.output.find("missing.ckpt") != std::string::npos);
}

TEST_CASE("train, encode, decode round trip through files") {
    auto dir = fresh("roundtrip");
    auto r = run(dir, "train -c " + tiny() + " -o out --log-every 0");
    REQUIRE(r.code == 0);
    CHECK(listing(dir) == std::vector<std::string>{"out"});
    for (const char* f : {"stage1.ckpt", "stage2.ckpt", "curves.ndjson", "config.json"}) CHECK(fs::exists(dir / "out" / f));
    // default stage-1 schedule starts at 1e-4
    auto s1 = train::Checkpoint::load(dir / "out" / "stage1.ckpt");
    CHECK(train::curve_series(s1.curves, "lr").at(0) == 1e-4);

    r = run(dir, "train -c " + tiny() + " --stage stage2 --init-from out/stage1.ckpt -o out2 --log-every 0");
    REQUIRE(r.code == 0);
    CHECK(fs::exists(dir / "out2" / "stage2.ckpt"));

    auto wav = signal::synth_speech_like(1.0, 3);
    signal::save_wav(dir / "one.wav", wav);
    r = run(dir, "encode --checkpoint out/stage2.ckpt -i one.wav -o one.tok");
    REQUIRE(r.code == 0);
    auto tokens = codec::read_tokens(dir / "one.tok");
    CHECK(tokens.codes.size() == 80);
    CHECK(tokens.original_length == 16000);

    r = run(dir, "decode --checkpoint out/stage2.ckpt -i one.tok -o back.wav");
    REQUIRE(r.code == 0);
    CHECK(signal::load_wav(dir / "back.wav").size() == 16000);

    signal::Waveform odd = wav;
    odd.samples.resize(12345);
    signal::save_wav(dir / "odd.wav", odd);
    REQUIRE(run(dir, "encode --checkpoint out/stage1.ckpt -i odd.wav -o odd.tok").code == 0);
    REQUIRE(run(dir, "decode --checkpoint out/stage1.ckpt -i odd.tok -o odd_back.wav").code == 0);
    CHECK(signal::load_wav(dir / "odd_back.wav").size() == 12345);

    // stage-1 and stage-2 codecs differ in architecture
    r = run(dir, "decode --checkpoint out/stage1.ckpt -i one.tok -o bad.wav");
    CHECK(r.code != 0);
    const auto id1 = train::Checkpoint::load(dir / "out" / "stage1.ckpt").config.codec_id();
    const auto id2 = train::Checkpoint::load(dir / "out" / "stage2.ckpt").config.codec_id();
    CHECK(r.output.find(fmt::format("{:016x}", id1)) != std::string::npos);
    CHECK(r.output.find(fmt::format("{:016x}", id2)) != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "bad.wav"));
    CHECK(run(dir, "decode --checkpoint out/stage1.ckpt -i one.tok -o forced.wav --force").code == 0);
    CHECK(fs::exists(dir / "forced.wav"));
}

TEST_CASE("eval with the bypass pipeline") {
    auto dir = fresh("eval");
    for (int i = 0; i < 3; ++i)
        signal::save_wav(dir / ("u" + std::to_string(i) + ".wav"), signal::synth_speech_like(1.2, 40 + static_cast<std::uint64_t>(i)));
    std::ofstream(dir / "list.txt") << "u0.wav\nu1.wav\nu2.wav\n";
    auto r = run(dir, "eval --bypass -m list.txt -o report");
    REQUIRE(r.code == 0);
    std::ifstream csv(dir / "report" / "metrics.csv");
    std::string line;
    std::getline(csv, line);
    CHECK(line == "file,pesq,stoi,f1_vuv");
    int rows = 0;
    while (std::getline(csv, line)) {
        ++rows;
        CHECK(line.find(",NA,") != std::string::npos);
    }
    CHECK(rows == 3);
    auto summary = nlohmann::json::parse(std::ifstream(dir / "report" / "summary.json"));
    CHECK(summary["means"]["stoi"].get<double>() == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(summary["means"]["f1_vuv"] == 1.0);
    CHECK(summary["excluded"] == 0);

    std::ofstream(dir / "empty.txt") << "\n";
    CHECK(run(dir, "eval --bypass -m empty.txt -o r2").code == 1);
    CHECK(run(dir, "eval -m list.txt -o r3").code == 1);
}

TEST_CASE("compare writes paired curves, a plot and a report") {
    auto dir = fresh("compare");
    auto r = run(dir, "compare -c " + tiny() + " --seeds 4,5 -o cmp");
    REQUIRE(r.code == 0);
    CHECK(listing(dir) == std::vector<std::string>{"cmp"});
    int curves = 0;
    for (const auto& f : listing(dir / "cmp")) curves += f.ends_with(".ndjson") ? 1 : 0;
    CHECK(curves == 4);
    CHECK(fs::file_size(dir / "cmp" / "io_vq_curves.svg") > 0);
    auto rep = nlohmann::json::parse(std::ifstream(dir / "cmp" / "report.json"));
    REQUIRE(rep["seeds"].size() == 2);
    for (const auto& s : rep["seeds"]) {
        const auto lower = s["lower_io_mse"].get<std::string>();
        CHECK((lower == "stage1" || lower == "joint"));
    }
    CHECK(r.output.find("seed 4: lower io_mse") != std::string::npos);
}
