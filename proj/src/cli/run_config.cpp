#include "dscodec/cli/run_config.hpp"

#include <fstream>

#include "dscodec/signal/synthetic.hpp"
#include "dscodec/util/random.hpp"

namespace dscodec::cli {

namespace {

template <typename T>
void read(const Json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

Json DataConfig::to_json() const {
    return {{"manifest", manifest.string()},
            {"synthetic_utterances", synthetic_utterances},
            {"synthetic_seconds", synthetic_seconds},
            {"synthetic_seed", synthetic_seed},
            {"crop_seed", crop_seed},
            {"allow_resample", allow_resample}};
}

DataConfig DataConfig::from_json(const Json& j) {
    codec::reject_unknown_keys(
        j, {"manifest", "synthetic_utterances", "synthetic_seconds", "synthetic_seed", "crop_seed", "allow_resample"},
        "data");
    DataConfig d;
    std::string m;
    read(j, "manifest", m);
    d.manifest = m;
    read(j, "synthetic_utterances", d.synthetic_utterances);
    read(j, "synthetic_seconds", d.synthetic_seconds);
    read(j, "synthetic_seed", d.synthetic_seed);
    read(j, "crop_seed", d.crop_seed);
    read(j, "allow_resample", d.allow_resample);
    if (d.manifest.empty() && (d.synthetic_utterances < 1 || !(d.synthetic_seconds > 0)))
        throw std::invalid_argument("data: without a manifest, synthetic_utterances and synthetic_seconds must be > 0");
    return d;
}

Json RunConfig::to_json() const {
    return {{"out_dir", out_dir.string()},
            {"data", data.to_json()},
            {"train", train.to_json()},
            {"compare", {{"seeds", compare_seeds}}},
            {"eval", {{"pesq_command", pesq_command}}}};
}

RunConfig RunConfig::from_json(const Json& j) {
    if (!j.is_object()) throw std::invalid_argument("run config must be a JSON object");
    codec::reject_unknown_keys(j, {"out_dir", "data", "train", "compare", "eval"}, "run config");
    if (!j.contains("train")) throw std::invalid_argument("run config: 'train' (with a 'seed') is required");
    RunConfig r;
    r.train = train::TrainConfig::from_json(j.at("train"));
    if (j.contains("data")) r.data = DataConfig::from_json(j.at("data"));
    std::string out;
    read(j, "out_dir", out);
    if (!out.empty()) r.out_dir = out;
    if (j.contains("compare")) {
        codec::reject_unknown_keys(j.at("compare"), {"seeds"}, "compare");
        read(j.at("compare"), "seeds", r.compare_seeds);
        if (r.compare_seeds.empty()) throw std::invalid_argument("compare.seeds must not be empty");
    }
    if (j.contains("eval")) {
        codec::reject_unknown_keys(j.at("eval"), {"pesq_command"}, "eval");
        read(j.at("eval"), "pesq_command", r.pesq_command);
    }
    return r;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("cannot open config " + path.string());
    Json j;
    try {
        j = Json::parse(f);
    } catch (const Json::parse_error& e) {
        throw std::invalid_argument("config " + path.string() + " is not valid JSON: " + e.what());
    }
    auto r = from_json(j);
    if (!r.data.manifest.empty() && r.data.manifest.is_relative())
        r.data.manifest = path.parent_path() / r.data.manifest;
    return r;
}

signal::CropDataset RunConfig::dataset() const {
    const auto crop_seed = data.crop_seed ? data.crop_seed : util::derive_seed(train.seed, "crops");
    if (!data.manifest.empty()) {
        signal::LoadOptions lo;
        lo.expected_rate = train.codec.sample_rate;
        lo.allow_resample = data.allow_resample;
        return signal::CropDataset::from_manifest(data.manifest, train.crop_length, crop_seed, lo);
    }
    const auto synth_seed = data.synthetic_seed ? data.synthetic_seed : util::derive_seed(train.seed, "corpus");
    return signal::CropDataset(signal::synth_corpus(data.synthetic_utterances, data.synthetic_seconds, synth_seed),
                               train.crop_length, crop_seed);
}

RunConfig default_run_config() {
    RunConfig r;
    r.train.seed = 1;
    return r;
}

}  // namespace dscodec::cli
