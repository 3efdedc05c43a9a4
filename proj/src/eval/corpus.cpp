#include "dscodec/eval/corpus.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <atomic>
#include <fstream>
#include <mutex>
#include <thread>

#include "dscodec/signal/dataset.hpp"

namespace dscodec::eval {

namespace {

const std::optional<double>* field(const UtteranceScores& r, const std::string& metric) {
    if (metric == "pesq") return &r.pesq;
    if (metric == "stoi") return &r.stoi;
    if (metric == "f1_vuv") return &r.f1_vuv;
    if (metric == "utmos") return &r.utmos;
    throw std::invalid_argument("unknown metric '" + metric + "'");
}

std::string cell(const std::optional<double>& v) { return v ? fmt::format("{}", *v) : "NA"; }

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

}  // namespace

std::optional<double> MetricResult::mean(const std::string& metric) const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : rows)
        if (const auto& v = *field(r, metric)) sum += *v, ++n;
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

std::string MetricResult::csv() const {
    std::string out = has_utmos ? "file,pesq,stoi,f1_vuv,utmos\n" : "file,pesq,stoi,f1_vuv\n";
    for (const auto& r : rows) {
        out += csv_escape(r.file) + "," + cell(r.pesq) + "," + cell(r.stoi) + "," + cell(r.f1_vuv);
        if (has_utmos) out += "," + cell(r.utmos);
        out += "\n";
    }
    return out;
}

nlohmann::ordered_json MetricResult::summary() const {
    nlohmann::ordered_json j;
    j["files"] = rows.size();
    j["excluded"] = excluded.size();
    j["means"] = nlohmann::ordered_json::object();
    for (const char* m : {"pesq", "stoi", "f1_vuv", "utmos"})
        if (auto v = mean(m)) j["means"][m] = *v;
    j["absent_metrics"] = nlohmann::ordered_json::array();
    if (!has_pesq) j["absent_metrics"].push_back("pesq");
    if (!has_utmos) j["absent_metrics"].push_back("utmos");
    j["exclusions"] = nlohmann::ordered_json::array();
    for (const auto& e : excluded) j["exclusions"].push_back({{"file", e.file}, {"reason", e.reason}});
    return j;
}

MetricResult evaluate_corpus(const std::vector<std::filesystem::path>& files, const Pipeline& pipeline,
                             const CorpusOptions& options) {
    MetricResult result;
    result.has_pesq = pesq_available();
    result.has_utmos = utmos_available();
    std::vector<std::optional<UtteranceScores>> scores(files.size());
    std::vector<std::string> errors(files.size());
    std::mutex pipeline_mutex;
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (std::size_t i = next++; i < files.size(); i = next++) {
            try {
                const auto ref = signal::load_wav(files[i]);
                Waveform deg;
                {
                    std::lock_guard lock(pipeline_mutex);
                    deg = pipeline(ref);
                }
                UtteranceScores s;
                s.file = files[i].string();
                s.stoi = stoi(ref, deg);
                s.f1_vuv = f1_vuv(ref, deg, options.vuv);
                s.pesq = pesq(ref, deg);
                s.utmos = utmos(deg);
                scores[i] = std::move(s);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    const int workers = std::max(1, std::min<int>(options.workers > 0 ? options.workers : signal::configured_workers(),
                                                   static_cast<int>(files.size())));
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    for (std::size_t i = 0; i < files.size(); ++i) {
        if (scores[i]) {
            result.rows.push_back(std::move(*scores[i]));
        } else {
            spdlog::warn("excluding {}: {}", files[i].string(), errors[i]);
            result.excluded.push_back({files[i].string(), errors[i]});
        }
    }
    if (!options.out_dir.empty()) {
        std::filesystem::create_directories(options.out_dir);
        std::ofstream(options.out_dir / "metrics.csv") << result.csv();
        std::ofstream(options.out_dir / "summary.json") << result.summary().dump(2) << "\n";
    }
    return result;
}

MetricResult evaluate_manifest(const std::filesystem::path& manifest, const Pipeline& pipeline,
                               const CorpusOptions& options) {
    const auto files = signal::read_manifest(manifest);
    if (files.empty()) throw std::invalid_argument("manifest " + manifest.string() + " lists no files");
    return evaluate_corpus(files, pipeline, options);
}

}  // namespace dscodec::eval
