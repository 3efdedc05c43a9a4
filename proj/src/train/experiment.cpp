#include "dscodec/train/experiment.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace dscodec::train {

double tail_mean(const std::vector<double>& v, double fraction) {
    if (v.empty()) return 0.0;
    const auto n = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(v.size()))),
                                           1, v.size());
    double s = 0.0;
    for (std::size_t i = v.size() - n; i < v.size(); ++i) s += v[i];
    return s / static_cast<double>(n);
}

std::vector<double> smooth(const std::vector<double>& v, std::size_t window) {
    window = std::max<std::size_t>(window, 1);
    std::vector<double> out(v.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        acc += v[i];
        if (i >= window) acc -= v[i - window];
        out[i] = acc / static_cast<double>(std::min(i + 1, window));
    }
    return out;
}

int ComparisonReport::mirror_lower_io_mse_count() const {
    return static_cast<int>(std::count_if(seeds.begin(), seeds.end(),
                                          [](const SeedComparison& s) { return s.lower_io_mse == "stage1"; }));
}

bool ComparisonReport::trend_holds() const {
    return !seeds.empty() && 2 * mirror_lower_io_mse_count() > static_cast<int>(seeds.size());
}

Json ComparisonReport::to_json() const {
    Json j;
    j["steps"] = steps;
    j["tail_fraction"] = tail_fraction;
    j["seeds"] = Json::array();
    for (const auto& s : seeds) {
        auto mode = [](const ModeSummary& m) {
            return Json{{"curve_file", m.curve_file.filename().string()},
                        {"steps", m.io_mse.size()},
                        {"final_io_mse", m.final_io_mse},
                        {"final_vq_loss", m.final_vq_loss}};
        };
        j["seeds"].push_back({{"seed", s.seed},
                              {"stage1", mode(s.mirror)},
                              {"joint", mode(s.joint)},
                              {"lower_io_mse", s.lower_io_mse},
                              {"lower_vq_loss", s.lower_vq_loss}});
    }
    j["mirror_lower_io_mse"] = mirror_lower_io_mse_count();
    j["trend_holds"] = trend_holds();
    return j;
}

namespace {

ModeSummary run_mode(StageKind kind, const TrainConfig& cfg, const signal::CropDataset& data,
                     const ComparisonOptions& options) {
    ModeSummary m;
    m.mode = to_string(kind);
    RunOptions ro;
    ro.out_dir = options.out_dir;
    ro.curve_file = fmt::format("curves_seed{}_{}.ndjson", cfg.seed, m.mode);
    ro.log_every = options.log_every;
    m.curve_file = options.out_dir / ro.curve_file;
    Trainer t(cfg, cfg.plan(kind), data, nullptr, ro);
    t.run();
    m.vq_loss = curve_series(t.curves(), "vq_loss");
    m.io_mse = curve_series(t.curves(), "io_mse");
    m.final_vq_loss = tail_mean(m.vq_loss, options.tail_fraction);
    m.final_io_mse = tail_mean(m.io_mse, options.tail_fraction);
    return m;
}

}  // namespace

ComparisonReport mirror_vs_nonmirror(const TrainConfig& cfg, const signal::CropDataset& data,
                                     const std::vector<std::uint64_t>& seeds, const ComparisonOptions& options) {
    if (options.out_dir.empty()) throw std::invalid_argument("comparison needs an output directory");
    if (seeds.empty()) throw std::invalid_argument("comparison needs at least one seed");
    std::filesystem::create_directories(options.out_dir);
    ComparisonReport report;
    report.steps = cfg.stage1_steps;
    report.tail_fraction = options.tail_fraction;
    for (auto seed : seeds) {
        TrainConfig c = cfg;
        c.seed = seed;
        SeedComparison s;
        s.seed = seed;
        s.mirror = run_mode(StageKind::Stage1Mirror, c, data, options);
        s.joint = run_mode(StageKind::JointNonMirror, c, data, options);
        s.lower_io_mse = s.mirror.final_io_mse <= s.joint.final_io_mse ? "stage1" : "joint";
        s.lower_vq_loss = s.mirror.final_vq_loss <= s.joint.final_vq_loss ? "stage1" : "joint";
        report.seeds.push_back(std::move(s));
    }
    std::ofstream(options.out_dir / "report.json") << report.to_json().dump(2) << "\n";
    std::ofstream(options.out_dir / "io_vq_curves.svg") << render_comparison_svg(report);
    return report;
}

std::string render_comparison_svg(const ComparisonReport& report) {
    constexpr double W = 900, H = 360, panel_w = 400, panel_h = 260, top = 50, left0 = 60, gap = 60;
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"};
    std::string svg = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
        "font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
        W, H);
    const std::size_t window = std::max<std::int64_t>(1, report.steps / 20);

    for (int panel = 0; panel < 2; ++panel) {
        const double x0 = left0 + panel * (panel_w + gap);
        const char* title = panel == 0 ? "VQ loss" : "quantizer input/output MSE";
        std::vector<std::pair<std::string, std::vector<double>>> lines;
        for (const auto& s : report.seeds)
            for (const ModeSummary* m : {&s.mirror, &s.joint})
                lines.emplace_back(fmt::format("{} seed {}", m->mode == "stage1" ? "mirror" : "non-mirror", s.seed),
                                   smooth(panel == 0 ? m->vq_loss : m->io_mse, window));
        double lo = INFINITY, hi = -INFINITY;
        std::size_t n = 1;
        for (const auto& [_, v] : lines) {
            for (double x : v)
                if (std::isfinite(x)) lo = std::min(lo, x), hi = std::max(hi, x);
            n = std::max(n, v.size());
        }
        if (!(hi > lo)) lo = std::isfinite(lo) ? lo - 0.5 : 0.0, hi = lo + 1.0;
        svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
                           x0 + panel_w / 2, top - 20, title);
        svg += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", x0,
                           top, panel_w, panel_h);
        svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.3g}</text>\n", x0 - 4, top + 10, hi);
        svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.3g}</text>\n", x0 - 4, top + panel_h, lo);
        svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">step</text>\n", x0 + panel_w / 2,
                           top + panel_h + 30);
        svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", x0 + panel_w, top + panel_h + 16,
                           n - 1);
        for (std::size_t li = 0; li < lines.size(); ++li) {
            const auto& v = lines[li].second;
            std::string pts;
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (!std::isfinite(v[i])) continue;
                const double x = x0 + panel_w * (n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0);
                const double y = top + panel_h * (1.0 - (v[i] - lo) / (hi - lo));
                pts += fmt::format("{:.1f},{:.1f} ", x, y);
            }
            const char* color = palette[(li / 2) % 6];
            svg += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"{} points=\"{}\"/>\n", color,
                               li % 2 ? " stroke-dasharray=\"5,3\"" : "", pts);
            if (panel == 0)
                svg += fmt::format(
                    "<text x=\"{}\" y=\"{}\" fill=\"{}\">{}</text>\n", left0 + 10 + 200 * static_cast<double>(li % 4),
                    H - 30 + 14 * static_cast<double>(li / 4), color, lines[li].first);
        }
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace dscodec::train
