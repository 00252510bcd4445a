#include "gspkit/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "gspkit/rng.hpp"

namespace gspkit {

const AblationCell* AblationTable::find(const std::string& source, const std::string& variant,
                                        const std::string& tier) const {
    for (const auto& c : cells)
        if (c.data_source == source && c.variant == variant && c.tier == tier) return &c;
    return nullptr;
}

namespace {

std::vector<Demonstration> tier_demonstrations(const GridWorld& world, uint64_t seed,
                                               const AblationEvalOptions& opt) {
    std::mt19937_64 rng(mix_seed(seed, fnv1a("tier-demos")));
    auto poses = world.free_poses();
    std::vector<Demonstration> demos;
    int guard = 0;
    while (static_cast<int>(demos.size()) < opt.demos_per_tier) {
        if (++guard > 10000) throw std::runtime_error("tier_demonstrations: cannot place demos");
        Pose a = poses[rng() % poses.size()];
        Pose b = poses[rng() % poses.size()];
        int d = world.oracle_distance(a, b);
        if (d < opt.min_demo_steps || d > opt.max_demo_steps) continue;
        demos.push_back(generate_demonstration_grid(world, a, b, opt.k));
    }
    return demos;
}

}  // namespace

AblationTable run_ablation_suite(
    const std::map<std::pair<std::string, std::string>, const GspModel*>& models,
    const std::map<std::string, const Recognizer*>& recognizers,
    const std::vector<std::pair<std::string, GridWorld>>& tiers,
    uint64_t seed, const AblationEvalOptions& opt) {
    std::set<std::string> sources, variants;
    for (const auto& [key, m] : models) {
        sources.insert(key.first);
        variants.insert(key.second);
    }
    std::vector<std::string> missing;
    for (const auto& s : sources)
        for (const auto& v : variants)
            if (!models.count({s, v})) missing.push_back(s + "/" + v);
    for (const auto& s : sources)
        if (!recognizers.count(s)) missing.push_back(s + "/<recognizer>");
    if (!missing.empty()) {
        std::string msg = "run_ablation_suite: missing combinations:";
        for (const auto& m : missing) msg += " " + m;
        throw std::runtime_error(msg);
    }

    // demos are fixed per tier, shared by every model
    std::vector<std::pair<std::string, std::vector<Demonstration>>> tier_demos;
    for (const auto& [tier, world] : tiers)
        tier_demos.emplace_back(tier, tier_demonstrations(world, mix_seed(seed, fnv1a(tier)), opt));

    AblationTable table;
    for (const auto& source : sources)
        for (const auto& variant : variants)
            for (size_t ti = 0; ti < tiers.size(); ++ti) {
                const auto& [tier, world] = tiers[ti];
                const GspModel* model = models.at({source, variant});
                const Recognizer* rec = recognizers.at(source);
                AblationCell cell;
                cell.data_source = source;
                cell.variant = variant;
                cell.tier = tier;
                for (size_t di = 0; di < tier_demos[ti].second.size(); ++di) {
                    const auto& demo = tier_demos[ti].second[di];
                    for (int s = 0; s < opt.seeds_per_demo; ++s) {
                        FollowOptions fo = opt.follow;
                        fo.seed = mix_seed(seed, fnv1a(source + "/" + variant + "/" + tier) ^
                                                     mix64(di * 1000 + s));
                        GridWorld env = world;
                        env.set_pose(demo.oracle_poses.front());
                        cell.report.runs.push_back(
                            follow_demonstration_grid(*model, *rec, env, demo, fo));
                    }
                }
                cell.report.aggregate();
                cell.report.config_echo = {{"source", source}, {"variant", variant}, {"tier", tier}};
                table.cells.push_back(std::move(cell));
            }
    return table;
}

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

std::string ablation_csv(const AblationTable& table) {
    std::ostringstream os;
    os << "data_source,variant,tier,median_completion,completion_ci_lo,completion_ci_hi,"
          "median_efficiency,efficiency_ci_lo,efficiency_ci_hi,runs\n";
    for (const auto& c : table.cells)
        os << c.data_source << "," << c.variant << "," << c.tier << ","
           << fmt(c.report.completion.median) << "," << fmt(c.report.completion.ci_lo) << ","
           << fmt(c.report.completion.ci_hi) << "," << fmt(c.report.efficiency.median) << ","
           << fmt(c.report.efficiency.ci_lo) << "," << fmt(c.report.efficiency.ci_hi) << ","
           << c.report.runs.size() << "\n";
    return os.str();
}

void write_ablation_csv(const AblationTable& table, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_ablation_csv: cannot open " + path);
    f << ablation_csv(table);
}

nlohmann::json ablation_to_json(const AblationTable& table) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : table.cells)
        cells.push_back({{"data_source", c.data_source}, {"variant", c.variant}, {"tier", c.tier},
                         {"report", c.report.to_json()}});
    return {{"cells", std::move(cells)}};
}

AblationTable ablation_from_json(const nlohmann::json& j) {
    AblationTable t;
    for (const auto& cj : j.at("cells")) {
        AblationCell c;
        c.data_source = cj.at("data_source").get<std::string>();
        c.variant = cj.at("variant").get<std::string>();
        c.tier = cj.at("tier").get<std::string>();
        const auto& rj = cj.at("report");
        auto get_summary = [](const nlohmann::json& s) {
            MetricSummary m;
            m.median = s.at("median").get<double>();
            m.ci_lo = s.at("ci_lo").get<double>();
            m.ci_hi = s.at("ci_hi").get<double>();
            m.n = s.at("n").get<int>();
            return m;
        };
        c.report.completion = get_summary(rj.at("completion"));
        c.report.efficiency = get_summary(rj.at("efficiency"));
        for (const auto& run : rj.at("runs")) {
            ImitationResult r;
            r.farthest_contiguous = run.at("farthest_contiguous").get<int>();
            r.total_steps = run.at("total_steps").get<int>();
            r.completion = run.at("completion").get<double>();
            r.final_cost = run.value("final_cost", 0.0);
            if (!run.at("efficiency").is_null()) r.efficiency = run.at("efficiency").get<double>();
            for (const auto& lm : run.at("landmarks")) {
                LandmarkOutcome o;
                o.reached = lm.at("reached").get<bool>();
                o.agent_steps = lm.at("agent_steps").get<int>();
                o.oracle_gap = lm.at("oracle_gap").get<double>();
                r.landmarks.push_back(o);
            }
            c.report.runs.push_back(std::move(r));
        }
        t.cells.push_back(std::move(c));
    }
    return t;
}

std::string ablation_svg(const AblationTable& table) {
    int n = static_cast<int>(table.cells.size());
    int bar_w = 26, gap = 14, margin = 60, height = 360, plot_h = 260;
    int width = margin * 2 + n * (bar_w + gap);
    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
       << "\">\n";
    os << "<text x=\"" << margin << "\" y=\"20\" font-size=\"14\">median completion (95% CI)</text>\n";
    // axis
    os << "<line x1=\"" << margin << "\" y1=\"" << 40 + plot_h << "\" x2=\"" << width - margin
       << "\" y2=\"" << 40 + plot_h << "\" stroke=\"black\"/>\n";
    for (int i = 0; i < n; ++i) {
        const auto& c = table.cells[i];
        double m = c.report.completion.median;
        int x = margin + i * (bar_w + gap);
        int h = static_cast<int>(m * plot_h);
        int y = 40 + plot_h - h;
        os << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << bar_w << "\" height=\"" << h
           << "\" fill=\"#4878a8\"/>\n";
        int ylo = 40 + plot_h - static_cast<int>(c.report.completion.ci_lo * plot_h);
        int yhi = 40 + plot_h - static_cast<int>(c.report.completion.ci_hi * plot_h);
        int cx = x + bar_w / 2;
        os << "<line x1=\"" << cx << "\" y1=\"" << ylo << "\" x2=\"" << cx << "\" y2=\"" << yhi
           << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << x << "\" y=\"" << 40 + plot_h + 14 << "\" font-size=\"7\">"
           << c.data_source << "/" << c.variant << "/" << c.tier << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

void write_ablation_svg(const AblationTable& table, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_ablation_svg: cannot open " + path);
    f << ablation_svg(table);
}

}  // namespace gspkit
