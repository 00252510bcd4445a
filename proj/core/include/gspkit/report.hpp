#pragma once

// Cross-table evaluation (variant x data source x generalization tier),
// CSV/JSON/SVG emission.

#include <map>
#include <string>
#include <vector>

#include "gspkit/imitate.hpp"

namespace gspkit {

struct AblationCell {
    std::string data_source;
    std::string variant;
    std::string tier;
    EvalReport report;
};

struct AblationTable {
    std::vector<AblationCell> cells;  // sorted by (source, variant, tier)

    const AblationCell* find(const std::string& source, const std::string& variant,
                             const std::string& tier) const;
};

struct AblationEvalOptions {
    int demos_per_tier = 5;
    int seeds_per_demo = 10;
    int k = 5;
    int min_demo_steps = 15;
    int max_demo_steps = 40;
    FollowOptions follow;
};

// Models keyed by (data source, variant label); requires a full cross of the
// observed sources and variants, errors listing any absent combination.
AblationTable run_ablation_suite(
    const std::map<std::pair<std::string, std::string>, const GspModel*>& models,
    const std::map<std::string, const Recognizer*>& recognizers,
    const std::vector<std::pair<std::string, GridWorld>>& tiers,
    uint64_t seed, const AblationEvalOptions& opt);

std::string ablation_csv(const AblationTable& table);
void write_ablation_csv(const AblationTable& table, const std::string& path);
nlohmann::json ablation_to_json(const AblationTable& table);
AblationTable ablation_from_json(const nlohmann::json& j);

// grouped bar chart of median completion with CI whiskers
std::string ablation_svg(const AblationTable& table);
void write_ablation_svg(const AblationTable& table, const std::string& path);

}  // namespace gspkit
