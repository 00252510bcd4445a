#pragma once

// Scripted experts, observation-only demonstrations, the landmark-following
// loop, and the completion/efficiency evaluation metrics.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gspkit/chain_world.hpp"
#include "gspkit/grid_world.hpp"
#include "gspkit/gsp.hpp"
#include "gspkit/recognizer.hpp"

namespace gspkit {

// Stateful policy rollout: feeds back the executed action, keeps GRU memory.
class PolicyRunner {
public:
    explicit PolicyRunner(const GspModel& model);
    void reset();
    EnvAction act(const std::vector<float>& obs, const std::vector<float>& goal_obs,
                  std::mt19937_64& rng, bool sample);

private:
    const GspModel& model_;
    std::vector<float> hidden_;
    EnvAction prev_{};
    bool has_prev_ = false;
};

// Agent-facing view: landmarks only. Oracle fields live in a separate,
// strippable section consumed only by metric computation.
struct Demonstration {
    std::string env_type;  // "grid" | "chain"
    int k = 1;             // sub-sample stride
    std::vector<std::vector<float>> landmarks;
    std::vector<int> expert_step_counts;  // cumulative expert steps per landmark

    // oracle section (never read on the agent's code path)
    std::vector<Pose> oracle_poses;                // grid
    std::vector<std::vector<Vec2>> oracle_chains;  // chain

    nlohmann::json to_json(bool strip_oracle = false) const;
    static Demonstration from_json(const nlohmann::json& j);
};

Demonstration generate_demonstration_grid(const GridWorld& world, const Pose& start,
                                          const Pose& goal, int k);
// task: "s_shape" | "loop"
Demonstration generate_demonstration_chain(const ChainWorld& start, const std::string& task, int k,
                                           int max_expert_actions = 80);

struct LandmarkOutcome {
    bool reached = false;
    int agent_steps = 0;       // steps spent on this landmark
    double oracle_gap = 0.0;   // oracle distance at switch time
};

struct ImitationResult {
    std::vector<LandmarkOutcome> landmarks;
    int farthest_contiguous = 0;  // count of leading reached landmarks
    int total_steps = 0;
    double completion = 0.0;                  // farthest_contiguous / N
    std::optional<double> efficiency;         // expert/agent steps, capped at 1
    double final_cost = 0.0;                  // chain: registration cost at the end
    void finalize(const Demonstration& demo);
};

struct FollowOptions {
    int max_steps_per_landmark = 0;  // 0: use 4*k
    double eps_reach_grid = 2.0;     // oracle action steps
    double eps_reach_chain_frac = 0.5;  // fraction of segment length
    bool sample_actions = false;
    uint64_t seed = 0;
};

ImitationResult follow_demonstration_grid(const GspModel& model, const Recognizer& rec,
                                          GridWorld env, const Demonstration& demo,
                                          const FollowOptions& opt);
ImitationResult follow_demonstration_chain(const GspModel& model, const Recognizer& rec,
                                           ChainWorld env, const Demonstration& demo,
                                           const FollowOptions& opt);

struct MetricSummary {
    double median = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    int n = 0;
};

// 95% CI of the median via binomial order statistics
MetricSummary summarize_median(std::vector<double> values);

struct EvalReport {
    std::vector<ImitationResult> runs;
    MetricSummary completion;
    MetricSummary efficiency;  // over runs where efficiency is defined
    nlohmann::json config_echo;

    void aggregate();
    nlohmann::json to_json() const;
};

struct GoalFindingOptions {
    int min_oracle_steps = 20;
    int max_oracle_steps = 30;
    int step_budget = 200;
    int collision_budget = 10;
    double eps_reach = 2.0;
    bool sample_actions = true;
    bool random_policy = false;  // random-search baseline
};

struct GoalFindingResult {
    int episodes = 0;
    int successes = 0;
    std::vector<int> steps_on_success;
    double success_rate() const { return episodes ? static_cast<double>(successes) / episodes : 0.0; }
};

GoalFindingResult goal_finding_eval(const GspModel* model, const Recognizer* rec,
                                    const GridWorld& world, int n_episodes, uint64_t seed,
                                    const GoalFindingOptions& opt = {});

}  // namespace gspkit
