#include "gspkit/imitate.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <stdexcept>

namespace gspkit {

// ---- policy runner ---------------------------------------------------------

PolicyRunner::PolicyRunner(const GspModel& model) : model_(model) { reset(); }

void PolicyRunner::reset() {
    hidden_.assign(model_.cfg.hidden_dim, 0.0f);
    has_prev_ = false;
    prev_ = {};
}

EnvAction PolicyRunner::act(const std::vector<float>& obs, const std::vector<float>& goal_obs,
                            std::mt19937_64& rng, bool sample) {
    Tape tape;
    auto x = tape.tensor({1, model_.obs_dim}, std::vector<float>(obs.begin(), obs.end()));
    auto g = tape.tensor({1, model_.obs_dim}, std::vector<float>(goal_obs.begin(), goal_obs.end()));
    auto feat_t = model_.encode(tape, x);
    auto feat_g = model_.encode(tape, g);
    std::vector<float> prev_enc(model_.aspec.enc_dim(), 0.0f);
    if (has_prev_) prev_enc = model_.encode_action(prev_);
    auto a_prev = tape.tensor({1, model_.aspec.enc_dim()}, std::move(prev_enc));
    auto h = tape.tensor({1, model_.cfg.hidden_dim}, hidden_);
    auto po = model_.policy_step(tape, h, feat_t, feat_g, a_prev);
    auto probs = tape.softmax(po.logits);

    EnvAction a;
    if (sample) {
        std::discrete_distribution<int> dist(probs->data.begin(), probs->data.end());
        a.index = dist(rng);
    } else {
        a.index = static_cast<int>(std::max_element(probs->data.begin(), probs->data.end()) -
                                   probs->data.begin());
    }
    if (model_.aspec.has_displacement && po.disp) {
        a.dx = po.disp->data[0];
        a.dy = po.disp->data[1];
    }
    if (is_recurrent(model_.cfg.variant)) hidden_ = po.hidden->data;
    prev_ = a;
    has_prev_ = true;
    return a;
}

// ---- demonstrations --------------------------------------------------------

nlohmann::json Demonstration::to_json(bool strip_oracle) const {
    nlohmann::json j{{"env", env_type}, {"k", k}, {"landmarks", landmarks},
                     {"expert_steps", expert_step_counts}};
    if (!strip_oracle) {
        nlohmann::json oracle;
        if (env_type == "grid") {
            nlohmann::json poses = nlohmann::json::array();
            for (const auto& p : oracle_poses) poses.push_back({p.row, p.col, p.heading});
            oracle["poses"] = std::move(poses);
        } else {
            nlohmann::json chains = nlohmann::json::array();
            for (const auto& c : oracle_chains) chains.push_back(chain_points_to_json(c));
            oracle["chains"] = std::move(chains);
        }
        j["oracle_trace"] = std::move(oracle);
    }
    return j;
}

Demonstration Demonstration::from_json(const nlohmann::json& j) {
    Demonstration d;
    d.env_type = j.at("env").get<std::string>();
    d.k = j.at("k").get<int>();
    d.landmarks = j.at("landmarks").get<std::vector<std::vector<float>>>();
    d.expert_step_counts = j.at("expert_steps").get<std::vector<int>>();
    if (j.contains("oracle_trace")) {
        const auto& o = j["oracle_trace"];
        if (o.contains("poses"))
            for (const auto& p : o["poses"])
                d.oracle_poses.push_back({p.at(0).get<int>(), p.at(1).get<int>(), p.at(2).get<int>()});
        if (o.contains("chains"))
            for (const auto& c : o["chains"]) d.oracle_chains.push_back(chain_points_from_json(c));
    }
    return d;
}

// shortest action sequence start -> goal via breadth-first search over (cell, heading)
std::vector<int> bfs_expert_actions(const GridWorld& world, const Pose& start, const Pose& goal) {
    if (start == goal) return {};
    auto key = [&](const Pose& p) { return (p.row * world.cols() + p.col) * 4 + (p.heading & 3); };
    std::map<int, std::pair<int, int>> parent;  // state -> (prev state, action)
    std::deque<Pose> q{start};
    parent[key(start)] = {-1, -1};
    while (!q.empty()) {
        Pose cur = q.front();
        q.pop_front();
        struct Next { Pose p; int a; };
        std::vector<Next> nexts;
        auto [dr, dc] = heading_delta(cur.heading);
        if (!world.is_wall(cur.row + dr, cur.col + dc))
            nexts.push_back({{cur.row + dr, cur.col + dc, cur.heading}, kForward});
        nexts.push_back({{cur.row, cur.col, (cur.heading + 3) & 3}, kTurnLeft});
        nexts.push_back({{cur.row, cur.col, (cur.heading + 1) & 3}, kTurnRight});
        for (const auto& nx : nexts) {
            if (parent.count(key(nx.p))) continue;
            parent[key(nx.p)] = {key(cur), nx.a};
            if (nx.p == goal) {
                std::vector<int> actions;
                int state = key(nx.p);
                while (parent[state].first != -1) {
                    actions.push_back(parent[state].second);
                    state = parent[state].first;
                }
                std::reverse(actions.begin(), actions.end());
                return actions;
            }
            q.push_back(nx.p);
        }
    }
    throw std::runtime_error("bfs_expert_actions: goal unreachable");
}

Demonstration generate_demonstration_grid(const GridWorld& world, const Pose& start,
                                          const Pose& goal, int k) {
    auto actions = bfs_expert_actions(world, start, goal);
    GridWorld env = world;
    env.set_pose(start);
    std::vector<std::vector<float>> frames{env.observe()};
    std::vector<Pose> poses{env.pose()};
    for (int a : actions) {
        if (env.step_action(a)) throw std::runtime_error("generate_demonstration_grid: expert collided");
        frames.push_back(env.observe());
        poses.push_back(env.pose());
    }
    Demonstration d;
    d.env_type = "grid";
    d.k = k;
    int last = static_cast<int>(frames.size()) - 1;
    for (int i = 0; i <= last; i += k) {
        d.landmarks.push_back(frames[i]);
        d.oracle_poses.push_back(poses[i]);
        d.expert_step_counts.push_back(i);
    }
    if (d.expert_step_counts.back() != last) {
        d.landmarks.push_back(frames[last]);
        d.oracle_poses.push_back(poses[last]);
        d.expert_step_counts.push_back(last);
    }
    return d;
}

Demonstration generate_demonstration_chain(const ChainWorld& start, const std::string& task, int k,
                                           int max_expert_actions) {
    std::vector<Vec2> target;
    if (task == "s_shape") target = chain_target_s_shape(start.num_points(), start.segment_length());
    else if (task == "loop") target = chain_target_loop(start.num_points(), start.segment_length());
    else throw std::runtime_error("generate_demonstration_chain: unknown task '" + task + "'");

    ChainWorld env = start;
    std::vector<std::vector<float>> frames{env.observe()};
    std::vector<std::vector<Vec2>> states{env.points()};
    for (int step = 0; step < max_expert_actions; ++step) {
        // greedy: move the point farthest from its target position toward it
        int best = -1;
        double best_d = 0.05;  // stop when every point is within 0.05 units
        for (int i = 0; i < env.num_points(); ++i) {
            double dx = target[i].x - env.points()[i].x;
            double dy = target[i].y - env.points()[i].y;
            double d = std::sqrt(dx * dx + dy * dy);
            if (d > best_d) {
                best_d = d;
                best = i;
            }
        }
        if (best < 0) break;
        EnvAction a;
        a.index = best;
        double s = std::min(1.0, ChainWorld::kMaxDisplacement / best_d);
        a.dx = s * (target[best].x - env.points()[best].x);
        a.dy = s * (target[best].y - env.points()[best].y);
        env.step(a);
        frames.push_back(env.observe());
        states.push_back(env.points());
    }
    Demonstration d;
    d.env_type = "chain";
    d.k = k;
    int last = static_cast<int>(frames.size()) - 1;
    for (int i = 0; i <= last; i += k) {
        d.landmarks.push_back(frames[i]);
        d.oracle_chains.push_back(states[i]);
        d.expert_step_counts.push_back(i);
    }
    if (d.expert_step_counts.back() != last) {
        d.landmarks.push_back(frames[last]);
        d.oracle_chains.push_back(states[last]);
        d.expert_step_counts.push_back(last);
    }
    return d;
}

// ---- landmark following ----------------------------------------------------

void ImitationResult::finalize(const Demonstration& demo) {
    farthest_contiguous = 0;
    for (const auto& o : landmarks) {
        if (!o.reached) break;
        ++farthest_contiguous;
    }
    int n = static_cast<int>(demo.landmarks.size());
    completion = n ? static_cast<double>(farthest_contiguous) / n : 0.0;
    if (farthest_contiguous == 0) {
        efficiency.reset();
        return;
    }
    int agent = 0;
    for (int i = 0; i < farthest_contiguous; ++i) agent += landmarks[i].agent_steps;
    int expert = demo.expert_step_counts[farthest_contiguous - 1];
    efficiency = agent == 0 ? 1.0 : std::min(1.0, static_cast<double>(expert) / agent);
}

namespace {

template <class EnvT, class GapFn>
ImitationResult follow_impl(const GspModel& model, const Recognizer& rec, EnvT& env,
                            const Demonstration& demo, const FollowOptions& opt, GapFn oracle_gap,
                            double eps_reach, int collision_budget) {
    PolicyRunner runner(model);
    std::mt19937_64 rng(mix_seed(opt.seed, fnv1a("follow")));
    ImitationResult res;
    int budget = opt.max_steps_per_landmark > 0 ? opt.max_steps_per_landmark : 4 * demo.k;
    int collisions = 0;
    bool crashed = false;
    for (size_t j = 0; j < demo.landmarks.size(); ++j) {
        LandmarkOutcome out;
        if (!crashed) {
            runner.reset();  // each landmark is an independent goal episode
            while (out.agent_steps < budget) {
                if (is_goal_reached(rec, env.observe(), demo.landmarks[j])) break;
                EnvAction a = runner.act(env.observe(), demo.landmarks[j], rng, opt.sample_actions);
                if (env.step(a)) ++collisions;
                ++out.agent_steps;
                ++res.total_steps;
                if (collisions > collision_budget) {
                    crashed = true;
                    break;
                }
            }
        }
        out.oracle_gap = oracle_gap(env, j);
        out.reached = !crashed && out.oracle_gap <= eps_reach;
        res.landmarks.push_back(out);
        // budget exhaustion advances to the next landmark regardless
    }
    res.finalize(demo);
    return res;
}

}  // namespace

ImitationResult follow_demonstration_grid(const GspModel& model, const Recognizer& rec,
                                          GridWorld env, const Demonstration& demo,
                                          const FollowOptions& opt) {
    auto gap = [&demo](GridWorld& e, size_t j) {
        return static_cast<double>(e.oracle_distance(e.pose(), demo.oracle_poses[j]));
    };
    return follow_impl(model, rec, env, demo, opt, gap, opt.eps_reach_grid, 50);
}

ImitationResult follow_demonstration_chain(const GspModel& model, const Recognizer& rec,
                                           ChainWorld env, const Demonstration& demo,
                                           const FollowOptions& opt) {
    auto gap = [&demo](ChainWorld& e, size_t j) {
        return registration_cost(e.points(), demo.oracle_chains[j]);
    };
    double eps = opt.eps_reach_chain_frac * env.segment_length();
    auto res = follow_impl(model, rec, env, demo, opt, gap, eps, 1 << 30);
    res.final_cost = registration_cost(env.points(), demo.oracle_chains.back());
    return res;
}

// ---- metrics ---------------------------------------------------------------

MetricSummary summarize_median(std::vector<double> values) {
    MetricSummary s;
    s.n = static_cast<int>(values.size());
    if (values.empty()) return s;
    std::sort(values.begin(), values.end());
    int n = s.n;
    s.median = n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
    // order-statistic 95% CI for the median: Binomial(n, 1/2) quantiles
    std::vector<double> cdf(n + 1);
    double p = std::pow(0.5, n);
    double c = 0.0;
    double binom = 1.0;
    for (int k = 0; k <= n; ++k) {
        c += binom * p;
        cdf[k] = c;
        binom = binom * (n - k) / (k + 1);
    }
    int lo = 0;
    while (lo < n && cdf[lo] < 0.025) ++lo;
    int hi = n - 1;
    while (hi > 0 && 1.0 - (hi > 0 ? cdf[hi - 1] : 0.0) < 0.025) --hi;
    if (hi < lo) hi = lo;
    s.ci_lo = values[std::min(lo, n - 1)];
    s.ci_hi = values[std::min(hi, n - 1)];
    return s;
}

void EvalReport::aggregate() {
    std::vector<double> comp, eff;
    for (const auto& r : runs) {
        comp.push_back(r.completion);
        if (r.efficiency) eff.push_back(*r.efficiency);
    }
    completion = summarize_median(std::move(comp));
    efficiency = summarize_median(std::move(eff));
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json jr = nlohmann::json::array();
    for (const auto& r : runs) {
        nlohmann::json lm = nlohmann::json::array();
        for (const auto& o : r.landmarks)
            lm.push_back({{"reached", o.reached}, {"agent_steps", o.agent_steps},
                          {"oracle_gap", o.oracle_gap}});
        nlohmann::json run{{"landmarks", std::move(lm)},
                           {"farthest_contiguous", r.farthest_contiguous},
                           {"total_steps", r.total_steps},
                           {"completion", r.completion},
                           {"final_cost", r.final_cost}};
        if (r.efficiency) run["efficiency"] = *r.efficiency;
        else run["efficiency"] = nullptr;
        jr.push_back(std::move(run));
    }
    auto summary = [](const MetricSummary& m) {
        return nlohmann::json{{"median", m.median}, {"ci_lo", m.ci_lo}, {"ci_hi", m.ci_hi}, {"n", m.n}};
    };
    return {{"runs", std::move(jr)}, {"completion", summary(completion)},
            {"efficiency", summary(efficiency)}, {"config", config_echo}};
}

// ---- goal finding ----------------------------------------------------------

namespace {

// in-map cells covered by the egocentric window at pose p
std::vector<std::pair<int, int>> window_cells(const GridWorld& w, const Pose& p) {
    auto [fr, fc] = heading_delta(p.heading);
    auto [rr, rc] = heading_delta(p.heading + 1);
    std::vector<std::pair<int, int>> cells;
    int half = GridWorld::kWindowW / 2;
    for (int d = 0; d < GridWorld::kWindowD; ++d)
        for (int wv = -half; wv <= half; ++wv) {
            int r = p.row + d * fr + wv * rr;
            int c = p.col + d * fc + wv * rc;
            if (r >= 0 && r < w.rows() && c >= 0 && c < w.cols()) cells.emplace_back(r, c);
        }
    return cells;
}

bool windows_overlap(const GridWorld& w, const Pose& a, const Pose& b) {
    auto ca = window_cells(w, a);
    auto cb = window_cells(w, b);
    for (const auto& x : ca)
        for (const auto& y : cb)
            if (x == y) return true;
    return false;
}

}  // namespace

GoalFindingResult goal_finding_eval(const GspModel* model, const Recognizer* rec,
                                    const GridWorld& world, int n_episodes, uint64_t seed,
                                    const GoalFindingOptions& opt) {
    std::mt19937_64 rng(mix_seed(seed, fnv1a("goal-finding")));
    auto poses = world.free_poses();
    GoalFindingResult result;
    for (int e = 0; e < n_episodes; ++e) {
        Pose start, goal;
        bool placed = false;
        for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
            start = poses[rng() % poses.size()];
            goal = poses[rng() % poses.size()];
            int d = world.oracle_distance(start, goal);
            placed = d >= opt.min_oracle_steps && d <= opt.max_oracle_steps &&
                     !windows_overlap(world, start, goal);
        }
        if (!placed)
            throw std::runtime_error("goal_finding_eval: no valid start/goal placement in 100 attempts");

        GridWorld env = world;
        env.set_pose(start);
        auto goal_obs = env.observe_at(goal);
        std::unique_ptr<PolicyRunner> runner;
        if (model && !opt.random_policy) runner = std::make_unique<PolicyRunner>(*model);

        ++result.episodes;
        int collisions = 0;
        bool success = false;
        for (int s = 0; s < opt.step_budget; ++s) {
            if (env.oracle_distance(env.pose(), goal) <= opt.eps_reach) {
                success = true;
                result.steps_on_success.push_back(s);
                break;
            }
            if (rec && is_goal_reached(*rec, env.observe(), goal_obs)) break;
            EnvAction a;
            if (runner) {
                a = runner->act(env.observe(), goal_obs, rng, opt.sample_actions);
            } else {
                const int acts[3] = {kForward, kTurnLeft, kTurnRight};
                a.index = acts[rng() % 3];
            }
            if (env.step(a)) ++collisions;
            if (collisions > opt.collision_budget) break;  // crash
        }
        if (success) ++result.successes;
    }
    return result;
}

}  // namespace gspkit
