#include "gspkit/explore.hpp"

#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

#include "gspkit/nets.hpp"
#include "gspkit/rng.hpp"

namespace gspkit {

namespace {

// per-episode PRNG stream derived from the master seed
std::mt19937_64 episode_rng(uint64_t seed, int episode) {
    return std::mt19937_64(mix_seed(seed, static_cast<uint64_t>(episode) + 1));
}

void verify_replay(const Env& env_before, const EnvAction& a, const std::vector<float>& next_obs) {
    auto clone = env_before.clone();
    clone->step(a);
    if (clone->observe() != next_obs)
        throw std::runtime_error("exploration: transition failed replay check");
}

struct Recorder {
    ExplorationDataset& ds;
    int episode = 0;
    int step = 0;
    std::vector<std::pair<int, int>>* cells = nullptr;

    void record(Env& env, const std::vector<float>& obs, const EnvAction& a) {
        std::unique_ptr<Env> before = (step % 17 == 0) ? env.clone() : nullptr;
        bool collided = env.step(a);
        Transition t;
        t.episode = episode;
        t.step = step++;
        t.obs = obs;
        t.action = a;
        t.next_obs = env.observe();
        t.collided = collided;
        if (before) verify_replay(*before, a, t.next_obs);
        ds.transitions.push_back(std::move(t));
        if (cells)
            if (auto* g = dynamic_cast<GridWorld*>(&env))
                cells->emplace_back(g->pose().row, g->pose().col);
    }
};

// Online forward model used for curiosity: (obs, action encoding) -> next obs.
struct CuriosityModel {
    Tape tape;
    MlpT<float> net;
    AdamState adam;
    int obs_dim;
    int enc_dim;
    // replay of the explorer's own transitions; a single pass over each
    // transition is too little signal for the error ranking to mean anything
    static constexpr size_t kReplayCap = 4096;
    static constexpr int kReplayUpdates = 7;
    struct Item {
        std::vector<float> in;
        std::vector<float> target;
    };
    std::vector<Item> replay;
    size_t replay_next = 0;
    std::mt19937_64 replay_rng;

    CuriosityModel(int obs_dim_, int enc_dim_, uint64_t seed) : obs_dim(obs_dim_), enc_dim(enc_dim_) {
        std::mt19937_64 rng(seed);
        net = MlpT<float>::create(tape, {obs_dim + enc_dim, 128, obs_dim}, rng);
        adam.learning_rate = 1e-3f;
        replay_rng.seed(mix_seed(seed, 0x5eed));
        tape.clear();
    }

    std::vector<float> encode_action(const EnvAction& a, const ActionSpec& spec) const {
        std::vector<float> enc(spec.enc_dim(), 0.0f);
        enc[a.index] = 1.0f;
        if (spec.has_displacement) {
            enc[spec.num_discrete] = static_cast<float>(a.dx);
            enc[spec.num_discrete + 1] = static_cast<float>(a.dy);
        }
        return enc;
    }

    // the net predicts the observation change; the no-change case is then the
    // easy one and stops looking novel almost immediately
    std::vector<float> predict_delta(const std::vector<float>& obs, const std::vector<float>& enc) {
        std::vector<float> in = obs;
        in.insert(in.end(), enc.begin(), enc.end());
        auto x = tape.tensor({1, obs_dim + enc_dim}, std::move(in));
        auto y = net.apply(tape, x);
        tape.clear();
        return y->data;
    }

    double error(const std::vector<float>& obs, const std::vector<float>& enc,
                 const std::vector<float>& next_obs) {
        auto pred = predict_delta(obs, enc);
        double acc = 0;
        for (size_t i = 0; i < pred.size(); ++i) {
            double d = pred[i] - (next_obs[i] - obs[i]);
            acc += d * d;
        }
        return acc / static_cast<double>(pred.size());
    }

    void fit_one(const std::vector<float>& in, const std::vector<float>& target_v) {
        auto x = tape.tensor({1, obs_dim + enc_dim}, in);
        auto y = net.apply(tape, x);
        auto target = tape.tensor({1, obs_dim}, target_v);
        auto loss = tape.mse(y, target);
        tape.backward(loss);
        ParamsT<float> params;
        net.collect("curiosity", params);
        adam_step(params, adam);
    }

    void update(const std::vector<float>& obs, const std::vector<float>& enc,
                const std::vector<float>& next_obs) {
        std::vector<float> delta(obs_dim);
        for (int i = 0; i < obs_dim; ++i) delta[i] = next_obs[i] - obs[i];
        std::vector<float> in = obs;
        in.insert(in.end(), enc.begin(), enc.end());
        fit_one(in, delta);
        if (replay.size() < kReplayCap) {
            replay.push_back({std::move(in), std::move(delta)});
        } else {
            replay[replay_next] = {std::move(in), std::move(delta)};
            replay_next = (replay_next + 1) % kReplayCap;
        }
        for (int i = 0; i < kReplayUpdates && !replay.empty(); ++i) {
            const auto& it = replay[replay_rng() % replay.size()];
            fit_one(it.in, it.target);
        }
    }
};

}  // namespace

int argmax_tiebreak(const std::vector<double>& values, std::mt19937_64& rng) {
    double best = *std::max_element(values.begin(), values.end());
    std::vector<int> ties;
    for (size_t i = 0; i < values.size(); ++i)
        if (values[i] >= best - 1e-9) ties.push_back(static_cast<int>(i));
    return ties[rng() % ties.size()];
}

namespace {

Pose random_free_pose(const GridWorld& world, std::mt19937_64& rng) {
    auto cells = world.free_cells();
    auto [r, c] = cells[rng() % cells.size()];
    return {r, c, static_cast<int>(rng() % 4)};
}

// collision response: turn 90-270 degrees (1-3 turns in one random direction)
void reset_maneuver(Recorder& rec, GridWorld& env, std::mt19937_64& rng, int budget) {
    int turns = 1 + static_cast<int>(rng() % 3);
    int dir = (rng() & 1) ? kTurnLeft : kTurnRight;
    for (int i = 0; i < turns && rec.step < budget; ++i)
        rec.record(env, env.observe(), EnvAction{dir});
}

EnvAction random_chain_action(const ChainWorld& env, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
    std::uniform_real_distribution<double> mag(0.0, ChainWorld::kMaxDisplacement);
    EnvAction a;
    a.index = static_cast<int>(rng() % env.num_points());
    double th = angle(rng);
    double m = mag(rng);
    if (m == 0.0) m = ChainWorld::kMaxDisplacement;  // magnitude in (0, d_max]
    a.dx = m * std::cos(th);
    a.dy = m * std::sin(th);
    return a;
}

}  // namespace

ExplorationDataset random_explore_grid(const GridWorld& world, int episodes, uint64_t seed,
                                       const ExploreOptions& opt) {
    if (episodes <= 0) throw std::runtime_error("random_explore_grid: episodes must be > 0");
    ExplorationDataset ds;
    ds.meta = {"grid", "random", seed, episodes, world.obs_dim()};
    for (int e = 0; e < episodes; ++e) {
        auto rng = episode_rng(seed, e);
        GridWorld env = world;
        env.set_pose(random_free_pose(env, rng));
        Recorder rec{ds, e, 0, opt.cell_trace};
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        while (rec.step < opt.grid_episode_steps) {
            int action, repeat;
            if (unif(rng) < opt.noop_prob) {
                action = kNoOp;
                repeat = 1 + static_cast<int>(rng() % 2);
            } else {
                const int acts[3] = {kForward, kTurnLeft, kTurnRight};
                action = acts[rng() % 3];
                repeat = 1 + static_cast<int>(rng() % 5);
            }
            for (int r = 0; r < repeat && rec.step < opt.grid_episode_steps; ++r) {
                auto obs = env.observe();
                rec.record(env, obs, EnvAction{action});
                if (ds.transitions.back().collided) {
                    reset_maneuver(rec, env, rng, opt.grid_episode_steps);
                    break;
                }
            }
        }
    }
    ds.validate();
    return ds;
}

ExplorationDataset random_explore_chain(const ChainWorld& world, int episodes, uint64_t seed,
                                        const ExploreOptions& opt) {
    if (episodes <= 0) throw std::runtime_error("random_explore_chain: episodes must be > 0");
    ExplorationDataset ds;
    ds.meta = {"chain", "random", seed, episodes, world.obs_dim()};
    for (int e = 0; e < episodes; ++e) {
        auto rng = episode_rng(seed, e);
        ChainWorld env = world;
        Recorder rec{ds, e, 0};
        for (int s = 0; s < opt.chain_episode_steps; ++s)
            rec.record(env, env.observe(), random_chain_action(env, rng));
    }
    ds.validate();
    return ds;
}

namespace {

template <class EnvT, class CandidateFn, class RandomStepFn>
void curiosity_episode(Recorder& rec, EnvT& env, CuriosityModel& model, std::mt19937_64& rng,
                       int steps, double epsilon, int max_repeat, CandidateFn candidates,
                       RandomStepFn random_step) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    while (rec.step < steps) {
        auto obs = env.observe();
        EnvAction chosen;
        if (unif(rng) < epsilon) {
            chosen = random_step(env, rng);
        } else {
            std::vector<EnvAction> cands = candidates(env, rng);
            std::vector<double> errs;
            errs.reserve(cands.size());
            for (const auto& a : cands) {
                auto look = env.clone();
                look->step(a);
                errs.push_back(model.error(obs, model.encode_action(a, env.action_spec()), look->observe()));
            }
            chosen = cands[argmax_tiebreak(errs, rng)];
        }
        // chosen action held for a few primitive steps, as in the random policy
        int repeat = 1;
        if (max_repeat > 1) {
            bool is_noop = false;
            if constexpr (std::is_same_v<EnvT, GridWorld>) is_noop = chosen.index == kNoOp;
            repeat = is_noop ? 1 + static_cast<int>(rng() % 2)
                             : 1 + static_cast<int>(rng() % max_repeat);
        }
        for (int r = 0; r < repeat && rec.step < steps; ++r) {
            rec.record(env, env.observe(), chosen);
            const auto& t = rec.ds.transitions.back();
            model.update(t.obs, model.encode_action(t.action, env.action_spec()), t.next_obs);
            if constexpr (std::is_same_v<EnvT, GridWorld>) {
                if (t.collided) {
                    reset_maneuver(rec, env, rng, steps);
                    break;
                }
            }
        }
    }
}

}  // namespace

ExplorationDataset curiosity_explore_grid(const GridWorld& world, int episodes, uint64_t seed,
                                          const ExploreOptions& opt) {
    if (episodes <= 0) throw std::runtime_error("curiosity_explore_grid: episodes must be > 0");
    ExplorationDataset ds;
    ds.meta = {"grid", "curiosity", seed, episodes, world.obs_dim()};
    CuriosityModel model(world.obs_dim(), world.action_spec().enc_dim(), mix_seed(seed, 0xc0ffee));
    auto candidates = [](GridWorld&, std::mt19937_64&) {
        return std::vector<EnvAction>{{kNoOp}, {kForward}, {kTurnLeft}, {kTurnRight}};
    };
    auto random_step = [](GridWorld&, std::mt19937_64& rng) {
        return EnvAction{static_cast<int>(rng() % 4)};
    };
    for (int e = 0; e < episodes; ++e) {
        auto rng = episode_rng(seed, e);
        GridWorld env = world;
        env.set_pose(random_free_pose(env, rng));
        Recorder rec{ds, e, 0, opt.cell_trace};
        curiosity_episode(rec, env, model, rng, opt.grid_episode_steps, opt.epsilon, 5,
                          candidates, random_step);
    }
    ds.validate();
    return ds;
}

double grid_state_coverage(const std::vector<std::pair<int, int>>& cell_trace, int window) {
    if (cell_trace.empty()) return 0.0;
    double acc = 0.0;
    int windows = 0;
    for (size_t b = 0; b < cell_trace.size(); b += window) {
        size_t e = std::min(cell_trace.size(), b + window);
        std::set<std::pair<int, int>> distinct(cell_trace.begin() + b, cell_trace.begin() + e);
        acc += static_cast<double>(distinct.size());
        ++windows;
    }
    return acc / windows;
}

ExplorationDataset curiosity_explore_chain(const ChainWorld& world, int episodes, uint64_t seed,
                                           const ExploreOptions& opt) {
    if (episodes <= 0) throw std::runtime_error("curiosity_explore_chain: episodes must be > 0");
    ExplorationDataset ds;
    ds.meta = {"chain", "curiosity", seed, episodes, world.obs_dim()};
    CuriosityModel model(world.obs_dim(), world.action_spec().enc_dim(), mix_seed(seed, 0xc0ffee));
    int ncand = opt.curiosity_candidates;
    auto candidates = [ncand](ChainWorld& env, std::mt19937_64& rng) {
        std::vector<EnvAction> cs;
        for (int i = 0; i < ncand; ++i) cs.push_back(random_chain_action(env, rng));
        return cs;
    };
    auto random_step = [](ChainWorld& env, std::mt19937_64& rng) {
        return random_chain_action(env, rng);
    };
    for (int e = 0; e < episodes; ++e) {
        auto rng = episode_rng(seed, e);
        ChainWorld env = world;
        Recorder rec{ds, e, 0};
        curiosity_episode(rec, env, model, rng, opt.chain_episode_steps, opt.epsilon, 1,
                          candidates, random_step);
    }
    ds.validate();
    return ds;
}

}  // namespace gspkit
