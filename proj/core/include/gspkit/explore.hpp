#pragma once

// Self-supervised data collection: random policy with action repeat, and a
// greedy curiosity policy driven by forward-model prediction error.

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <utility>

#include "gspkit/chain_world.hpp"
#include "gspkit/dataset.hpp"
#include "gspkit/grid_world.hpp"

namespace gspkit {

struct ExploreOptions {
    int grid_episode_steps = 500;   // primitive steps per grid episode
    int chain_episode_steps = 50;   // actions per chain episode
    double noop_prob = 0.05;
    double epsilon = 0.2;           // curiosity: random-action probability
    int curiosity_candidates = 8;   // chain: sampled candidate actions per decision
    // optional: records the grid cell after every primitive step
    std::vector<std::pair<int, int>>* cell_trace = nullptr;
};

ExplorationDataset random_explore_grid(const GridWorld& world, int episodes, uint64_t seed,
                                       const ExploreOptions& opt = {});
ExplorationDataset random_explore_chain(const ChainWorld& world, int episodes, uint64_t seed,
                                        const ExploreOptions& opt = {});
ExplorationDataset curiosity_explore_grid(const GridWorld& world, int episodes, uint64_t seed,
                                          const ExploreOptions& opt = {});
ExplorationDataset curiosity_explore_chain(const ChainWorld& world, int episodes, uint64_t seed,
                                           const ExploreOptions& opt = {});

// used by the curiosity policy; ties within 1e-9 broken uniformly
int argmax_tiebreak(const std::vector<double>& values, std::mt19937_64& rng);

// distinct grid cells visited per `window` primitive steps, averaged over windows
double grid_state_coverage(const std::vector<std::pair<int, int>>& cell_trace, int window = 1000);

}  // namespace gspkit
