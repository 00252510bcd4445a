#pragma once

// Transition storage from self-supervised exploration, with JSONL
// persistence and the sampling utilities used by training.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gspkit/env.hpp"

namespace gspkit {

struct Transition {
    int episode = 0;
    int step = 0;
    std::vector<float> obs;
    EnvAction action;
    std::vector<float> next_obs;
    bool collided = false;
};

struct DatasetMeta {
    std::string env_type;     // "grid" | "chain"
    std::string policy_type;  // "random" | "curiosity"
    uint64_t seed = 0;
    int episodes = 0;
    int obs_dim = 0;
};

struct ExplorationDataset {
    DatasetMeta meta;
    std::vector<Transition> transitions;  // ordered; episodes contiguous

    size_t size() const { return transitions.size(); }
    // index of first transition of each episode, plus end sentinel
    std::vector<size_t> episode_offsets() const;
    void validate() const;  // episode grouping + step contiguity
};

struct GoalSegment {
    std::vector<std::vector<float>> obs;  // length n+1
    std::vector<EnvAction> actions;       // length n
};

std::vector<Transition> sample_transitions(const ExplorationDataset& ds, int batch, uint64_t seed);
std::vector<Transition> sample_transitions(const ExplorationDataset& ds, int batch, std::mt19937_64& rng);

// segment length uniform in [min_len, max_len] action steps, never across episodes
std::vector<GoalSegment> sample_goal_segments(const ExplorationDataset& ds, int batch, uint64_t seed,
                                              int min_len = 5, int max_len = 15);
// all segments in one batch share the given length
std::vector<GoalSegment> sample_segment_batch(const ExplorationDataset& ds, int batch, int length,
                                              std::mt19937_64& rng);

void save_dataset(const ExplorationDataset& ds, const std::string& path);
ExplorationDataset load_dataset(const std::string& path);

}  // namespace gspkit
