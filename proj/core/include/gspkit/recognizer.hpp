#pragma once

// Binary goal recognizer trained from temporal-proximity labels on
// exploration data.

#include <cstdint>
#include <string>
#include <vector>

#include "gspkit/dataset.hpp"
#include "gspkit/nets.hpp"

namespace gspkit {

struct LabeledGoalPair {
    std::vector<float> obs;
    std::vector<float> goal_obs;
    bool positive = false;
    int temporal_gap = 0;
};

struct RecognizerConfig {
    int r_pos = 2;
    int r_neg = 6;
    int hidden_dim = 128;
    int steps = 2000;
    int batch_size = 64;
    double learning_rate = 1e-3;
    double holdout_fraction = 0.2;
};

struct Recognizer {
    RecognizerConfig cfg;
    int obs_dim = 0;
    MlpT<float> net;  // [obs ++ goal ++ |obs - goal|] -> 2 logits
    float tau = 0.5f;

    // sigmoid probability that obs satisfies goal_obs
    float score(const std::vector<float>& obs, const std::vector<float>& goal_obs) const;
};

struct RecognizerReport {
    double train_accuracy = 0.0;
    double holdout_accuracy = 0.0;
    float tau = 0.5f;
};

// pseudo-goals uniform per episode; positives within r_pos steps, negatives at
// >= r_neg steps in the same episode; exclusion zone never emitted; 1:1 balance
std::vector<LabeledGoalPair> make_labels(const ExplorationDataset& ds, int pairs_per_episode,
                                         const RecognizerConfig& cfg, uint64_t seed);

Recognizer train_recognizer(const std::vector<LabeledGoalPair>& pairs, const RecognizerConfig& cfg,
                            uint64_t seed, RecognizerReport* report = nullptr);

bool is_goal_reached(const Recognizer& rec, const std::vector<float>& obs,
                     const std::vector<float>& goal_obs);

void save_recognizer(const Recognizer& rec, const std::string& path);
Recognizer load_recognizer(const std::string& path);

}  // namespace gspkit
