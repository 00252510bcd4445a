#include "gspkit/recognizer.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "gspkit/checkpoint.hpp"
#include "gspkit/rng.hpp"

namespace gspkit {

namespace {

// [obs ++ goal ++ |obs - goal|]
std::vector<float> pair_features(const std::vector<float>& obs, const std::vector<float>& goal_obs) {
    std::vector<float> in = obs;
    in.insert(in.end(), goal_obs.begin(), goal_obs.end());
    for (size_t i = 0; i < obs.size(); ++i) in.push_back(std::fabs(obs[i] - goal_obs[i]));
    return in;
}

}  // namespace

float Recognizer::score(const std::vector<float>& obs, const std::vector<float>& goal_obs) const {
    Tape tape;
    auto x = tape.tensor({1, 3 * obs_dim}, pair_features(obs, goal_obs));
    auto logits = net.apply(const_cast<Tape&>(tape), x);
    float l = logits->data[1] - logits->data[0];
    return 1.0f / (1.0f + std::exp(-l));
}

std::vector<LabeledGoalPair> make_labels(const ExplorationDataset& ds, int pairs_per_episode,
                                         const RecognizerConfig& cfg, uint64_t seed) {
    if (cfg.r_neg <= cfg.r_pos) throw std::runtime_error("make_labels: r_neg must exceed r_pos");
    if (pairs_per_episode <= 0) throw std::runtime_error("make_labels: pairs_per_episode must be positive");
    std::mt19937_64 rng(mix_seed(seed, fnv1a("goal-labels")));
    auto offs = ds.episode_offsets();
    std::vector<LabeledGoalPair> out;
    bool any_eligible = false;
    for (size_t e = 0; e + 1 < offs.size(); ++e) {
        size_t begin = offs[e], end = offs[e + 1];
        int n = static_cast<int>(end - begin);  // transitions; observation index range [0, n]
        if (n < cfg.r_neg + 1) continue;        // need a gap >= r_neg within the episode
        any_eligible = true;
        auto obs_at = [&](int i) -> const std::vector<float>& {
            // observation i of the episode (i in [0, n])
            return i < n ? ds.transitions[begin + i].obs : ds.transitions[end - 1].next_obs;
        };
        for (int p = 0; p < pairs_per_episode; ++p) {
            int goal = static_cast<int>(rng() % (n + 1));
            // positive partner within r_pos steps
            int lo = std::max(0, goal - cfg.r_pos), hi = std::min(n, goal + cfg.r_pos);
            int pos = lo + static_cast<int>(rng() % (hi - lo + 1));
            // negative partner at gap >= r_neg
            std::vector<int> far;
            if (goal - cfg.r_neg >= 0) far.push_back(-1);
            if (goal + cfg.r_neg <= n) far.push_back(1);
            if (far.empty()) continue;
            int dir = far[rng() % far.size()];
            int neg;
            if (dir < 0) neg = static_cast<int>(rng() % (goal - cfg.r_neg + 1));
            else neg = goal + cfg.r_neg + static_cast<int>(rng() % (n - goal - cfg.r_neg + 1));
            out.push_back({obs_at(pos), obs_at(goal), true, std::abs(pos - goal)});
            out.push_back({obs_at(neg), obs_at(goal), false, std::abs(neg - goal)});
        }
    }
    if (!any_eligible) throw std::runtime_error("make_labels: no episode long enough");
    return out;
}

Recognizer train_recognizer(const std::vector<LabeledGoalPair>& pairs, const RecognizerConfig& cfg,
                            uint64_t seed, RecognizerReport* report) {
    if (pairs.empty()) throw std::runtime_error("train_recognizer: no pairs");
    int obs_dim = static_cast<int>(pairs[0].obs.size());
    std::mt19937_64 rng(mix_seed(seed, fnv1a("recognizer-train")));

    std::vector<size_t> order(pairs.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    size_t holdout = static_cast<size_t>(pairs.size() * cfg.holdout_fraction);
    std::vector<size_t> test(order.begin(), order.begin() + holdout);
    std::vector<size_t> train(order.begin() + holdout, order.end());
    if (train.empty()) throw std::runtime_error("train_recognizer: empty train split");

    Recognizer rec;
    rec.cfg = cfg;
    rec.obs_dim = obs_dim;
    {
        Tape tape;
        rec.net = MlpT<float>::create(tape, {3 * obs_dim, cfg.hidden_dim, cfg.hidden_dim / 2, 2}, rng);
    }

    Tape tape;
    AdamState adam;
    adam.learning_rate = static_cast<float>(cfg.learning_rate);
    Params params;
    rec.net.collect("recognizer", params);
    std::uniform_int_distribution<size_t> pick(0, train.size() - 1);
    for (int s = 0; s < cfg.steps; ++s) {
        std::vector<float> in;
        std::vector<int> targets;
        for (int b = 0; b < cfg.batch_size; ++b) {
            const auto& p = pairs[train[pick(rng)]];
            auto feats = pair_features(p.obs, p.goal_obs);
            in.insert(in.end(), feats.begin(), feats.end());
            targets.push_back(p.positive ? 1 : 0);
        }
        auto x = tape.tensor({cfg.batch_size, 3 * obs_dim}, std::move(in));
        auto logits = rec.net.apply(tape, x);
        auto loss = tape.cross_entropy_logits(logits, targets);
        if (!std::isfinite(loss->item()))
            throw std::runtime_error("train_recognizer: diverged at step " + std::to_string(s));
        tape.backward(loss);
        adam_step(params, adam);
    }

    auto scores = [&](const std::vector<size_t>& idx) {
        std::vector<std::pair<float, bool>> sc;
        sc.reserve(idx.size());
        for (size_t i : idx)
            sc.emplace_back(rec.score(pairs[i].obs, pairs[i].goal_obs), pairs[i].positive);
        return sc;
    };
    auto balanced_accuracy = [](const std::vector<std::pair<float, bool>>& sc, float tau) {
        double tp = 0, fn = 0, tn = 0, fp = 0;
        for (auto [s, pos] : sc) {
            bool pred = s >= tau;
            if (pos) (pred ? tp : fn) += 1;
            else (pred ? fp : tn) += 1;
        }
        double sens = tp + fn > 0 ? tp / (tp + fn) : 0.0;
        double spec = tn + fp > 0 ? tn / (tn + fp) : 0.0;
        return 0.5 * (sens + spec);
    };

    // threshold maximizing balanced accuracy on the held-out split
    auto held = scores(test.empty() ? train : test);
    float best_tau = 0.5f;
    double best_acc = -1.0;
    for (int i = 1; i < 100; ++i) {
        float tau = static_cast<float>(i) / 100.0f;
        double acc = balanced_accuracy(held, tau);
        if (acc > best_acc) {
            best_acc = acc;
            best_tau = tau;
        }
    }
    rec.tau = best_tau;
    if (report) {
        report->train_accuracy = balanced_accuracy(scores(train), rec.tau);
        report->holdout_accuracy = best_acc;
        report->tau = best_tau;
    }
    return rec;
}

bool is_goal_reached(const Recognizer& rec, const std::vector<float>& obs,
                     const std::vector<float>& goal_obs) {
    return rec.score(obs, goal_obs) >= rec.tau;
}

void save_recognizer(const Recognizer& rec, const std::string& path) {
    Params params;
    rec.net.collect("recognizer", params);
    nlohmann::json cfg{{"obs_dim", rec.obs_dim}, {"tau", rec.tau},
                       {"r_pos", rec.cfg.r_pos}, {"r_neg", rec.cfg.r_neg},
                       {"hidden_dim", rec.cfg.hidden_dim}};
    save_checkpoint(params, cfg, path);
}

Recognizer load_recognizer(const std::string& path) {
    Checkpoint ck = load_checkpoint(path);
    Recognizer rec;
    rec.obs_dim = ck.config.at("obs_dim").get<int>();
    rec.tau = ck.config.at("tau").get<float>();
    rec.cfg.r_pos = ck.config.value("r_pos", 2);
    rec.cfg.r_neg = ck.config.value("r_neg", 6);
    rec.cfg.hidden_dim = ck.config.value("hidden_dim", 128);
    Tape tape;
    std::mt19937_64 rng(0);
    rec.net = MlpT<float>::create(tape, {3 * rec.obs_dim, rec.cfg.hidden_dim, rec.cfg.hidden_dim / 2, 2}, rng);
    Params params;
    rec.net.collect("recognizer", params);
    restore_params(params, ck);
    return rec;
}

}  // namespace gspkit
