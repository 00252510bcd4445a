#include "gspkit/dataset.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace gspkit {

using nlohmann::json;

std::vector<size_t> ExplorationDataset::episode_offsets() const {
    std::vector<size_t> offs;
    int cur = -1;
    for (size_t i = 0; i < transitions.size(); ++i)
        if (transitions[i].episode != cur) {
            cur = transitions[i].episode;
            offs.push_back(i);
        }
    offs.push_back(transitions.size());
    return offs;
}

void ExplorationDataset::validate() const {
    int cur = -1;
    int expect_step = 0;
    for (size_t i = 0; i < transitions.size(); ++i) {
        const auto& t = transitions[i];
        if (t.episode != cur) {
            if (t.episode < cur)
                throw std::runtime_error("dataset: episodes out of order at transition " + std::to_string(i));
            cur = t.episode;
            expect_step = 0;
        }
        if (t.step != expect_step)
            throw std::runtime_error("dataset: non-contiguous step at transition " + std::to_string(i));
        ++expect_step;
        if (meta.obs_dim && (static_cast<int>(t.obs.size()) != meta.obs_dim ||
                             static_cast<int>(t.next_obs.size()) != meta.obs_dim))
            throw std::runtime_error("dataset: observation dim mismatch at transition " + std::to_string(i));
    }
}

std::vector<Transition> sample_transitions(const ExplorationDataset& ds, int batch, std::mt19937_64& rng) {
    if (ds.transitions.empty()) throw std::runtime_error("sample_transitions: empty dataset");
    std::vector<Transition> out;
    out.reserve(batch);
    std::uniform_int_distribution<size_t> dist(0, ds.transitions.size() - 1);
    for (int i = 0; i < batch; ++i) out.push_back(ds.transitions[dist(rng)]);
    return out;
}

std::vector<Transition> sample_transitions(const ExplorationDataset& ds, int batch, uint64_t seed) {
    std::mt19937_64 rng(seed);
    return sample_transitions(ds, batch, rng);
}

namespace {

GoalSegment cut_segment(const ExplorationDataset& ds, size_t begin, int len) {
    GoalSegment seg;
    seg.obs.push_back(ds.transitions[begin].obs);
    for (int s = 0; s < len; ++s) {
        const auto& t = ds.transitions[begin + s];
        seg.actions.push_back(t.action);
        seg.obs.push_back(t.next_obs);
    }
    return seg;
}

}  // namespace

std::vector<GoalSegment> sample_goal_segments(const ExplorationDataset& ds, int batch, uint64_t seed,
                                              int min_len, int max_len) {
    std::mt19937_64 rng(seed);
    auto offs = ds.episode_offsets();
    std::vector<std::pair<size_t, size_t>> eligible;  // [begin, end) with length >= min_len
    for (size_t e = 0; e + 1 < offs.size(); ++e)
        if (offs[e + 1] - offs[e] >= static_cast<size_t>(min_len)) eligible.emplace_back(offs[e], offs[e + 1]);
    if (eligible.empty()) throw std::runtime_error("sample_goal_segments: no episode long enough");
    std::vector<GoalSegment> out;
    out.reserve(batch);
    std::uniform_int_distribution<size_t> epi(0, eligible.size() - 1);
    std::uniform_int_distribution<int> lend(min_len, max_len);
    while (static_cast<int>(out.size()) < batch) {
        auto [b, e] = eligible[epi(rng)];
        int len = std::min<int>(lend(rng), static_cast<int>(e - b));
        std::uniform_int_distribution<size_t> startd(b, e - len);
        out.push_back(cut_segment(ds, startd(rng), len));
    }
    return out;
}

std::vector<GoalSegment> sample_segment_batch(const ExplorationDataset& ds, int batch, int length,
                                              std::mt19937_64& rng) {
    auto offs = ds.episode_offsets();
    std::vector<std::pair<size_t, size_t>> eligible;
    for (size_t e = 0; e + 1 < offs.size(); ++e)
        if (offs[e + 1] - offs[e] >= static_cast<size_t>(length)) eligible.emplace_back(offs[e], offs[e + 1]);
    if (eligible.empty()) throw std::runtime_error("sample_segment_batch: no episode long enough");
    std::vector<GoalSegment> out;
    out.reserve(batch);
    std::uniform_int_distribution<size_t> epi(0, eligible.size() - 1);
    for (int i = 0; i < batch; ++i) {
        auto [b, e] = eligible[epi(rng)];
        std::uniform_int_distribution<size_t> startd(b, e - length);
        out.push_back(cut_segment(ds, startd(rng), length));
    }
    return out;
}

namespace {

json action_to_json(const EnvAction& a, bool displacement) {
    if (!displacement) return a.index;
    return json{{"pick", a.index}, {"dx", a.dx}, {"dy", a.dy}};
}

EnvAction action_from_json(const json& j) {
    EnvAction a;
    if (j.is_number_integer()) {
        a.index = j.get<int>();
    } else {
        a.index = j.at("pick").get<int>();
        a.dx = j.at("dx").get<double>();
        a.dy = j.at("dy").get<double>();
    }
    return a;
}

}  // namespace

void save_dataset(const ExplorationDataset& ds, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_dataset: cannot open " + path);
    json header{{"env", ds.meta.env_type}, {"policy", ds.meta.policy_type},
                {"seed", ds.meta.seed}, {"episodes", ds.meta.episodes},
                {"obs_dim", ds.meta.obs_dim}, {"transitions", ds.transitions.size()}};
    f << header.dump() << "\n";
    bool disp = ds.meta.env_type == "chain";
    for (const auto& t : ds.transitions) {
        json line{{"episode", t.episode}, {"step", t.step}, {"obs", t.obs},
                  {"action", action_to_json(t.action, disp)}, {"next_obs", t.next_obs},
                  {"collided", t.collided}};
        f << line.dump() << "\n";
    }
}

ExplorationDataset load_dataset(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_dataset: cannot open " + path);
    ExplorationDataset ds;
    std::string line;
    int lineno = 0;
    size_t expected = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const std::exception& e) {
            throw std::runtime_error("load_dataset: malformed line " + std::to_string(lineno) +
                                     " in " + path + ": " + e.what());
        }
        try {
            if (lineno == 1) {
                ds.meta.env_type = j.at("env").get<std::string>();
                ds.meta.policy_type = j.at("policy").get<std::string>();
                ds.meta.seed = j.at("seed").get<uint64_t>();
                ds.meta.episodes = j.at("episodes").get<int>();
                ds.meta.obs_dim = j.at("obs_dim").get<int>();
                expected = j.at("transitions").get<size_t>();
                continue;
            }
            Transition t;
            t.episode = j.at("episode").get<int>();
            t.step = j.at("step").get<int>();
            t.obs = j.at("obs").get<std::vector<float>>();
            t.action = action_from_json(j.at("action"));
            t.next_obs = j.at("next_obs").get<std::vector<float>>();
            t.collided = j.at("collided").get<bool>();
            ds.transitions.push_back(std::move(t));
        } catch (const std::exception& e) {
            throw std::runtime_error("load_dataset: malformed line " + std::to_string(lineno) +
                                     " in " + path + ": " + e.what());
        }
    }
    if (lineno == 0) return ds;  // empty file: empty dataset
    if (ds.transitions.size() != expected)
        throw std::runtime_error("load_dataset: truncated file " + path + ": expected " +
                                 std::to_string(expected) + " transitions, found " +
                                 std::to_string(ds.transitions.size()) + " (last line " +
                                 std::to_string(lineno) + ")");
    ds.validate();
    return ds;
}

}  // namespace gspkit
