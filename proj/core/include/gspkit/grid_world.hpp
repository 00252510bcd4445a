#pragma once

// Egocentric partially-observed grid maze with per-wall-cell textures.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gspkit/env.hpp"

namespace gspkit {

enum GridAct : int { kNoOp = 0, kForward = 1, kTurnLeft = 2, kTurnRight = 3 };

struct Pose {
    int row = 0;
    int col = 0;
    int heading = 0;  // 0=N, 1=E, 2=S, 3=W
    bool operator==(const Pose&) const = default;
};

class GridWorld : public Env {
public:
    static constexpr int kWindowW = 5;  // lateral columns
    static constexpr int kWindowD = 7;  // cells ahead (row 0 = agent's cell)

    GridWorld() = default;
    GridWorld(std::vector<std::string> layout, std::vector<std::vector<int>> textures,
              int num_textures, uint64_t seed);

    // recursive-division maze with border wall; throws after 100 failed attempts
    static GridWorld generate(int rows, int cols, int num_textures, uint64_t seed);

    int rows() const { return static_cast<int>(layout_.size()); }
    int cols() const { return layout_.empty() ? 0 : static_cast<int>(layout_[0].size()); }
    bool is_wall(int r, int c) const;
    const std::vector<std::string>& layout() const { return layout_; }
    const std::vector<std::vector<int>>& textures() const { return textures_; }
    int num_textures() const { return num_textures_; }
    uint64_t seed() const { return seed_; }

    const Pose& pose() const { return pose_; }
    void set_pose(const Pose& p);
    std::vector<Pose> free_poses() const;      // all (free cell, heading) states
    std::vector<std::pair<int, int>> free_cells() const;

    // Env interface
    int obs_dim() const override { return kWindowW * kWindowD * 2; }
    ActionSpec action_spec() const override { return {4, false}; }
    std::vector<float> observe() const override;
    bool step(const EnvAction& a) override { return step_action(a.index); }
    std::unique_ptr<Env> clone() const override { return std::make_unique<GridWorld>(*this); }

    bool step_action(int action);  // returns collided
    std::vector<float> observe_at(const Pose& p) const;

    // shortest action count (forward/turn each cost 1) via BFS; -1 if unreachable
    int oracle_distance(const Pose& a, const Pose& b) const;
    bool all_free_cells_connected() const;

    nlohmann::json to_json() const;
    static GridWorld from_json(const nlohmann::json& j);

private:
    std::vector<std::string> layout_;
    std::vector<std::vector<int>> textures_;
    int num_textures_ = 8;
    uint64_t seed_ = 0;
    Pose pose_;
};

struct MapSet {
    GridWorld train;
    GridWorld same_map_diff_texture;
    GridWorld diff_map_diff_texture;
};

// tier generalization set: identical / same-layout-new-textures / fresh-layout
MapSet make_maps(int rows, int cols, int num_textures, uint64_t seed);

// heading deltas, indexed by heading
std::pair<int, int> heading_delta(int heading);

}  // namespace gspkit
