#pragma once

// 2D chain-manipulation world: pick a point, displace it, neighbors follow
// so that segment lengths stay fixed. Observed as a rasterized binary image.

#include <array>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "gspkit/env.hpp"

namespace gspkit {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

class ChainWorld : public Env {
public:
    static constexpr int kDefaultPoints = 16;
    static constexpr double kSegmentLength = 1.0;
    static constexpr double kMaxDisplacement = 2.0;
    static constexpr double kArena = 20.0;  // [0, kArena]^2
    static constexpr int kRaster = 32;

    ChainWorld();
    explicit ChainWorld(std::vector<Vec2> points, double segment_length = kSegmentLength);

    // straight horizontal chain centered in the arena
    static ChainWorld centered(int k = kDefaultPoints);

    const std::vector<Vec2>& points() const { return points_; }
    double segment_length() const { return seg_len_; }
    int num_points() const { return static_cast<int>(points_.size()); }
    void set_points(std::vector<Vec2> pts);

    // Env interface
    int obs_dim() const override { return kRaster * kRaster; }
    ActionSpec action_spec() const override { return {num_points(), true}; }
    std::vector<float> observe() const override { return rasterize(points_); }
    bool step(const EnvAction& a) override;
    std::unique_ptr<Env> clone() const override { return std::make_unique<ChainWorld>(*this); }

    static std::vector<float> rasterize(const std::vector<Vec2>& pts);

private:
    std::vector<Vec2> points_;
    double seg_len_ = kSegmentLength;

    void follow_the_leader(int pick);
};

// symmetric mean nearest-neighbor distance between two equal-size point sets
double registration_cost(const std::vector<Vec2>& a, const std::vector<Vec2>& b);
inline double registration_cost(const ChainWorld& a, const ChainWorld& b) {
    return registration_cost(a.points(), b.points());
}

// parametric target shapes for manipulation tasks
std::vector<Vec2> chain_target_s_shape(int k, double seg_len);
std::vector<Vec2> chain_target_loop(int k, double seg_len);

nlohmann::json chain_points_to_json(const std::vector<Vec2>& pts);
std::vector<Vec2> chain_points_from_json(const nlohmann::json& j);

}  // namespace gspkit
