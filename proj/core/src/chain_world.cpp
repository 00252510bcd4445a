#include "gspkit/chain_world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gspkit {

namespace {

constexpr double kEps = 1e-12;

double norm(const Vec2& v) { return std::sqrt(v.x * v.x + v.y * v.y); }
Vec2 operator-(const Vec2& a, const Vec2& b) { return {a.x - b.x, a.y - b.y}; }
Vec2 operator+(const Vec2& a, const Vec2& b) { return {a.x + b.x, a.y + b.y}; }
Vec2 operator*(double s, const Vec2& v) { return {s * v.x, s * v.y}; }

bool in_arena(const Vec2& p) {
    return p.x >= 0.0 && p.x <= ChainWorld::kArena && p.y >= 0.0 && p.y <= ChainWorld::kArena;
}

Vec2 clamp_arena(const Vec2& p) {
    return {std::clamp(p.x, 0.0, ChainWorld::kArena), std::clamp(p.y, 0.0, ChainWorld::kArena)};
}

// point at distance L from anchor, toward target's previous position, kept in bounds
Vec2 place_neighbor(const Vec2& anchor, const Vec2& old_pos, double L) {
    Vec2 center{ChainWorld::kArena / 2, ChainWorld::kArena / 2};
    Vec2 dir = old_pos - anchor;
    if (norm(dir) < kEps) dir = center - anchor;
    if (norm(dir) < kEps) dir = {1.0, 0.0};
    Vec2 cand = anchor + (L / norm(dir)) * dir;
    if (in_arena(cand)) return cand;
    // aim at the clamped candidate instead
    Vec2 dir2 = clamp_arena(cand) - anchor;
    if (norm(dir2) >= kEps) {
        Vec2 c2 = anchor + (L / norm(dir2)) * dir2;
        if (in_arena(c2)) return c2;
    }
    // inward always works: the arena is much larger than one segment
    Vec2 dir3 = center - anchor;
    if (norm(dir3) < kEps) dir3 = {1.0, 0.0};
    return anchor + (L / norm(dir3)) * dir3;
}

}  // namespace

ChainWorld::ChainWorld() { *this = centered(kDefaultPoints); }

ChainWorld::ChainWorld(std::vector<Vec2> points, double segment_length)
    : points_(std::move(points)), seg_len_(segment_length) {
    if (points_.size() < 2) throw std::runtime_error("ChainWorld: need at least 2 points");
}

ChainWorld ChainWorld::centered(int k) {
    std::vector<Vec2> pts(k);
    double x0 = (kArena - (k - 1) * kSegmentLength) / 2.0;
    for (int i = 0; i < k; ++i) pts[i] = {x0 + i * kSegmentLength, kArena / 2.0};
    return ChainWorld(std::move(pts));
}

void ChainWorld::set_points(std::vector<Vec2> pts) {
    if (pts.size() != points_.size()) throw std::runtime_error("ChainWorld: point count mismatch");
    points_ = std::move(pts);
}

bool ChainWorld::step(const EnvAction& a) {
    int pick = a.index;
    if (pick < 0 || pick >= num_points())
        throw std::runtime_error("ChainWorld: pick index out of range");
    Vec2 d{a.dx, a.dy};
    double m = norm(d);
    if (m > kMaxDisplacement) d = (kMaxDisplacement / m) * d;
    points_[pick] = clamp_arena(points_[pick] + d);
    follow_the_leader(pick);
    return false;
}

void ChainWorld::follow_the_leader(int pick) {
    for (int i = pick + 1; i < num_points(); ++i)
        points_[i] = place_neighbor(points_[i - 1], points_[i], seg_len_);
    for (int i = pick - 1; i >= 0; --i)
        points_[i] = place_neighbor(points_[i + 1], points_[i], seg_len_);
}

std::vector<float> ChainWorld::rasterize(const std::vector<Vec2>& pts) {
    std::vector<float> img(static_cast<size_t>(kRaster) * kRaster, 0.0f);
    double cell = kArena / kRaster;
    auto mark = [&](const Vec2& p) {
        int cx = std::clamp(static_cast<int>(p.x / cell), 0, kRaster - 1);
        int cy = std::clamp(static_cast<int>(p.y / cell), 0, kRaster - 1);
        img[static_cast<size_t>(cy) * kRaster + cx] = 1.0f;
    };
    for (size_t i = 0; i + 1 < pts.size(); ++i) {
        double len = norm(pts[i + 1] - pts[i]);
        int n = std::max(2, static_cast<int>(std::ceil(len / (cell * 0.25))) + 1);
        for (int s = 0; s < n; ++s) {
            double t = static_cast<double>(s) / (n - 1);
            mark(pts[i] + t * (pts[i + 1] - pts[i]));
        }
    }
    return img;
}

double registration_cost(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
    if (a.size() != b.size() || a.empty())
        throw std::runtime_error("registration_cost: point count mismatch");
    auto directional = [](const std::vector<Vec2>& from, const std::vector<Vec2>& to) {
        double acc = 0.0;
        for (const auto& p : from) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& q : to) best = std::min(best, norm(p - q));
            acc += best;
        }
        return acc / static_cast<double>(from.size());
    };
    return 0.5 * (directional(a, b) + directional(b, a));
}

namespace {

std::vector<Vec2> walk_shape(int k, double seg_len, double delta, bool s_shape) {
    std::vector<Vec2> pts(k);
    pts[0] = {0.0, 0.0};
    double theta = 0.0;
    for (int i = 1; i < k; ++i) {
        theta += (s_shape && i > (k - 1) / 2) ? -delta : delta;
        pts[i] = pts[i - 1] + seg_len * Vec2{std::cos(theta), std::sin(theta)};
    }
    // center in the arena
    double minx = 1e9, maxx = -1e9, miny = 1e9, maxy = -1e9;
    for (auto& p : pts) {
        minx = std::min(minx, p.x); maxx = std::max(maxx, p.x);
        miny = std::min(miny, p.y); maxy = std::max(maxy, p.y);
    }
    Vec2 shift{ChainWorld::kArena / 2 - (minx + maxx) / 2, ChainWorld::kArena / 2 - (miny + maxy) / 2};
    for (auto& p : pts) p = p + shift;
    return pts;
}

}  // namespace

std::vector<Vec2> chain_target_s_shape(int k, double seg_len) {
    return walk_shape(k, seg_len, 2.0 * M_PI / (k - 1), true);
}

std::vector<Vec2> chain_target_loop(int k, double seg_len) {
    return walk_shape(k, seg_len, 2.0 * M_PI / (k - 1), false);
}

nlohmann::json chain_points_to_json(const std::vector<Vec2>& pts) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& p : pts) j.push_back({p.x, p.y});
    return j;
}

std::vector<Vec2> chain_points_from_json(const nlohmann::json& j) {
    std::vector<Vec2> pts;
    for (const auto& e : j) pts.push_back({e.at(0).get<double>(), e.at(1).get<double>()});
    return pts;
}

}  // namespace gspkit
