#include "gspkit/grid_world.hpp"

#include <deque>
#include <random>
#include <stdexcept>

namespace gspkit {

std::pair<int, int> heading_delta(int heading) {
    switch (heading & 3) {
        case 0: return {-1, 0};  // N
        case 1: return {0, 1};   // E
        case 2: return {1, 0};   // S
        default: return {0, -1}; // W
    }
}

GridWorld::GridWorld(std::vector<std::string> layout, std::vector<std::vector<int>> textures,
                     int num_textures, uint64_t seed)
    : layout_(std::move(layout)), textures_(std::move(textures)),
      num_textures_(num_textures), seed_(seed) {
    if (layout_.empty()) throw std::runtime_error("GridWorld: empty layout");
    for (const auto& row : layout_)
        if (static_cast<int>(row.size()) != cols())
            throw std::runtime_error("GridWorld: ragged layout");
    auto cells = free_cells();
    if (cells.empty()) throw std::runtime_error("GridWorld: no free cells");
    pose_ = {cells[0].first, cells[0].second, 1};
}

bool GridWorld::is_wall(int r, int c) const {
    if (r < 0 || r >= rows() || c < 0 || c >= cols()) return true;
    return layout_[r][c] == '#';
}

void GridWorld::set_pose(const Pose& p) {
    if (is_wall(p.row, p.col)) throw std::runtime_error("GridWorld: pose on wall cell");
    pose_ = p;
    pose_.heading &= 3;
}

std::vector<std::pair<int, int>> GridWorld::free_cells() const {
    std::vector<std::pair<int, int>> out;
    for (int r = 0; r < rows(); ++r)
        for (int c = 0; c < cols(); ++c)
            if (!is_wall(r, c)) out.emplace_back(r, c);
    return out;
}

std::vector<Pose> GridWorld::free_poses() const {
    std::vector<Pose> out;
    for (auto [r, c] : free_cells())
        for (int h = 0; h < 4; ++h) out.push_back({r, c, h});
    return out;
}

bool GridWorld::step_action(int action) {
    switch (action) {
        case kNoOp:
            return false;
        case kForward: {
            auto [dr, dc] = heading_delta(pose_.heading);
            int nr = pose_.row + dr, nc = pose_.col + dc;
            if (is_wall(nr, nc)) return true;
            pose_.row = nr;
            pose_.col = nc;
            return false;
        }
        case kTurnLeft:
            pose_.heading = (pose_.heading + 3) & 3;
            return false;
        case kTurnRight:
            pose_.heading = (pose_.heading + 1) & 3;
            return false;
        default:
            throw std::runtime_error("GridWorld: invalid action " + std::to_string(action));
    }
}

std::vector<float> GridWorld::observe() const { return observe_at(pose_); }

std::vector<float> GridWorld::observe_at(const Pose& p) const {
    auto [fr, fc] = heading_delta(p.heading);
    auto [rr, rc] = heading_delta(p.heading + 1);  // agent's right
    std::vector<float> obs(static_cast<size_t>(obs_dim()), 0.0f);
    int half = kWindowW / 2;
    for (int d = 0; d < kWindowD; ++d) {
        for (int w = -half; w <= half; ++w) {
            int r = p.row + d * fr + w * rr;
            int c = p.col + d * fc + w * rc;
            size_t idx = (static_cast<size_t>(d) * kWindowW + (w + half)) * 2;
            if (r < 0 || r >= rows() || c < 0 || c >= cols()) {
                obs[idx] = 1.0f;        // out of map: occupied, texture 0
            } else if (is_wall(r, c)) {
                obs[idx] = 1.0f;
                obs[idx + 1] = static_cast<float>(textures_[r][c] + 1) / num_textures_;
            }
        }
    }
    return obs;
}

int GridWorld::oracle_distance(const Pose& a, const Pose& b) const {
    if (a == b) return 0;
    auto key = [this](const Pose& p) { return (p.row * cols() + p.col) * 4 + (p.heading & 3); };
    std::vector<int> dist(static_cast<size_t>(rows()) * cols() * 4, -1);
    std::deque<Pose> q;
    dist[key(a)] = 0;
    q.push_back(a);
    while (!q.empty()) {
        Pose cur = q.front();
        q.pop_front();
        int d = dist[key(cur)];
        Pose nexts[3];
        int n = 0;
        auto [dr, dc] = heading_delta(cur.heading);
        if (!is_wall(cur.row + dr, cur.col + dc))
            nexts[n++] = {cur.row + dr, cur.col + dc, cur.heading};
        nexts[n++] = {cur.row, cur.col, (cur.heading + 3) & 3};
        nexts[n++] = {cur.row, cur.col, (cur.heading + 1) & 3};
        for (int i = 0; i < n; ++i) {
            if (dist[key(nexts[i])] != -1) continue;
            dist[key(nexts[i])] = d + 1;
            if (nexts[i] == b) return d + 1;
            q.push_back(nexts[i]);
        }
    }
    return -1;
}

bool GridWorld::all_free_cells_connected() const {
    auto cells = free_cells();
    if (cells.empty()) return false;
    std::vector<std::vector<bool>> seen(rows(), std::vector<bool>(cols(), false));
    std::deque<std::pair<int, int>> q;
    q.push_back(cells[0]);
    seen[cells[0].first][cells[0].second] = true;
    size_t count = 0;
    while (!q.empty()) {
        auto [r, c] = q.front();
        q.pop_front();
        ++count;
        const int dr[] = {-1, 1, 0, 0}, dc[] = {0, 0, -1, 1};
        for (int i = 0; i < 4; ++i)
            if (!is_wall(r + dr[i], c + dc[i]) && !seen[r + dr[i]][c + dc[i]]) {
                seen[r + dr[i]][c + dc[i]] = true;
                q.emplace_back(r + dr[i], c + dc[i]);
            }
    }
    return count == cells.size();
}

namespace {

// Recursive division: walls on even indices, passages on odd indices.
void divide(std::vector<std::string>& g, int r0, int c0, int r1, int c1, std::mt19937_64& rng) {
    int h = r1 - r0 + 1, w = c1 - c0 + 1;
    if (h < 3 && w < 3) return;
    bool horizontal;
    if (h < 3) horizontal = false;
    else if (w < 3) horizontal = true;
    else horizontal = (h > w) || (h == w && (rng() & 1));
    if (horizontal) {
        std::vector<int> walls;
        for (int r = r0 + 1; r < r1; ++r)
            if (r % 2 == 0) walls.push_back(r);
        if (walls.empty()) return;
        int wr = walls[rng() % walls.size()];
        std::vector<int> holes;
        for (int c = c0; c <= c1; ++c)
            if (c % 2 == 1) holes.push_back(c);
        int hc = holes[rng() % holes.size()];
        for (int c = c0; c <= c1; ++c)
            if (c != hc) g[wr][c] = '#';
        divide(g, r0, c0, wr - 1, c1, rng);
        divide(g, wr + 1, c0, r1, c1, rng);
    } else {
        std::vector<int> walls;
        for (int c = c0 + 1; c < c1; ++c)
            if (c % 2 == 0) walls.push_back(c);
        if (walls.empty()) return;
        int wc = walls[rng() % walls.size()];
        std::vector<int> holes;
        for (int r = r0; r <= r1; ++r)
            if (r % 2 == 1) holes.push_back(r);
        int hr = holes[rng() % holes.size()];
        for (int r = r0; r <= r1; ++r)
            if (r != hr) g[r][wc] = '#';
        divide(g, r0, c0, r1, wc - 1, rng);
        divide(g, r0, wc + 1, r1, c1, rng);
    }
}

std::vector<std::vector<int>> sample_textures(const std::vector<std::string>& layout,
                                              int num_textures, std::mt19937_64& rng) {
    std::vector<std::vector<int>> tex(layout.size(), std::vector<int>(layout[0].size(), 0));
    for (size_t r = 0; r < layout.size(); ++r)
        for (size_t c = 0; c < layout[0].size(); ++c)
            if (layout[r][c] == '#') tex[r][c] = static_cast<int>(rng() % num_textures);
    return tex;
}

}  // namespace

GridWorld GridWorld::generate(int rows, int cols, int num_textures, uint64_t seed) {
    if (rows < 5 || cols < 5) throw std::runtime_error("GridWorld::generate: map too small");
    std::mt19937_64 rng(seed);
    for (int attempt = 0; attempt < 100; ++attempt) {
        std::vector<std::string> g(rows, std::string(cols, '.'));
        for (int r = 0; r < rows; ++r) g[r][0] = g[r][cols - 1] = '#';
        for (int c = 0; c < cols; ++c) g[0][c] = g[rows - 1][c] = '#';
        divide(g, 1, 1, rows - 2, cols - 2, rng);
        auto tex = sample_textures(g, num_textures, rng);
        GridWorld world(std::move(g), std::move(tex), num_textures, seed);
        if (world.all_free_cells_connected()) return world;
    }
    throw std::runtime_error("GridWorld::generate: no solvable layout after 100 attempts");
}

nlohmann::json GridWorld::to_json() const {
    return {{"layout", layout_}, {"textures", textures_},
            {"num_textures", num_textures_}, {"seed", seed_}};
}

GridWorld GridWorld::from_json(const nlohmann::json& j) {
    return GridWorld(j.at("layout").get<std::vector<std::string>>(),
                     j.at("textures").get<std::vector<std::vector<int>>>(),
                     j.value("num_textures", 8), j.value("seed", uint64_t(0)));
}

MapSet make_maps(int rows, int cols, int num_textures, uint64_t seed) {
    MapSet ms;
    ms.train = GridWorld::generate(rows, cols, num_textures, seed);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);

    // same layout, resampled textures: require >=50% of wall cells to differ
    for (int attempt = 0;; ++attempt) {
        if (attempt >= 100) throw std::runtime_error("make_maps: texture resample failed");
        auto tex = [&] {
            std::vector<std::vector<int>> t(rows, std::vector<int>(cols, 0));
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < cols; ++c)
                    if (ms.train.layout()[r][c] == '#') t[r][c] = static_cast<int>(rng() % num_textures);
            return t;
        }();
        int walls = 0, differ = 0;
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
                if (ms.train.layout()[r][c] == '#') {
                    ++walls;
                    if (tex[r][c] != ms.train.textures()[r][c]) ++differ;
                }
        if (differ * 2 >= walls) {
            ms.same_map_diff_texture = GridWorld(ms.train.layout(), std::move(tex),
                                                 num_textures, seed + 1);
            break;
        }
    }

    // fresh layout: require >=20% of cells to differ from the training layout
    for (int attempt = 0;; ++attempt) {
        if (attempt >= 100) throw std::runtime_error("make_maps: fresh layout failed");
        GridWorld cand = GridWorld::generate(rows, cols, num_textures, seed + 1000 + attempt);
        int differ = 0;
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
                if (cand.layout()[r][c] != ms.train.layout()[r][c]) ++differ;
        if (differ * 5 >= rows * cols) {
            ms.diff_map_diff_texture = std::move(cand);
            break;
        }
    }
    return ms;
}

}  // namespace gspkit
