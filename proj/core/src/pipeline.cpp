#include "gspkit/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "gspkit/explore.hpp"
#include "gspkit/report.hpp"
#include "gspkit/rng.hpp"

namespace gspkit {

namespace fs = std::filesystem;
using nlohmann::json;

static const char* kToolVersion = "gspkit 0.1.0";

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot open " + path);
    return from_json(json::parse(f));
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    // validate before any stage can run
    std::string env_type = j.at("env").at("type").get<std::string>();
    if (env_type != "grid" && env_type != "chain")
        throw std::runtime_error("config: unknown env type '" + env_type + "'");
    std::string policy = j.at("exploration").at("policy").get<std::string>();
    if (policy != "random" && policy != "curiosity")
        throw std::runtime_error("config: unknown exploration policy '" + policy + "'");
    GspConfig::from_json(j.at("gsp"));  // throws on unknown variant / space
    if (!j.contains("out_dir")) throw std::runtime_error("config: missing out_dir");
    ExperimentConfig c;
    c.raw = j;
    return c;
}

std::string ExperimentConfig::out_dir() const {
    if (const char* env = std::getenv("GSPKIT_OUT_DIR"); env && *env) return env;
    return raw.at("out_dir").get<std::string>();
}

json RunManifest::to_json() const {
    json arts = json::array();
    for (const auto& a : artifacts)
        arts.push_back({{"stage", a.stage}, {"path", a.path}, {"content_hash", a.content_hash},
                        {"stage_hash", a.stage_hash}, {"skipped", a.skipped}});
    return {{"config_hash", config_hash}, {"tool_version", tool_version},
            {"started_at", started_at}, {"finished_at", finished_at}, {"artifacts", arts}};
}

RunManifest RunManifest::from_json(const json& j) {
    RunManifest m;
    m.config_hash = j.at("config_hash").get<uint64_t>();
    m.tool_version = j.value("tool_version", "");
    m.started_at = j.value("started_at", "");
    m.finished_at = j.value("finished_at", "");
    for (const auto& a : j.at("artifacts")) {
        ManifestEntry e;
        e.stage = a.at("stage").get<std::string>();
        e.path = a.at("path").get<std::string>();
        e.content_hash = a.at("content_hash").get<uint64_t>();
        e.stage_hash = a.at("stage_hash").get<uint64_t>();
        e.skipped = a.value("skipped", false);
        m.artifacts.push_back(std::move(e));
    }
    return m;
}

uint64_t file_content_hash(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("file_content_hash: cannot open " + path);
    uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (f.read(buf, sizeof(buf)) || f.gcount() > 0)
        h = fnv1a(buf, static_cast<size_t>(f.gcount()), h);
    return h;
}

namespace {

std::string timestamp() {
    auto now = std::chrono::system_clock::now();
    auto t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

struct LockFile {
    std::string path;
    int fd = -1;
    explicit LockFile(const std::string& p) : path(p) {
        fd = ::open(p.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0)
            throw std::runtime_error("pipeline: output directory is locked (" + p + " exists)");
    }
    ~LockFile() {
        if (fd >= 0) {
            ::close(fd);
            ::unlink(path.c_str());
        }
    }
};

struct StageRunner {
    const RunManifest* previous;
    RunManifest* manifest;
    std::string out_dir;

    // returns the content hash of the stage's artifact
    template <class Fn>
    uint64_t stage(const std::string& name, const std::string& filename, uint64_t stage_hash, Fn fn) {
        std::string path = out_dir + "/" + filename;
        bool skip = false;
        if (previous && fs::exists(path)) {
            for (const auto& e : previous->artifacts)
                if (e.stage == name && e.stage_hash == stage_hash &&
                    e.content_hash == file_content_hash(path)) {
                    skip = true;
                    break;
                }
        }
        if (!skip) {
            try {
                fn(path);
            } catch (const std::exception& e) {
                throw std::runtime_error("pipeline stage '" + name + "' failed: " + e.what());
            }
        }
        ManifestEntry e;
        e.stage = name;
        e.path = path;
        e.stage_hash = stage_hash;
        e.content_hash = file_content_hash(path);
        e.skipped = skip;
        manifest->artifacts.push_back(e);
        return e.content_hash;
    }
};

uint64_t json_hash(const json& j) { return fnv1a(j.dump()); }

}  // namespace

RunManifest run_pipeline(const ExperimentConfig& config) {
    const json& cfg = config.raw;
    std::string out = config.out_dir();
    fs::create_directories(out);
    LockFile lock(out + "/.lock");

    RunManifest manifest;
    manifest.config_hash = json_hash(cfg);
    manifest.tool_version = kToolVersion;
    manifest.started_at = timestamp();

    RunManifest prev;
    const RunManifest* prev_ptr = nullptr;
    if (fs::exists(out + "/manifest.json")) {
        std::ifstream f(out + "/manifest.json");
        prev = RunManifest::from_json(json::parse(f));
        prev_ptr = &prev;  // stage hashes gate reuse, so a changed config reruns stages
    }
    StageRunner runner{prev_ptr, &manifest, out};

    uint64_t seed = config.master_seed();
    std::string env_type = cfg.at("env").at("type").get<std::string>();
    std::string policy = cfg.at("exploration").at("policy").get<std::string>();
    int episodes = cfg.at("exploration").value("episodes", 50);
    GspConfig gsp_cfg = GspConfig::from_json(cfg.at("gsp"));

    // environment construction is deterministic in the config
    MapSet maps;
    ChainWorld chain;
    if (env_type == "grid") {
        const auto& e = cfg.at("env");
        maps = make_maps(e.value("rows", 13), e.value("cols", 13), e.value("textures", 8),
                         e.value("map_seed", uint64_t(1)));
    }

    // 1. collect
    uint64_t h_collect = runner.stage(
        "collect", "dataset.jsonl",
        json_hash({{"env", cfg.at("env")}, {"exploration", cfg.at("exploration")}, {"seed", seed}}),
        [&](const std::string& path) {
            uint64_t s = stage_seed(seed, "collect");
            ExplorationDataset ds;
            if (env_type == "grid")
                ds = policy == "random" ? random_explore_grid(maps.train, episodes, s)
                                        : curiosity_explore_grid(maps.train, episodes, s);
            else
                ds = policy == "random" ? random_explore_chain(chain, episodes, s)
                                        : curiosity_explore_chain(chain, episodes, s);
            save_dataset(ds, path);
        });

    // 2. train
    uint64_t h_train = runner.stage(
        "train", "model.json", json_hash({{"gsp", cfg.at("gsp")}, {"data", h_collect}, {"seed", seed}}),
        [&](const std::string& path) {
            auto ds = load_dataset(out + "/dataset.jsonl");
            ActionSpec aspec = env_type == "grid" ? ActionSpec{4, false}
                                                  : chain.action_spec();
            auto model = train_gsp(gsp_cfg, ds, ds.meta.obs_dim, aspec, stage_seed(seed, "train"));
            save_gsp(model, path);
        });

    // 3. train-recognizer
    json rec_cfg_json = cfg.value("recognizer", json::object());
    RecognizerConfig rec_cfg;
    rec_cfg.r_pos = rec_cfg_json.value("r_pos", env_type == "grid" ? 2 : 1);
    rec_cfg.r_neg = rec_cfg_json.value("r_neg", env_type == "grid" ? 6 : 4);
    rec_cfg.steps = rec_cfg_json.value("steps", 2000);
    uint64_t h_rec = runner.stage(
        "train-recognizer", "recognizer.json",
        json_hash({{"recognizer", rec_cfg_json}, {"data", h_collect}, {"seed", seed}}),
        [&](const std::string& path) {
            auto ds = load_dataset(out + "/dataset.jsonl");
            auto pairs = make_labels(ds, rec_cfg_json.value("pairs_per_episode", 20), rec_cfg,
                                     stage_seed(seed, "labels"));
            auto rec = train_recognizer(pairs, rec_cfg, stage_seed(seed, "recognizer"));
            save_recognizer(rec, path);
        });

    // 4. demo
    json eval_cfg = cfg.value("evaluation", json::object());
    int k = eval_cfg.value("k", 5);
    uint64_t h_demo = runner.stage(
        "demo", "demos.json",
        json_hash({{"env", cfg.at("env")}, {"evaluation", eval_cfg}, {"seed", seed}}),
        [&](const std::string& path) {
            json demos = json::array();
            uint64_t s = stage_seed(seed, "demo");
            if (env_type == "grid") {
                AblationEvalOptions opt;
                opt.k = k;
                opt.demos_per_tier = eval_cfg.value("demos", 3);
                std::mt19937_64 rng(s);
                auto poses = maps.train.free_poses();
                int placed = 0, guard = 0;
                while (placed < opt.demos_per_tier && guard++ < 10000) {
                    Pose a = poses[rng() % poses.size()];
                    Pose b = poses[rng() % poses.size()];
                    int d = maps.train.oracle_distance(a, b);
                    if (d < opt.min_demo_steps || d > opt.max_demo_steps) continue;
                    demos.push_back(generate_demonstration_grid(maps.train, a, b, k).to_json());
                    ++placed;
                }
            } else {
                std::string task = eval_cfg.value("task", "s_shape");
                demos.push_back(generate_demonstration_chain(chain, task, k).to_json());
            }
            std::ofstream f(path);
            f << demos.dump() << "\n";
        });

    // 5. imitate
    uint64_t h_eval = runner.stage(
        "imitate", "eval.json",
        json_hash({{"model", h_train}, {"recognizer", h_rec}, {"demos", h_demo},
                   {"evaluation", eval_cfg}, {"seed", seed}}),
        [&](const std::string& path) {
            auto model = load_gsp(out + "/model.json");
            auto rec = load_recognizer(out + "/recognizer.json");
            std::ifstream df(out + "/demos.json");
            json demos_json = json::parse(df);
            int seeds = eval_cfg.value("seeds", 10);
            AblationTable table;
            std::string source = policy, variant = variant_name(gsp_cfg.variant);
            auto eval_world = [&](const std::string& tier, const GridWorld& world) {
                AblationCell cell{source, variant, tier, {}};
                for (size_t di = 0; di < demos_json.size(); ++di) {
                    auto demo = Demonstration::from_json(demos_json[di]);
                    for (int si = 0; si < seeds; ++si) {
                        FollowOptions fo;
                        fo.seed = stage_seed(seed, "imitate", di * 1000 + si);
                        GridWorld env = world;
                        env.set_pose(demo.oracle_poses.front());
                        cell.report.runs.push_back(follow_demonstration_grid(model, rec, env, demo, fo));
                    }
                }
                cell.report.aggregate();
                cell.report.config_echo = {{"source", source}, {"variant", variant}, {"tier", tier}};
                table.cells.push_back(std::move(cell));
            };
            if (env_type == "grid") {
                std::vector<std::string> tiers =
                    eval_cfg.value("tiers", std::vector<std::string>{"same-same", "same-diff", "diff-diff"});
                for (const auto& t : tiers) {
                    if (t == "same-same") eval_world(t, maps.train);
                    else if (t == "same-diff") eval_world(t, maps.same_map_diff_texture);
                    else if (t == "diff-diff") eval_world(t, maps.diff_map_diff_texture);
                    else throw std::runtime_error("unknown tier '" + t + "'");
                }
            } else {
                AblationCell cell{source, variant, "chain", {}};
                int seeds2 = eval_cfg.value("seeds", 10);
                for (size_t di = 0; di < demos_json.size(); ++di) {
                    auto demo = Demonstration::from_json(demos_json[di]);
                    for (int si = 0; si < seeds2; ++si) {
                        FollowOptions fo;
                        fo.seed = stage_seed(seed, "imitate", di * 1000 + si);
                        cell.report.runs.push_back(
                            follow_demonstration_chain(model, rec, chain, demo, fo));
                    }
                }
                cell.report.aggregate();
                cell.report.config_echo = {{"source", source}, {"variant", variant}, {"tier", "chain"}};
                table.cells.push_back(std::move(cell));
            }
            std::ofstream f(path);
            f << ablation_to_json(table).dump() << "\n";
        });

    // 6. report
    runner.stage("report", "report.csv", json_hash({{"eval", h_eval}}), [&](const std::string& path) {
        std::ifstream f(out + "/eval.json");
        auto table = ablation_from_json(json::parse(f));
        write_ablation_csv(table, path);
        write_ablation_svg(table, out + "/report.svg");
    });

    manifest.finished_at = timestamp();
    std::ofstream mf(out + "/manifest.json");
    mf << manifest.to_json().dump(2) << "\n";
    return manifest;
}

}  // namespace gspkit
