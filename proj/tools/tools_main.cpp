#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include <CLI11.hpp>
#include <json.hpp>

#include "gspkit/explore.hpp"
#include "gspkit/imitate.hpp"
#include "gspkit/pipeline.hpp"
#include "gspkit/report.hpp"

using namespace gspkit;
using nlohmann::json;

namespace {

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

GridWorld load_or_make_map(const std::string& map_path, int rows, int cols, int textures,
                           uint64_t map_seed) {
    if (!map_path.empty()) {
        std::ifstream f(map_path);
        if (!f) throw ValidationError("cannot open map file " + map_path);
        return GridWorld::from_json(json::parse(f));
    }
    return GridWorld::generate(rows, cols, textures, map_seed);
}

void write_json(const json& j, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << j.dump() << "\n";
}

json read_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ValidationError("cannot open " + path);
    return json::parse(f);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"goal-conditioned skill policy toolkit"};
    app.require_subcommand(1);

    // shared grid map options
    struct MapOpts {
        std::string map_path;
        int rows = 13, cols = 13, textures = 8;
        uint64_t map_seed = 1;
        void attach(CLI::App* cmd) {
            cmd->add_option("--map", map_path, "grid map JSON (generated when absent)");
            cmd->add_option("--rows", rows);
            cmd->add_option("--cols", cols);
            cmd->add_option("--textures", textures);
            cmd->add_option("--map-seed", map_seed);
        }
    };

    // collect
    auto* collect = app.add_subcommand("collect", "run exploration and save a dataset");
    std::string c_env = "grid", c_policy = "random", c_out;
    int c_episodes = 50;
    uint64_t c_seed = 0;
    MapOpts c_map;
    std::string c_save_map;
    collect->add_option("--env", c_env)->check(CLI::IsMember({"grid", "chain"}));
    collect->add_option("--policy", c_policy)->check(CLI::IsMember({"random", "curiosity"}));
    collect->add_option("--episodes", c_episodes);
    collect->add_option("--seed", c_seed);
    collect->add_option("--out", c_out)->required();
    collect->add_option("--save-map", c_save_map, "also write the grid map JSON here");
    c_map.attach(collect);

    // train
    auto* train = app.add_subcommand("train", "train a skill policy on a dataset");
    std::string t_data, t_config, t_out, t_variant, t_space;
    uint64_t t_seed = 0;
    train->add_option("--data", t_data)->required();
    train->add_option("--config", t_config, "GspConfig JSON file");
    train->add_option("--variant", t_variant, "override variant");
    train->add_option("--dynamics-space", t_space)->check(CLI::IsMember({"", "feature", "observation"}));
    train->add_option("--seed", t_seed);
    train->add_option("--out", t_out)->required();

    // train-recognizer
    auto* trec = app.add_subcommand("train-recognizer", "train the goal recognizer");
    std::string r_data, r_out;
    uint64_t r_seed = 0;
    int r_pos = -1, r_neg = -1, r_pairs = 20;
    trec->add_option("--data", r_data)->required();
    trec->add_option("--r-pos", r_pos);
    trec->add_option("--r-neg", r_neg);
    trec->add_option("--pairs-per-episode", r_pairs);
    trec->add_option("--seed", r_seed);
    trec->add_option("--out", r_out)->required();

    // demo
    auto* demo = app.add_subcommand("demo", "generate an expert demonstration");
    std::string d_env = "grid", d_task = "maze", d_out;
    int d_k = 5, d_min = 15, d_max = 40;
    uint64_t d_seed = 0;
    bool d_strip = false;
    MapOpts d_map;
    demo->add_option("--env", d_env)->check(CLI::IsMember({"grid", "chain"}));
    demo->add_option("--task", d_task)->check(CLI::IsMember({"maze", "loop", "s_shape"}));
    demo->add_option("--k", d_k);
    demo->add_option("--min-steps", d_min);
    demo->add_option("--max-steps", d_max);
    demo->add_option("--seed", d_seed);
    demo->add_flag("--strip-oracle", d_strip, "omit the oracle section");
    demo->add_option("--out", d_out)->required();
    d_map.attach(demo);

    // imitate
    auto* imitate = app.add_subcommand("imitate", "follow a demonstration and report metrics");
    std::string i_model, i_rec, i_demo, i_report;
    int i_seeds = 50;
    uint64_t i_seed = 0;
    MapOpts i_map;
    imitate->add_option("--model", i_model)->required();
    imitate->add_option("--recognizer", i_rec)->required();
    imitate->add_option("--demo", i_demo)->required();
    imitate->add_option("--seeds", i_seeds);
    imitate->add_option("--seed", i_seed);
    imitate->add_option("--report", i_report)->required();
    i_map.attach(imitate);

    // report
    auto* report = app.add_subcommand("report", "emit CSV and SVG from an evaluation JSON");
    std::string p_in, p_csv, p_svg;
    report->add_option("--in", p_in)->required();
    report->add_option("--csv", p_csv);
    report->add_option("--svg", p_svg, "SVG file, or directory to place report.svg in");

    // pipeline
    auto* pipeline = app.add_subcommand("pipeline", "run the full experiment pipeline");
    std::string pl_config;
    pipeline->add_option("--config", pl_config)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*collect) {
            ExplorationDataset ds;
            if (c_env == "grid") {
                GridWorld world = load_or_make_map(c_map.map_path, c_map.rows, c_map.cols,
                                                   c_map.textures, c_map.map_seed);
                if (!c_save_map.empty()) write_json(world.to_json(), c_save_map);
                ds = c_policy == "random" ? random_explore_grid(world, c_episodes, c_seed)
                                          : curiosity_explore_grid(world, c_episodes, c_seed);
            } else {
                ChainWorld world;
                ds = c_policy == "random" ? random_explore_chain(world, c_episodes, c_seed)
                                          : curiosity_explore_chain(world, c_episodes, c_seed);
            }
            save_dataset(ds, c_out);
            std::cout << "wrote " << ds.size() << " transitions to " << c_out << "\n";
        } else if (*train) {
            GspConfig cfg;
            if (!t_config.empty()) cfg = GspConfig::from_json(read_json(t_config));
            if (!t_variant.empty()) cfg.variant = variant_from_name(t_variant);
            if (!t_space.empty())
                cfg.dynamics_space =
                    t_space == "feature" ? DynamicsSpace::Feature : DynamicsSpace::Observation;
            auto ds = load_dataset(t_data);
            ActionSpec aspec = ds.meta.env_type == "grid"
                                   ? ActionSpec{4, false}
                                   : ChainWorld().action_spec();
            TrainReport rep;
            auto model = train_gsp(cfg, ds, ds.meta.obs_dim, aspec, t_seed, &rep);
            save_gsp(model, t_out);
            for (const auto& ph : rep.phases)
                std::cout << ph.name << ": " << ph.steps << " steps, final loss " << ph.final_loss
                          << "\n";
        } else if (*trec) {
            auto ds = load_dataset(r_data);
            RecognizerConfig cfg;
            bool grid = ds.meta.env_type == "grid";
            cfg.r_pos = r_pos >= 0 ? r_pos : (grid ? 2 : 1);
            cfg.r_neg = r_neg >= 0 ? r_neg : (grid ? 6 : 4);
            auto pairs = make_labels(ds, r_pairs, cfg, mix_seed(r_seed, fnv1a("labels")));
            RecognizerReport rep;
            auto rec = train_recognizer(pairs, cfg, r_seed, &rep);
            save_recognizer(rec, r_out);
            std::cout << "holdout balanced accuracy " << rep.holdout_accuracy << ", tau " << rep.tau
                      << "\n";
        } else if (*demo) {
            Demonstration d;
            if (d_env == "grid") {
                if (d_task != "maze") throw ValidationError("grid env supports task 'maze' only");
                GridWorld world = load_or_make_map(d_map.map_path, d_map.rows, d_map.cols,
                                                   d_map.textures, d_map.map_seed);
                std::mt19937_64 rng(d_seed);
                auto poses = world.free_poses();
                int guard = 0;
                for (;;) {
                    if (++guard > 10000) throw std::runtime_error("demo: cannot place start/goal");
                    Pose a = poses[rng() % poses.size()];
                    Pose b = poses[rng() % poses.size()];
                    int dist = world.oracle_distance(a, b);
                    if (dist < d_min || dist > d_max) continue;
                    d = generate_demonstration_grid(world, a, b, d_k);
                    break;
                }
            } else {
                if (d_task == "maze") throw ValidationError("chain env supports 'loop' or 's_shape'");
                d = generate_demonstration_chain(ChainWorld(), d_task, d_k);
            }
            write_json(d.to_json(d_strip), d_out);
            std::cout << "wrote demonstration with " << d.landmarks.size() << " landmarks\n";
        } else if (*imitate) {
            auto model = load_gsp(i_model);
            auto rec = load_recognizer(i_rec);
            auto d = Demonstration::from_json(read_json(i_demo));
            EvalReport ev;
            if (d.env_type == "grid") {
                if (i_map.map_path.empty())
                    throw ValidationError("imitate on a grid demo needs --map");
                GridWorld world = load_or_make_map(i_map.map_path, 0, 0, 0, 0);
                if (d.oracle_poses.empty())
                    throw ValidationError("demo has no oracle section; cannot place the agent");
                for (int s = 0; s < i_seeds; ++s) {
                    FollowOptions fo;
                    fo.seed = stage_seed(i_seed, "imitate", s);
                    GridWorld env = world;
                    env.set_pose(d.oracle_poses.front());
                    ev.runs.push_back(follow_demonstration_grid(model, rec, env, d, fo));
                }
            } else {
                for (int s = 0; s < i_seeds; ++s) {
                    FollowOptions fo;
                    fo.seed = stage_seed(i_seed, "imitate", s);
                    ev.runs.push_back(follow_demonstration_chain(model, rec, ChainWorld(), d, fo));
                }
            }
            ev.aggregate();
            write_json(ev.to_json(), i_report);
            std::cout << "median completion " << ev.completion.median << " over " << ev.runs.size()
                      << " runs\n";
        } else if (*report) {
            auto table = ablation_from_json(read_json(p_in));
            if (!p_csv.empty()) write_ablation_csv(table, p_csv);
            if (!p_svg.empty()) {
                std::string path = p_svg;
                namespace fs = std::filesystem;
                if (path.back() == '/' || fs::is_directory(path)) {
                    fs::create_directories(path);
                    path = (fs::path(path) / "report.svg").string();
                }
                write_ablation_svg(table, path);
            }
        } else if (*pipeline) {
            ExperimentConfig cfg;
            try {
                cfg = ExperimentConfig::from_file(pl_config);
            } catch (const std::exception& e) {
                throw ValidationError(e.what());
            }
            auto manifest = run_pipeline(cfg);
            for (const auto& a : manifest.artifacts)
                std::cout << a.stage << ": " << a.path << (a.skipped ? " (cached)" : "") << "\n";
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
