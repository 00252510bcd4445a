#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gspkit/report.hpp"

using namespace gspkit;

namespace {

AblationTable synthetic_table() {
    AblationTable t;
    int i = 0;
    for (const char* src : {"curiosity", "random"})
        for (const char* var : {"full", "nofwd"})
            for (const char* tier : {"diff_map", "train"}) {
                AblationCell c;
                c.data_source = src;
                c.variant = var;
                c.tier = tier;
                Demonstration demo;
                demo.landmarks = {{}, {}};
                demo.expert_step_counts = {0, 5};
                for (int r = 0; r < 4; ++r) {
                    ImitationResult res;
                    bool ok = (r + i) % 3 != 0;
                    res.landmarks = {{true, 3, 0.0}, {ok, 4, ok ? 0.0 : 8.0}};
                    res.finalize(demo);
                    c.report.runs.push_back(res);
                }
                c.report.aggregate();
                t.cells.push_back(std::move(c));
                ++i;
            }
    return t;
}

}  // namespace

TEST_CASE("csv has one data row per cell with stable headers") {
    auto table = synthetic_table();
    auto csv = ablation_csv(table);
    std::istringstream in(csv);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    REQUIRE(lines.size() == table.cells.size() + 1);
    CHECK(lines[0].find("data_source") != std::string::npos);
    CHECK(lines[0].find("variant") != std::string::npos);
    CHECK(lines[0].find("tier") != std::string::npos);
    CHECK(lines[0].find("completion") != std::string::npos);
    for (size_t i = 0; i < table.cells.size(); ++i) {
        CHECK(lines[i + 1].find(table.cells[i].data_source) == 0);
        CHECK(lines[i + 1].find(table.cells[i].variant) != std::string::npos);
    }
    auto path = (std::filesystem::temp_directory_path() / "ablation.csv").string();
    write_ablation_csv(table, path);
    std::ifstream f(path);
    std::stringstream ss;
    ss << f.rdbuf();
    CHECK(ss.str() == csv);
    std::remove(path.c_str());
}

TEST_CASE("find locates cells and misses return null") {
    auto table = synthetic_table();
    auto* c = table.find("random", "full", "train");
    REQUIRE(c != nullptr);
    CHECK(c->data_source == "random");
    CHECK(c->variant == "full");
    CHECK(c->tier == "train");
    CHECK(table.find("random", "full", "mars") == nullptr);
}

TEST_CASE("json round trip preserves every aggregate") {
    auto table = synthetic_table();
    auto back = ablation_from_json(ablation_to_json(table));
    REQUIRE(back.cells.size() == table.cells.size());
    for (size_t i = 0; i < table.cells.size(); ++i) {
        const auto& a = table.cells[i];
        const auto& b = back.cells[i];
        CHECK(a.data_source == b.data_source);
        CHECK(a.variant == b.variant);
        CHECK(a.tier == b.tier);
        CHECK(a.report.completion.median == b.report.completion.median);
        CHECK(a.report.completion.ci_lo == b.report.completion.ci_lo);
        CHECK(a.report.completion.ci_hi == b.report.completion.ci_hi);
        CHECK(a.report.efficiency.median == b.report.efficiency.median);
        REQUIRE(a.report.runs.size() == b.report.runs.size());
        for (size_t r = 0; r < a.report.runs.size(); ++r) {
            CHECK(a.report.runs[r].completion == b.report.runs[r].completion);
            CHECK(a.report.runs[r].total_steps == b.report.runs[r].total_steps);
        }
    }
    // serialization is deterministic
    CHECK(ablation_to_json(table).dump() == ablation_to_json(back).dump());
}

TEST_CASE("svg output is well-formed xml with one bar per cell") {
    auto table = synthetic_table();
    auto svg = ablation_svg(table);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.rfind("</svg>") != std::string::npos);
    // tag balance check over the whole document
    size_t opens = 0, closes = 0, selfclosed = 0, pos = 0;
    while ((pos = svg.find('<', pos)) != std::string::npos) {
        size_t end = svg.find('>', pos);
        REQUIRE(end != std::string::npos);
        std::string tag = svg.substr(pos, end - pos + 1);
        if (tag[1] == '?') {
        } else if (tag[1] == '/')
            ++closes;
        else if (tag[end - pos - 1] == '/')
            ++selfclosed;
        else
            ++opens;
        pos = end + 1;
    }
    CHECK(opens == closes);
    size_t rects = 0;
    pos = 0;
    while ((pos = svg.find("<rect", pos)) != std::string::npos) {
        ++rects;
        pos += 5;
    }
    // one bar per cell
    CHECK(rects >= table.cells.size());
    auto path = (std::filesystem::temp_directory_path() / "ablation.svg").string();
    write_ablation_svg(table, path);
    CHECK(std::filesystem::file_size(path) > 100);
    std::remove(path.c_str());
}

TEST_CASE("ablation suite rejects an incomplete model cross") {
    auto world = GridWorld::generate(11, 11, 8, 2);
    GspConfig cfg;
    cfg.feature_dim = 8;
    cfg.hidden_dim = 12;
    auto m1 = GspModel::create(cfg, world.obs_dim(), world.action_spec(), 1);
    std::map<std::pair<std::string, std::string>, const GspModel*> models;
    models[{"random", "full"}] = &m1;
    models[{"curiosity", "nofwd"}] = &m1;  // missing (random, nofwd), (curiosity, full)
    std::map<std::string, const Recognizer*> recs;
    std::vector<std::pair<std::string, GridWorld>> tiers = {{"train", world}};
    try {
        run_ablation_suite(models, recs, tiers, 1, AblationEvalOptions{});
        FAIL("expected an exception");
    } catch (const std::exception& e) {
        std::string msg = e.what();
        CHECK(msg.find("random") != std::string::npos);
        CHECK(msg.find("nofwd") != std::string::npos);
    }
}
