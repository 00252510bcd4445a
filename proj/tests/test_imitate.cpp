#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "gspkit/imitate.hpp"

using namespace gspkit;

namespace {

// recognizer that fires exactly on identical observations: trained on
// (o, o) positives vs (o, o') negatives from real world observations
Recognizer identity_recognizer(const GridWorld& world) {
    auto poses = world.free_poses();
    std::mt19937_64 rng(3);
    std::vector<LabeledGoalPair> pairs;
    for (int i = 0; i < 400; ++i) {
        Pose a = poses[rng() % poses.size()];
        Pose b = poses[rng() % poses.size()];
        LabeledGoalPair p;
        p.positive = (i % 2 == 0);
        p.goal_obs = world.observe_at(a);
        p.obs = p.positive ? p.goal_obs : world.observe_at(b);
        if (!p.positive && p.obs == p.goal_obs) {
            --i;
            continue;
        }
        p.temporal_gap = p.positive ? 0 : 10;
        pairs.push_back(std::move(p));
    }
    RecognizerConfig cfg;
    cfg.hidden_dim = 32;
    cfg.steps = 400;
    return train_recognizer(pairs, cfg, 5);
}

GspModel tiny_model(const GridWorld& world) {
    GspConfig cfg;
    cfg.feature_dim = 8;
    cfg.hidden_dim = 12;
    return GspModel::create(cfg, world.obs_dim(), world.action_spec(), 2);
}

}  // namespace

TEST_CASE("expert demonstrations reach the goal and subsample correctly") {
    auto world = GridWorld::generate(13, 13, 8, 4);
    auto poses = world.free_poses();
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 10; ++trial) {
        Pose start = poses[rng() % poses.size()];
        Pose goal = poses[rng() % poses.size()];
        int k = 1 + static_cast<int>(rng() % 5);
        auto demo = generate_demonstration_grid(world, start, goal, k);
        CHECK(demo.env_type == "grid");
        CHECK(demo.k == k);
        REQUIRE_FALSE(demo.landmarks.empty());
        REQUIRE(demo.landmarks.size() == demo.oracle_poses.size());
        REQUIRE(demo.landmarks.size() == demo.expert_step_counts.size());
        // first and last landmarks are the start and the goal
        CHECK(demo.oracle_poses.front() == start);
        CHECK(demo.oracle_poses.back() == goal);
        CHECK(demo.expert_step_counts.front() == 0);
        // the expert path is a shortest path
        CHECK(demo.expert_step_counts.back() == world.oracle_distance(start, goal));
        // landmark observations match their oracle poses
        for (size_t i = 0; i < demo.landmarks.size(); ++i) {
            CHECK(demo.landmarks[i] == world.observe_at(demo.oracle_poses[i]));
            if (i > 0) CHECK(demo.expert_step_counts[i] > demo.expert_step_counts[i - 1]);
            if (i + 1 < demo.landmarks.size())
                CHECK(demo.expert_step_counts[i] == static_cast<int>(i) * k);
        }
    }
}

TEST_CASE("chain expert drives the chain toward the target shape") {
    ChainWorld world;
    for (const char* task : {"s_shape", "loop"}) {
        auto demo = generate_demonstration_chain(world, task, 5);
        REQUIRE(demo.landmarks.size() >= 2);
        REQUIRE(demo.oracle_chains.size() == demo.landmarks.size());
        auto target = std::string(task) == "s_shape"
                          ? chain_target_s_shape(world.num_points(), world.segment_length())
                          : chain_target_loop(world.num_points(), world.segment_length());
        double first = registration_cost(demo.oracle_chains.front(), target);
        double last = registration_cost(demo.oracle_chains.back(), target);
        CHECK(last < 0.5 * first);
        CHECK(last < 0.1);
    }
    CHECK_THROWS(generate_demonstration_chain(world, "spiral", 5));
}

TEST_CASE("single-landmark self-demonstration completes with zero steps") {
    auto world = GridWorld::generate(11, 11, 8, 6);
    auto rec = identity_recognizer(world);
    auto model = tiny_model(world);
    auto poses = world.free_poses();
    GridWorld env = world;
    env.set_pose(poses[4]);
    Demonstration demo;
    demo.env_type = "grid";
    demo.k = 1;
    demo.landmarks = {env.observe()};
    demo.oracle_poses = {env.pose()};
    demo.expert_step_counts = {0};
    auto res = follow_demonstration_grid(model, rec, env, demo, FollowOptions{});
    CHECK(res.completion == 1.0);
    CHECK(res.total_steps == 0);
    CHECK(res.farthest_contiguous == 1);
    REQUIRE(res.efficiency.has_value());
    CHECK(*res.efficiency == 1.0);
}

TEST_CASE("finalize computes contiguous completion and capped efficiency") {
    Demonstration demo;
    demo.landmarks = {{}, {}, {}};
    demo.expert_step_counts = {0, 4, 8};
    ImitationResult r;
    r.landmarks = {{true, 2, 0.0}, {true, 10, 1.0}, {false, 5, 9.0}};
    r.finalize(demo);
    CHECK(r.farthest_contiguous == 2);
    CHECK(r.completion == doctest::Approx(2.0 / 3.0));
    REQUIRE(r.efficiency.has_value());
    CHECK(*r.efficiency == doctest::Approx(4.0 / 12.0));

    // a hole in the middle stops the contiguous count
    r.landmarks = {{true, 2, 0.0}, {false, 10, 9.0}, {true, 5, 0.0}};
    r.finalize(demo);
    CHECK(r.farthest_contiguous == 1);
    CHECK(r.completion == doctest::Approx(1.0 / 3.0));
    // expert took 0 steps to landmark 0, agent took 2: capped ratio
    CHECK(*r.efficiency == 0.0);

    // nothing reached: efficiency undefined
    r.landmarks = {{false, 3, 9.0}, {false, 0, 9.0}, {false, 0, 9.0}};
    r.finalize(demo);
    CHECK(r.completion == 0.0);
    CHECK_FALSE(r.efficiency.has_value());

    // efficiency is capped at 1 when the agent beats the expert count
    r.landmarks = {{true, 0, 0.0}, {true, 1, 0.0}, {true, 1, 0.0}};
    r.finalize(demo);
    CHECK(r.completion == 1.0);
    CHECK(*r.efficiency == 1.0);
}

TEST_CASE("median summary matches order-statistic confidence bounds") {
    auto s = summarize_median({2.0});
    CHECK(s.median == 2.0);
    CHECK(s.ci_lo == 2.0);
    CHECK(s.ci_hi == 2.0);
    CHECK(s.n == 1);

    s = summarize_median({3.0, 1.0, 2.0});
    CHECK(s.median == 2.0);
    CHECK(s.ci_lo == 1.0);
    CHECK(s.ci_hi == 3.0);

    s = summarize_median({4.0, 1.0, 3.0, 2.0});
    CHECK(s.median == 2.5);

    // for larger n the CI excludes the extremes
    std::vector<double> v;
    for (int i = 1; i <= 25; ++i) v.push_back(i);
    s = summarize_median(v);
    CHECK(s.median == 13.0);
    CHECK(s.ci_lo > 1.0);
    CHECK(s.ci_hi < 25.0);
    CHECK(s.ci_lo <= s.median);
    CHECK(s.ci_hi >= s.median);

    s = summarize_median({});
    CHECK(s.n == 0);
}

TEST_CASE("demonstration json round trips and the oracle section strips") {
    auto world = GridWorld::generate(11, 11, 8, 7);
    auto poses = world.free_poses();
    auto demo = generate_demonstration_grid(world, poses[0], poses[poses.size() / 2], 3);
    auto rt = Demonstration::from_json(demo.to_json());
    CHECK(rt.env_type == demo.env_type);
    CHECK(rt.k == demo.k);
    CHECK(rt.landmarks == demo.landmarks);
    CHECK(rt.expert_step_counts == demo.expert_step_counts);
    REQUIRE(rt.oracle_poses.size() == demo.oracle_poses.size());
    for (size_t i = 0; i < rt.oracle_poses.size(); ++i)
        CHECK(rt.oracle_poses[i] == demo.oracle_poses[i]);

    auto stripped = Demonstration::from_json(demo.to_json(true));
    CHECK(stripped.landmarks == demo.landmarks);
    CHECK(stripped.oracle_poses.empty());

    ChainWorld cw;
    auto cdemo = generate_demonstration_chain(cw, "loop", 4);
    auto crt = Demonstration::from_json(cdemo.to_json());
    REQUIRE(crt.oracle_chains.size() == cdemo.oracle_chains.size());
    for (size_t i = 0; i < crt.oracle_chains.size(); ++i)
        for (size_t p = 0; p < crt.oracle_chains[i].size(); ++p) {
            CHECK(crt.oracle_chains[i][p].x == cdemo.oracle_chains[i][p].x);
            CHECK(crt.oracle_chains[i][p].y == cdemo.oracle_chains[i][p].y);
        }
}

TEST_CASE("policy runner is deterministic and emits valid actions") {
    auto world = GridWorld::generate(11, 11, 8, 9);
    auto model = tiny_model(world);
    GridWorld env = world;
    auto goal = world.observe_at(world.free_poses().back());
    std::mt19937_64 r1(4), r2(4);
    PolicyRunner a(model), b(model);
    for (int i = 0; i < 30; ++i) {
        auto ea = a.act(env.observe(), goal, r1, true);
        auto eb = b.act(env.observe(), goal, r2, true);
        CHECK(ea.index == eb.index);
        CHECK(ea.index >= 0);
        CHECK(ea.index < 4);
        env.step_action(ea.index);
    }
    // reset clears the recurrent state: a reset runner matches a fresh one
    a.reset();
    PolicyRunner c(model);
    std::mt19937_64 r3(9), r4(9);
    GridWorld env2 = world;
    CHECK(a.act(env2.observe(), goal, r3, true).index ==
          c.act(env2.observe(), goal, r4, true).index);
}

TEST_CASE("goal finding eval runs both policies deterministically") {
    auto world = GridWorld::generate(13, 13, 8, 11);
    auto rec = identity_recognizer(world);
    auto model = tiny_model(world);
    GoalFindingOptions opt;
    opt.min_oracle_steps = 5;
    opt.max_oracle_steps = 12;
    opt.step_budget = 30;
    auto res = goal_finding_eval(&model, &rec, world, 10, 3, opt);
    CHECK(res.episodes == 10);
    CHECK(res.successes >= 0);
    CHECK(res.successes <= 10);
    CHECK(res.steps_on_success.size() == static_cast<size_t>(res.successes));
    auto res2 = goal_finding_eval(&model, &rec, world, 10, 3, opt);
    CHECK(res2.successes == res.successes);

    GoalFindingOptions ro = opt;
    ro.random_policy = true;
    auto rnd = goal_finding_eval(nullptr, &rec, world, 10, 3, ro);
    CHECK(rnd.episodes == 10);
    CHECK(rnd.success_rate() >= 0.0);
    CHECK(rnd.success_rate() <= 1.0);
}

TEST_CASE("eval report aggregates completion and efficiency medians") {
    Demonstration demo;
    demo.landmarks = {{}, {}};
    demo.expert_step_counts = {0, 5};
    EvalReport rep;
    for (int i = 0; i < 5; ++i) {
        ImitationResult r;
        bool second = i < 3;
        r.landmarks = {{true, 5, 0.0}, {second, 5, second ? 0.0 : 9.0}};
        r.finalize(demo);
        rep.runs.push_back(r);
    }
    rep.aggregate();
    CHECK(rep.completion.n == 5);
    CHECK(rep.completion.median == 1.0);
    CHECK(rep.efficiency.n == 5);
    auto j = rep.to_json();
    CHECK(j.contains("completion"));
    CHECK(j.contains("efficiency"));
    CHECK(j.contains("runs"));
}
