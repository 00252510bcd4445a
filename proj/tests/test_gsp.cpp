#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "fd_check.hpp"
#include "gspkit/explore.hpp"
#include "gspkit/gsp.hpp"

using namespace gspkit;
using namespace gspkit::testutil;

namespace {

GspConfig tiny_cfg(GspVariant v, DynamicsSpace space = DynamicsSpace::Feature) {
    GspConfig cfg;
    cfg.variant = v;
    cfg.dynamics_space = space;
    cfg.feature_dim = 8;
    cfg.hidden_dim = 12;
    return cfg;
}

std::vector<GoalSegment> random_segments(int batch, int length, int obs_dim,
                                         const ActionSpec& aspec, std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<GoalSegment> segs(batch);
    for (auto& s : segs) {
        for (int t = 0; t <= length; ++t) {
            std::vector<float> o(obs_dim);
            for (auto& v : o) v = static_cast<float>(nd(rng));
            s.obs.push_back(std::move(o));
        }
        for (int t = 0; t < length; ++t) {
            EnvAction a;
            a.index = static_cast<int>(rng() % aspec.num_discrete);
            if (aspec.has_displacement) {
                a.dx = nd(rng);
                a.dy = nd(rng);
            }
            s.actions.push_back(a);
        }
    }
    return segs;
}

// central differences over every parameter of a double-precision model
double fd_max_rel_err(GspVariant v, DynamicsSpace space, const ActionSpec& aspec, uint64_t seed) {
    const int obs_dim = 6, length = 5, batch = 2;
    auto model = GspModelT<double>::create(tiny_cfg(v, space), obs_dim, aspec, seed);
    std::mt19937_64 rng(seed * 31 + 7);
    auto segs = random_segments(batch, length, obs_dim, aspec, rng);
    // the forward-fit target detaches phi(x_{t+1}), so finite differences over
    // encoder parameters see that path while the analytic gradient does not;
    // the encoder is validated separately with frozen targets
    bool skip_encoder = uses_forward_fit(v) && space == DynamicsSpace::Feature;
    std::vector<DTensor> params;
    for (auto& [name, t] : skip_encoder ? model.params_forward() : model.params_all())
        params.push_back(t);
    if (skip_encoder)
        for (auto& [name, t] : model.params_policy()) params.push_back(t);
    auto res = fd_check(params, [&](DTape& tape) {
        auto sb = to_segment_batch(tape, segs, obs_dim);
        return multi_step_loss(tape, model, sb).total;
    });
    CHECK(res.checked > 100);
    return res.max_rel_err;
}

}  // namespace

TEST_CASE("multi-step loss gradients match finite differences for every variant") {
    ActionSpec grid{4, false};
    for (auto v : {GspVariant::InverseOneStep, GspVariant::NoPrevNoFwd, GspVariant::NoFwd,
                   GspVariant::FwdRegularizer, GspVariant::Full})
        CHECK(fd_max_rel_err(v, DynamicsSpace::Feature, grid, 11) < 1e-4);
}

TEST_CASE("observation-space dynamics gradients match finite differences") {
    ActionSpec grid{4, false};
    for (auto v : {GspVariant::FwdRegularizer, GspVariant::Full})
        CHECK(fd_max_rel_err(v, DynamicsSpace::Observation, grid, 5) < 1e-4);
}

TEST_CASE("displacement heads carry correct gradients") {
    ActionSpec chain{8, true};
    for (auto v : {GspVariant::InverseOneStep, GspVariant::Full})
        CHECK(fd_max_rel_err(v, DynamicsSpace::Feature, chain, 3) < 1e-4);
}

TEST_CASE("encoder gradients through the forward fit match finite differences") {
    // rebuild the fit term with the stop-gradient target precomputed as a
    // constant, so central differences agree on the remaining encoder path
    ActionSpec grid{4, false};
    const int obs_dim = 6, B = 3;
    auto model = GspModelT<double>::create(tiny_cfg(GspVariant::Full), obs_dim, grid, 37);
    std::mt19937_64 rng(12);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> xs(B * obs_dim), ns(B * obs_dim), encs(B * grid.enc_dim(), 0.0);
    for (auto& v : xs) v = nd(rng);
    for (auto& v : ns) v = nd(rng);
    for (int b = 0; b < B; ++b) encs[b * grid.enc_dim() + static_cast<int>(rng() % 4)] = 1.0;
    std::vector<double> target;
    {
        DTape tape;
        auto t = model.encode(tape, tape.tensor({B, obs_dim}, std::vector<double>(ns)));
        target = t->data;
    }
    std::vector<DTensor> params;
    for (auto& [name, t] : model.params_all()) params.push_back(t);
    auto res = fd_check(params, [&](DTape& tape) {
        auto feat = model.encode(tape, tape.tensor({B, obs_dim}, std::vector<double>(xs)));
        auto pred = model.forward_predict(
            tape, feat, tape.tensor({B, grid.enc_dim()}, std::vector<double>(encs)));
        return tape.mse(pred, tape.tensor({B, model.feature_dim()}, std::vector<double>(target)));
    });
    CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("nofwd loss equals the full loss with forward terms masked") {
    ActionSpec grid{4, false};
    const int obs_dim = 6;
    auto full = GspModel::create(tiny_cfg(GspVariant::Full), obs_dim, grid, 9);
    auto nofwd = GspModel::create(tiny_cfg(GspVariant::NoFwd), obs_dim, grid, 9);
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 5; ++trial) {
        auto segs = random_segments(3, 4, obs_dim, grid, rng);
        Tape tape;
        auto sb = to_segment_batch(tape, segs, obs_dim);
        auto pf = multi_step_loss(tape, full, sb);
        auto pn = multi_step_loss(tape, nofwd, sb);
        CHECK(pn.forward_fit == 0.0);
        CHECK(pn.consistency == 0.0);
        CHECK(std::fabs(pn.total->item() - pf.action_loss) <= 1e-6);
        CHECK(std::fabs(pn.total->item() -
                        (pf.total->item() - pf.forward_fit - pf.consistency)) <= 1e-6);
    }
}

TEST_CASE("noprev policy ignores the previous action entirely") {
    ActionSpec grid{4, false};
    auto model = GspModel::create(tiny_cfg(GspVariant::NoPrevNoFwd), 6, grid, 4);
    Tape tape;
    std::mt19937_64 rng(8);
    std::normal_distribution<double> nd(0.0, 1.0);
    auto rnd = [&](std::vector<int> shape) {
        std::vector<float> d(shape_numel(shape));
        for (auto& v : d) v = static_cast<float>(nd(rng));
        return tape.tensor(std::move(shape), std::move(d));
    };
    auto hidden = tape.zeros({2, model.cfg.hidden_dim});
    auto feat_t = rnd({2, model.feature_dim()});
    auto feat_g = rnd({2, model.feature_dim()});
    auto a = model.policy_step(tape, hidden, feat_t, feat_g, rnd({2, grid.enc_dim()}));
    auto b = model.policy_step(tape, hidden, feat_t, feat_g, rnd({2, grid.enc_dim()}));
    for (size_t i = 0; i < a.logits->data.size(); ++i) CHECK(a.logits->data[i] == b.logits->data[i]);
}

TEST_CASE("lambda zero reduces the full variant to the regularizer variant") {
    ActionSpec grid{4, false};
    const int obs_dim = 6;
    auto cfg_full = tiny_cfg(GspVariant::Full);
    cfg_full.lambda = 0.0;
    auto full = GspModel::create(cfg_full, obs_dim, grid, 13);
    auto reg = GspModel::create(tiny_cfg(GspVariant::FwdRegularizer), obs_dim, grid, 13);
    std::mt19937_64 rng(3);
    auto segs = random_segments(3, 4, obs_dim, grid, rng);
    Tape tape;
    auto sb = to_segment_batch(tape, segs, obs_dim);
    auto pf = multi_step_loss(tape, full, sb);
    auto pr = multi_step_loss(tape, reg, sb);
    CHECK(pf.consistency == 0.0);
    CHECK(pf.total->item() == doctest::Approx(pr.total->item()).epsilon(1e-6));
}

TEST_CASE("loss parts always sum to the total") {
    std::mt19937_64 rng(6);
    for (auto v : {GspVariant::NoFwd, GspVariant::FwdRegularizer, GspVariant::Full}) {
        auto model = GspModel::create(tiny_cfg(v), 6, ActionSpec{4, false}, 21);
        auto segs = random_segments(4, 5, 6, ActionSpec{4, false}, rng);
        Tape tape;
        auto sb = to_segment_batch(tape, segs, 6);
        auto p = multi_step_loss(tape, model, sb);
        CHECK(p.total->item() ==
              doctest::Approx(p.action_loss + p.forward_fit + p.consistency).epsilon(1e-5));
    }
}

TEST_CASE("one-step loss equals a length-1 multi-step loss") {
    ActionSpec grid{4, false};
    auto model = GspModel::create(tiny_cfg(GspVariant::Full), 6, grid, 17);
    std::mt19937_64 rng(9);
    auto segs = random_segments(4, 1, 6, grid, rng);
    std::vector<Transition> batch;
    for (const auto& s : segs) {
        Transition t;
        t.obs = s.obs[0];
        t.next_obs = s.obs[1];
        t.action = s.actions[0];
        batch.push_back(t);
    }
    Tape tape;
    auto sb = to_segment_batch(tape, segs, 6);
    CHECK(one_step_loss(tape, model, batch).total->item() ==
          doctest::Approx(multi_step_loss(tape, model, sb).total->item()).epsilon(1e-7));
}

TEST_CASE("mixed segment lengths and bad dimensions are rejected") {
    ActionSpec grid{4, false};
    auto model = GspModel::create(tiny_cfg(GspVariant::Full), 6, grid, 1);
    std::mt19937_64 rng(1);
    auto segs = random_segments(2, 3, 6, grid, rng);
    segs[1] = random_segments(1, 4, 6, grid, rng)[0];
    Tape tape;
    CHECK_THROWS(to_segment_batch(tape, segs, 6));
    CHECK_THROWS(to_segment_batch(tape, std::vector<GoalSegment>{}, 6));
    CHECK_THROWS(model.encode_action({7, 0, 0}));
    CHECK_THROWS(model.encode_action({-1, 0, 0}));
}

TEST_CASE("variant names round trip and unknown names throw") {
    for (auto v : {GspVariant::InverseOneStep, GspVariant::NoPrevNoFwd, GspVariant::NoFwd,
                   GspVariant::FwdRegularizer, GspVariant::Full})
        CHECK(variant_from_name(variant_name(v)) == v);
    CHECK_THROWS(variant_from_name("bogus"));
}

TEST_CASE("save and load preserve the model bit for bit") {
    ActionSpec chain{8, true};
    auto cfg = tiny_cfg(GspVariant::Full);
    auto model = GspModel::create(cfg, 10, chain, 23);
    auto path = (std::filesystem::temp_directory_path() / "gsp_roundtrip.json").string();
    save_gsp(model, path);
    auto back = load_gsp(path);
    CHECK(back.cfg.variant == model.cfg.variant);
    CHECK(back.cfg.dynamics_space == model.cfg.dynamics_space);
    CHECK(back.cfg.lambda == model.cfg.lambda);
    CHECK(back.obs_dim == model.obs_dim);
    CHECK(back.aspec.num_discrete == model.aspec.num_discrete);
    CHECK(back.aspec.has_displacement == model.aspec.has_displacement);
    auto pa = model.params_all();
    auto pb = back.params_all();
    REQUIRE(pa.size() == pb.size());
    for (size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i].first == pb[i].first);
        REQUIRE(pa[i].second->data.size() == pb[i].second->data.size());
        for (size_t j = 0; j < pa[i].second->data.size(); ++j)
            CHECK(pa[i].second->data[j] == pb[i].second->data[j]);
    }
    std::remove(path.c_str());
    CHECK_THROWS(load_gsp(path));
}

TEST_CASE("loaded models produce identical losses") {
    ActionSpec grid{4, false};
    auto model = GspModel::create(tiny_cfg(GspVariant::Full), 6, grid, 29);
    auto path = (std::filesystem::temp_directory_path() / "gsp_roundtrip2.json").string();
    save_gsp(model, path);
    auto back = load_gsp(path);
    std::mt19937_64 rng(4);
    auto segs = random_segments(3, 4, 6, grid, rng);
    Tape tape;
    auto sb = to_segment_batch(tape, segs, 6);
    CHECK(multi_step_loss(tape, model, sb).total->item() ==
          multi_step_loss(tape, back, sb).total->item());
    std::remove(path.c_str());
}

TEST_CASE("training runs all three phases and lowers the joint loss") {
    auto world = GridWorld::generate(9, 9, 8, 2);
    auto ds = random_explore_grid(world, 4, 5);
    GspConfig cfg = tiny_cfg(GspVariant::Full);
    cfg.pretrain_steps_forward = 20;
    cfg.pretrain_steps_policy = 20;
    cfg.joint_steps = 60;
    cfg.batch_size = 16;
    TrainReport rep;
    auto model = train_gsp(cfg, ds, world.obs_dim(), world.action_spec(), 7, &rep);
    REQUIRE(rep.phases.size() == 3);
    CHECK(rep.phases[0].name == "pretrain-forward");
    CHECK(rep.phases[1].name == "pretrain-policy");
    CHECK(rep.phases[2].name == "joint");
    for (const auto& p : rep.phases) {
        CHECK(p.steps > 0);
        CHECK_FALSE(p.loss_curve.empty());
        CHECK(std::isfinite(p.final_loss));
    }
    // the joint phase must improve on its start
    const auto& joint = rep.phases[2].loss_curve;
    CHECK(joint.back() < joint.front());
    // deterministic retrain
    TrainReport rep2;
    auto model2 = train_gsp(cfg, ds, world.obs_dim(), world.action_spec(), 7, &rep2);
    auto pa = model.params_all();
    auto pb = model2.params_all();
    for (size_t i = 0; i < pa.size(); ++i)
        for (size_t j = 0; j < pa[i].second->data.size(); ++j)
            CHECK(pa[i].second->data[j] == pb[i].second->data[j]);
}
