#include "gspkit/gsp.hpp"

#include "gspkit/checkpoint.hpp"

namespace gspkit {

std::string variant_name(GspVariant v) {
    switch (v) {
        case GspVariant::InverseOneStep: return "inverse_one_step";
        case GspVariant::NoPrevNoFwd: return "noprev_nofwd";
        case GspVariant::NoFwd: return "nofwd";
        case GspVariant::FwdRegularizer: return "fwd_regularizer";
        case GspVariant::Full: return "full";
    }
    return "full";
}

GspVariant variant_from_name(const std::string& s) {
    if (s == "inverse_one_step") return GspVariant::InverseOneStep;
    if (s == "noprev_nofwd") return GspVariant::NoPrevNoFwd;
    if (s == "nofwd") return GspVariant::NoFwd;
    if (s == "fwd_regularizer") return GspVariant::FwdRegularizer;
    if (s == "full") return GspVariant::Full;
    throw std::runtime_error("unknown GSP variant '" + s + "'");
}

nlohmann::json GspConfig::to_json() const {
    return {{"variant", variant_name(variant)},
            {"dynamics_space", dynamics_space == DynamicsSpace::Feature ? "feature" : "observation"},
            {"lambda", lambda},
            {"forward_weight", forward_weight},
            {"feature_dim", feature_dim},
            {"hidden_dim", hidden_dim},
            {"pretrain_steps_forward", pretrain_steps_forward},
            {"pretrain_steps_policy", pretrain_steps_policy},
            {"joint_steps", joint_steps},
            {"batch_size", batch_size},
            {"learning_rate", learning_rate},
            {"min_segment", min_segment},
            {"max_segment", max_segment}};
}

GspConfig GspConfig::from_json(const nlohmann::json& j) {
    GspConfig c;
    c.variant = variant_from_name(j.value("variant", "full"));
    std::string sp = j.value("dynamics_space", "feature");
    if (sp != "feature" && sp != "observation")
        throw std::runtime_error("unknown dynamics_space '" + sp + "'");
    c.dynamics_space = sp == "feature" ? DynamicsSpace::Feature : DynamicsSpace::Observation;
    c.lambda = j.value("lambda", c.lambda);
    c.forward_weight = j.value("forward_weight", c.forward_weight);
    c.feature_dim = j.value("feature_dim", c.feature_dim);
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.pretrain_steps_forward = j.value("pretrain_steps_forward", c.pretrain_steps_forward);
    c.pretrain_steps_policy = j.value("pretrain_steps_policy", c.pretrain_steps_policy);
    c.joint_steps = j.value("joint_steps", c.joint_steps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.min_segment = j.value("min_segment", c.min_segment);
    c.max_segment = j.value("max_segment", c.max_segment);
    return c;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// runs `steps` optimization steps of `loss_fn`, updating `params`
template <class LossFn>
TrainPhase run_phase(const std::string& name, int steps, const Params& params,
                     AdamState& adam, LossFn loss_fn) {
    TrainPhase phase;
    phase.name = name;
    phase.steps = steps;
    auto t0 = Clock::now();
    for (int s = 0; s < steps; ++s) {
        double loss;
        try {
            loss = loss_fn(s);
        } catch (const TensorError& e) {
            throw std::runtime_error("training diverged in phase '" + name + "' at step " +
                                     std::to_string(s) + ": " + e.what());
        }
        adam_step(params, adam);
        if (s % 25 == 0) phase.loss_curve.push_back(loss);
        phase.final_loss = loss;
    }
    phase.wall_ms = ms_since(t0);
    return phase;
}

}  // namespace

GspModel train_gsp(const GspConfig& cfg, const ExplorationDataset& data, int obs_dim,
                   const ActionSpec& aspec, uint64_t seed, TrainReport* report) {
    auto model = GspModel::create(cfg, obs_dim, aspec, seed);
    TrainReport local;
    TrainReport& rep = report ? *report : local;
    std::mt19937_64 rng(mix_seed(seed, fnv1a("gsp-train")));
    std::uniform_int_distribution<int> lend(cfg.min_segment, cfg.max_segment);
    Tape tape;

    auto segments_step = [&](bool) {
        int len = lend(rng);
        auto segs = sample_segment_batch(data, cfg.batch_size, len, rng);
        auto sb = to_segment_batch(tape, segs, obs_dim);
        auto parts = multi_step_loss(tape, model, sb);
        double v = parts.total->item();
        tape.backward(parts.total);
        return v;
    };

    if (cfg.variant == GspVariant::InverseOneStep) {
        // single-phase: cross-entropy on one-step transitions
        AdamState adam;
        adam.learning_rate = static_cast<float>(cfg.learning_rate);
        auto params = model.params_all();
        rep.phases.push_back(run_phase("inverse", cfg.joint_steps, params, adam, [&](int) {
            auto batch = sample_transitions(data, cfg.batch_size, rng);
            auto parts = one_step_loss(tape, model, batch);
            double v = parts.total->item();
            tape.backward(parts.total);
            return v;
        }));
        return model;
    }

    // phase 1: pre-train the forward model alone (variants with a forward term)
    if (uses_forward_fit(cfg.variant) && cfg.pretrain_steps_forward > 0) {
        AdamState adam;
        adam.learning_rate = static_cast<float>(cfg.learning_rate);
        auto params = model.params_forward();
        rep.phases.push_back(run_phase("pretrain-forward", cfg.pretrain_steps_forward, params, adam,
                                       [&](int) {
            auto batch = sample_transitions(data, cfg.batch_size, rng);
            auto loss = forward_fit_loss(tape, model, batch);
            double v = loss->item();
            tape.backward(loss);
            return v;
        }));
    }

    // phase 2: pre-train policy (and encoder) with the action loss only
    {
        AdamState adam;
        adam.learning_rate = static_cast<float>(cfg.learning_rate);
        GspConfig ce_only = cfg;
        ce_only.variant = uses_prev_action(cfg.variant) ? GspVariant::NoFwd : GspVariant::NoPrevNoFwd;
        GspModel view = model;  // shares parameter tensors
        view.cfg = ce_only;
        Params params = model.params_policy();
        for (auto& e : model.params_encoder()) params.push_back(e);
        rep.phases.push_back(run_phase("pretrain-policy", cfg.pretrain_steps_policy, params, adam,
                                       [&](int) {
            int len = lend(rng);
            auto segs = sample_segment_batch(data, cfg.batch_size, len, rng);
            auto sb = to_segment_batch(tape, segs, obs_dim);
            auto parts = multi_step_loss(tape, view, sb);
            double v = parts.total->item();
            tape.backward(parts.total);
            return v;
        }));
    }

    // phase 3: joint fine-tuning with the full per-variant objective
    if (cfg.joint_steps > 0) {
        AdamState adam;
        adam.learning_rate = static_cast<float>(cfg.learning_rate);
        Params params = model.params_policy();
        for (auto& e : model.params_encoder()) params.push_back(e);
        if (uses_forward_fit(cfg.variant))
            for (auto& e : model.params_forward()) params.push_back(e);
        rep.phases.push_back(run_phase("joint", cfg.joint_steps, params, adam,
                                       [&](int) { return segments_step(true); }));
    }
    return model;
}

void save_gsp(const GspModel& model, const std::string& path) {
    nlohmann::json cfg = model.cfg.to_json();
    cfg["obs_dim"] = model.obs_dim;
    cfg["num_discrete"] = model.aspec.num_discrete;
    cfg["has_displacement"] = model.aspec.has_displacement;
    save_checkpoint(model.params_all(), cfg, path);
}

GspModel load_gsp(const std::string& path) {
    Checkpoint ck = load_checkpoint(path);
    GspConfig cfg = GspConfig::from_json(ck.config);
    int obs_dim = ck.config.at("obs_dim").get<int>();
    ActionSpec aspec{ck.config.at("num_discrete").get<int>(),
                     ck.config.at("has_displacement").get<bool>()};
    auto model = GspModel::create(cfg, obs_dim, aspec, 0);
    restore_params(model.params_all(), ck);
    return model;
}

}  // namespace gspkit
