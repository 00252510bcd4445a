#pragma once

// Goal-conditioned skill policy: encoder, forward dynamics model, recurrent
// policy, the forward-consistency training objectives, and the ablation
// variants. Templated on scalar type so tests can run a double-precision
// shadow of the exact training computation.

#include <chrono>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gspkit/dataset.hpp"
#include "gspkit/env.hpp"
#include "gspkit/nets.hpp"
#include "gspkit/rng.hpp"
#include "gspkit/tensor.hpp"

namespace gspkit {

enum class GspVariant { InverseOneStep, NoPrevNoFwd, NoFwd, FwdRegularizer, Full };
enum class DynamicsSpace { Observation, Feature };

inline bool uses_forward_fit(GspVariant v) {
    return v == GspVariant::FwdRegularizer || v == GspVariant::Full;
}
inline bool uses_consistency(GspVariant v) { return v == GspVariant::Full; }
inline bool uses_prev_action(GspVariant v) {
    return v != GspVariant::NoPrevNoFwd && v != GspVariant::InverseOneStep;
}
inline bool is_recurrent(GspVariant v) { return v != GspVariant::InverseOneStep; }

std::string variant_name(GspVariant v);
GspVariant variant_from_name(const std::string& s);

struct GspConfig {
    GspVariant variant = GspVariant::Full;
    DynamicsSpace dynamics_space = DynamicsSpace::Feature;
    double lambda = 0.1;          // consistency coefficient inside the forward term
    double forward_weight = 0.1;  // weight of the whole forward term vs action loss
    int feature_dim = 64;
    int hidden_dim = 128;
    int pretrain_steps_forward = 1000;
    int pretrain_steps_policy = 1000;
    int joint_steps = 2000;
    int batch_size = 64;
    double learning_rate = 5e-4;
    int min_segment = 5;
    int max_segment = 15;

    nlohmann::json to_json() const;
    static GspConfig from_json(const nlohmann::json& j);
};

template <class S>
struct PolicyOut {
    TensorPtrT<S> logits;  // [B, num_discrete]
    TensorPtrT<S> disp;    // [B, 2] (chain only, else null)
    TensorPtrT<S> hidden;  // [B, H]
};

template <class S>
struct LossParts {
    TensorPtrT<S> total;
    // weighted contributions; total == forward_fit + consistency + action_loss
    double forward_fit = 0.0;
    double consistency = 0.0;
    double action_loss = 0.0;
};

template <class S>
struct GspModelT {
    GspConfig cfg;
    int obs_dim = 0;
    ActionSpec aspec;

    MlpT<S> encoder;   // feature space only
    MlpT<S> fwd;       // (feature, action enc) -> next feature
    GruCellT<S> gru;
    LinearT<S> head_discrete;
    LinearT<S> head_disp;   // chain only
    MlpT<S> inverse_net;    // inverse_one_step only

    int feature_dim() const {
        return cfg.dynamics_space == DynamicsSpace::Feature ? cfg.feature_dim : obs_dim;
    }

    static GspModelT create(const GspConfig& cfg, int obs_dim, const ActionSpec& aspec, uint64_t seed) {
        GspModelT m;
        m.cfg = cfg;
        m.obs_dim = obs_dim;
        m.aspec = aspec;
        TapeT<S> tape;
        std::mt19937_64 rng(mix_seed(seed, fnv1a("gsp-init")));
        int fd = m.feature_dim();
        int enc = aspec.enc_dim();
        if (cfg.dynamics_space == DynamicsSpace::Feature)
            m.encoder = MlpT<S>::create(tape, {obs_dim, cfg.hidden_dim, fd}, rng);
        m.fwd = MlpT<S>::create(tape, {fd + enc, cfg.hidden_dim, fd}, rng);
        if (cfg.variant == GspVariant::InverseOneStep) {
            std::vector<int> dims = {2 * fd, cfg.hidden_dim, aspec.num_discrete +
                                     (aspec.has_displacement ? 2 : 0)};
            m.inverse_net = MlpT<S>::create(tape, dims, rng);
        } else {
            m.gru = GruCellT<S>::create(tape, 2 * fd + enc, cfg.hidden_dim, rng);
            m.head_discrete = LinearT<S>::create(tape, cfg.hidden_dim, aspec.num_discrete, rng);
            if (aspec.has_displacement)
                m.head_disp = LinearT<S>::create(tape, cfg.hidden_dim, 2, rng);
        }
        return m;
    }

    ParamsT<S> params_encoder() const {
        ParamsT<S> p;
        if (cfg.dynamics_space == DynamicsSpace::Feature) encoder.collect("encoder", p);
        return p;
    }
    ParamsT<S> params_forward() const {
        ParamsT<S> p;
        fwd.collect("forward", p);
        return p;
    }
    ParamsT<S> params_policy() const {
        ParamsT<S> p;
        if (cfg.variant == GspVariant::InverseOneStep) {
            inverse_net.collect("inverse", p);
        } else {
            gru.collect("policy.gru", p);
            head_discrete.collect("policy.head", p);
            if (aspec.has_displacement) head_disp.collect("policy.disp", p);
        }
        return p;
    }
    ParamsT<S> params_all() const {
        ParamsT<S> p = params_encoder();
        for (auto& e : params_forward()) p.push_back(e);
        for (auto& e : params_policy()) p.push_back(e);
        return p;
    }

    // phi(x): identity in observation space
    TensorPtrT<S> encode(TapeT<S>& tape, TensorPtrT<S> x) const {
        if (x->last_dim() != obs_dim)
            throw TensorError("encode: observation dim " + std::to_string(x->last_dim()) +
                              " != " + std::to_string(obs_dim));
        if (cfg.dynamics_space == DynamicsSpace::Observation) return x;
        return encoder.apply(tape, x);
    }

    TensorPtrT<S> forward_predict(TapeT<S>& tape, TensorPtrT<S> feat, TensorPtrT<S> action_enc) const {
        return fwd.apply(tape, tape.concat(feat, action_enc));
    }

    // one recurrent step; a_prev_enc is zeroed internally for the NoPrev variant
    PolicyOut<S> policy_step(TapeT<S>& tape, TensorPtrT<S> hidden, TensorPtrT<S> feat_t,
                             TensorPtrT<S> feat_goal, TensorPtrT<S> a_prev_enc) const {
        if (cfg.variant == GspVariant::InverseOneStep) {
            auto out = inverse_net.apply(tape, tape.concat(feat_t, feat_goal));
            return split_heads(tape, out, hidden);
        }
        if (!uses_prev_action(cfg.variant))
            a_prev_enc = tape.zeros(a_prev_enc->shape);
        auto x = tape.concat(tape.concat(feat_t, feat_goal), a_prev_enc);
        auto h = gru.step(tape, x, hidden);
        PolicyOut<S> out;
        out.hidden = h;
        out.logits = head_discrete.apply(tape, h);
        if (aspec.has_displacement) out.disp = head_disp.apply(tape, h);
        return out;
    }

    // ground-truth action encoding: one-hot (+ displacement)
    std::vector<S> encode_action(const EnvAction& a) const {
        if (a.index < 0 || a.index >= aspec.num_discrete)
            throw TensorError("encode_action: index " + std::to_string(a.index) + " out of range");
        std::vector<S> enc(aspec.enc_dim(), S(0));
        enc[a.index] = S(1);
        if (aspec.has_displacement) {
            enc[aspec.num_discrete] = static_cast<S>(a.dx);
            enc[aspec.num_discrete + 1] = static_cast<S>(a.dy);
        }
        return enc;
    }

private:
    PolicyOut<S> split_heads(TapeT<S>& tape, TensorPtrT<S> out, TensorPtrT<S> hidden) const {
        PolicyOut<S> po;
        po.hidden = hidden;
        if (!aspec.has_displacement) {
            po.logits = out;
            return po;
        }
        // split [B, D+2] into logits [B,D] and displacement [B,2]
        int b = out->shape[0], nd = aspec.num_discrete;
        std::vector<S> lg(static_cast<size_t>(b) * nd), dp(static_cast<size_t>(b) * 2);
        // reuse tape ops to keep gradients: mask-multiply approach would be wasteful;
        // instead register a dedicated split via concat's inverse using two matmuls
        auto sel_l = tape.constant({nd + 2, nd}, S(0));
        auto sel_d = tape.constant({nd + 2, 2}, S(0));
        for (int i = 0; i < nd; ++i) sel_l->data[i * nd + i] = S(1);
        for (int i = 0; i < 2; ++i) sel_d->data[(nd + i) * 2 + i] = S(1);
        po.logits = tape.matmul(out, sel_l);
        po.disp = tape.matmul(out, sel_d);
        return po;
    }
};

// ---- losses ----------------------------------------------------------------

template <class S>
struct SegmentBatchT {
    // obs[t] is a [B, obs_dim] tensor; actions[t] the aligned actions
    std::vector<TensorPtrT<S>> obs;             // length n+1
    std::vector<std::vector<EnvAction>> actions;  // length n, each of size B
    int batch = 0;
    int length = 0;
};

template <class S>
SegmentBatchT<S> to_segment_batch(TapeT<S>& tape, const std::vector<GoalSegment>& segs, int obs_dim) {
    if (segs.empty()) throw TensorError("to_segment_batch: empty batch");
    int len = static_cast<int>(segs[0].actions.size());
    for (const auto& s : segs)
        if (static_cast<int>(s.actions.size()) != len)
            throw TensorError("to_segment_batch: mixed segment lengths");
    SegmentBatchT<S> sb;
    sb.batch = static_cast<int>(segs.size());
    sb.length = len;
    for (int t = 0; t <= len; ++t) {
        std::vector<S> data;
        data.reserve(static_cast<size_t>(sb.batch) * obs_dim);
        for (const auto& s : segs)
            for (float v : s.obs[t]) data.push_back(static_cast<S>(v));
        sb.obs.push_back(tape.tensor({sb.batch, obs_dim}, std::move(data)));
    }
    for (int t = 0; t < len; ++t) {
        std::vector<EnvAction> acts;
        for (const auto& s : segs) acts.push_back(s.actions[t]);
        sb.actions.push_back(std::move(acts));
    }
    return sb;
}

// Multi-step objective with teacher forcing. Segments must share one length
// (group mixed-length batches by length and average the results).
template <class S>
LossParts<S> multi_step_loss(TapeT<S>& tape, const GspModelT<S>& model, const SegmentBatchT<S>& sb) {
    if (sb.length < 1) throw TensorError("multi_step_loss: segment shorter than 2 observations");
    const auto& cfg = model.cfg;
    int B = sb.batch;
    int enc_dim = model.aspec.enc_dim();

    auto feat_goal = model.encode(tape, sb.obs.back());
    auto hidden = tape.zeros({B, cfg.hidden_dim});

    TensorPtrT<S> total;
    LossParts<S> parts;
    auto accumulate = [&](TensorPtrT<S> term, double* bucket) {
        *bucket += static_cast<double>(term->item());
        total = total ? tape.add(total, term) : term;
    };

    for (int t = 0; t < sb.length; ++t) {
        auto feat_t = model.encode(tape, sb.obs[t]);

        // teacher forcing: previous ground-truth action, start token at t=0
        TensorPtrT<S> a_prev;
        if (t == 0) {
            a_prev = tape.zeros({B, enc_dim});
        } else {
            std::vector<S> data;
            for (const auto& a : sb.actions[t - 1]) {
                auto e = model.encode_action(a);
                data.insert(data.end(), e.begin(), e.end());
            }
            a_prev = tape.tensor({B, enc_dim}, std::move(data));
        }

        auto po = model.policy_step(tape, hidden, feat_t, feat_goal, a_prev);
        hidden = po.hidden;

        // action loss (cross-entropy; plus displacement regression for chain)
        std::vector<int> targets;
        for (const auto& a : sb.actions[t]) targets.push_back(a.index);
        auto ce = tape.cross_entropy_logits(po.logits, targets);
        if (model.aspec.has_displacement) {
            std::vector<S> dd;
            for (const auto& a : sb.actions[t]) {
                dd.push_back(static_cast<S>(a.dx));
                dd.push_back(static_cast<S>(a.dy));
            }
            ce = tape.add(ce, tape.mse(po.disp, tape.tensor({B, 2}, std::move(dd))));
        }
        accumulate(ce, &parts.action_loss);

        if (uses_forward_fit(cfg.variant)) {
            // stop-gradient on the target occurrence of phi
            auto target = tape.detach(model.encode(tape, sb.obs[t + 1]));
            std::vector<S> gt_enc;
            for (const auto& a : sb.actions[t]) {
                auto e = model.encode_action(a);
                gt_enc.insert(gt_enc.end(), e.begin(), e.end());
            }
            auto fit = tape.mse(model.forward_predict(tape, feat_t, tape.tensor({B, enc_dim}, std::move(gt_enc))),
                                target);
            accumulate(tape.scale(fit, static_cast<S>(cfg.forward_weight)), &parts.forward_fit);

            if (uses_consistency(cfg.variant)) {
                // relaxed predicted action: softmax distribution (+ displacement head)
                auto relaxed = tape.softmax(po.logits);
                if (model.aspec.has_displacement) relaxed = tape.concat(relaxed, po.disp);
                auto cons = tape.mse(model.forward_predict(tape, feat_t, relaxed), target);
                accumulate(tape.scale(cons, static_cast<S>(cfg.forward_weight * cfg.lambda)),
                           &parts.consistency);
            }
        }
    }
    parts.total = tape.scale(total, S(1) / S(sb.length));
    parts.action_loss /= sb.length;
    parts.forward_fit /= sb.length;
    parts.consistency /= sb.length;
    return parts;
}

// One-step objective on (x_t, a_t, x_{t+1}) triples.
template <class S>
LossParts<S> one_step_loss(TapeT<S>& tape, const GspModelT<S>& model,
                           const std::vector<Transition>& batch) {
    if (batch.empty()) throw TensorError("one_step_loss: empty batch");
    std::vector<GoalSegment> segs;
    for (const auto& t : batch) {
        GoalSegment s;
        s.obs = {t.obs, t.next_obs};
        s.actions = {t.action};
        segs.push_back(std::move(s));
    }
    auto sb = to_segment_batch(tape, segs, model.obs_dim);
    return multi_step_loss(tape, model, sb);
}

// forward-model fit only (pretraining phase objective)
template <class S>
TensorPtrT<S> forward_fit_loss(TapeT<S>& tape, const GspModelT<S>& model,
                               const std::vector<Transition>& batch) {
    if (batch.empty()) throw TensorError("forward_fit_loss: empty batch");
    int B = static_cast<int>(batch.size());
    std::vector<S> xs, ns, encs;
    for (const auto& t : batch) {
        for (float v : t.obs) xs.push_back(static_cast<S>(v));
        for (float v : t.next_obs) ns.push_back(static_cast<S>(v));
        auto e = model.encode_action(t.action);
        encs.insert(encs.end(), e.begin(), e.end());
    }
    auto feat = model.encode(tape, tape.tensor({B, model.obs_dim}, std::move(xs)));
    auto target = tape.detach(model.encode(tape, tape.tensor({B, model.obs_dim}, std::move(ns))));
    auto pred = model.forward_predict(tape, feat, tape.tensor({B, model.aspec.enc_dim()}, std::move(encs)));
    return tape.mse(pred, target);
}

// ---- training --------------------------------------------------------------

struct TrainPhase {
    std::string name;
    int steps = 0;
    std::vector<double> loss_curve;  // sampled every 25 steps
    double final_loss = 0.0;
    double wall_ms = 0.0;
};

struct TrainReport {
    std::vector<TrainPhase> phases;
};

using GspModel = GspModelT<float>;

GspModel train_gsp(const GspConfig& cfg, const ExplorationDataset& data, int obs_dim,
                   const ActionSpec& aspec, uint64_t seed, TrainReport* report = nullptr);

// checkpoint round trip
void save_gsp(const GspModel& model, const std::string& path);
GspModel load_gsp(const std::string& path);

}  // namespace gspkit
