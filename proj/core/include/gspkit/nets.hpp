#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "gspkit/tensor.hpp"

namespace gspkit {

template <class S>
TensorPtrT<S> xavier_init(TapeT<S>& tape, int fan_in, int fan_out, std::mt19937_64& rng) {
    double a = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-a, a);
    std::vector<S> w(static_cast<size_t>(fan_in) * fan_out);
    for (auto& v : w) v = static_cast<S>(dist(rng));
    return tape.tensor({fan_in, fan_out}, std::move(w), true);
}

template <class S>
struct LinearT {
    TensorPtrT<S> weight;  // [in, out]
    TensorPtrT<S> bias;    // [out]

    static LinearT create(TapeT<S>& tape, int in, int out, std::mt19937_64& rng) {
        LinearT l;
        l.weight = xavier_init(tape, in, out, rng);
        l.bias = tape.tensor({out}, std::vector<S>(out, S(0)), true);
        return l;
    }

    TensorPtrT<S> apply(TapeT<S>& tape, TensorPtrT<S> x) const {
        return tape.add(tape.matmul(x, weight), bias);
    }

    void collect(const std::string& prefix, ParamsT<S>& out) const {
        out.emplace_back(prefix + ".weight", weight);
        out.emplace_back(prefix + ".bias", bias);
    }
};

enum class Activation { Tanh, Relu };

template <class S>
struct MlpT {
    std::vector<LinearT<S>> layers;
    Activation act = Activation::Tanh;

    static MlpT create(TapeT<S>& tape, const std::vector<int>& dims, std::mt19937_64& rng,
                       Activation act = Activation::Tanh) {
        MlpT m;
        m.act = act;
        for (size_t i = 0; i + 1 < dims.size(); ++i)
            m.layers.push_back(LinearT<S>::create(tape, dims[i], dims[i + 1], rng));
        return m;
    }

    // activation on all but the final layer
    TensorPtrT<S> apply(TapeT<S>& tape, TensorPtrT<S> x) const {
        for (size_t i = 0; i < layers.size(); ++i) {
            x = layers[i].apply(tape, x);
            if (i + 1 < layers.size())
                x = act == Activation::Tanh ? tape.tanh_op(x) : tape.relu_op(x);
        }
        return x;
    }

    void collect(const std::string& prefix, ParamsT<S>& out) const {
        for (size_t i = 0; i < layers.size(); ++i)
            layers[i].collect(prefix + ".l" + std::to_string(i), out);
    }
};

template <class S>
struct GruCellT {
    LinearT<S> xz, xr, xh;           // input-side, with bias
    TensorPtrT<S> hz, hr, hh;        // hidden-side weights [H,H]

    static GruCellT create(TapeT<S>& tape, int in, int hidden, std::mt19937_64& rng) {
        GruCellT g;
        g.xz = LinearT<S>::create(tape, in, hidden, rng);
        g.xr = LinearT<S>::create(tape, in, hidden, rng);
        g.xh = LinearT<S>::create(tape, in, hidden, rng);
        g.hz = xavier_init(tape, hidden, hidden, rng);
        g.hr = xavier_init(tape, hidden, hidden, rng);
        g.hh = xavier_init(tape, hidden, hidden, rng);
        return g;
    }

    // x: [B,in], h: [B,H] -> [B,H]
    TensorPtrT<S> step(TapeT<S>& tape, TensorPtrT<S> x, TensorPtrT<S> h) const {
        auto z = tape.sigmoid_op(tape.add(xz.apply(tape, x), tape.matmul(h, hz)));
        auto r = tape.sigmoid_op(tape.add(xr.apply(tape, x), tape.matmul(h, hr)));
        auto cand = tape.tanh_op(tape.add(xh.apply(tape, x), tape.matmul(tape.mul(r, h), hh)));
        // h' = (1-z) h + z cand
        return tape.add(h, tape.mul(z, tape.sub(cand, h)));
    }

    void collect(const std::string& prefix, ParamsT<S>& out) const {
        xz.collect(prefix + ".xz", out);
        xr.collect(prefix + ".xr", out);
        xh.collect(prefix + ".xh", out);
        out.emplace_back(prefix + ".hz", hz);
        out.emplace_back(prefix + ".hr", hr);
        out.emplace_back(prefix + ".hh", hh);
    }
};

}  // namespace gspkit
