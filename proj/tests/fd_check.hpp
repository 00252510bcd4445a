#pragma once

// Finite-difference gradient oracle. Runs the computation in double so that
// central differences resolve gradients to ~1e-8 relative error.

#include <cmath>
#include <functional>
#include <vector>

#include "gspkit/tensor.hpp"

namespace gspkit::testutil {

using DTensor = TensorPtrT<double>;
using DTape = TapeT<double>;

struct FdResult {
    double max_rel_err = 0.0;
    int checked = 0;
};

// build must construct the loss from scratch on the given tape, reading the
// current values of the input tensors
inline FdResult fd_check(std::vector<DTensor> inputs,
                         const std::function<DTensor(DTape&)>& build,
                         double step = 1e-5) {
    for (auto& in : inputs) {
        in->ensure_grad();
        in->zero_grad();
    }
    {
        DTape tape;
        auto loss = build(tape);
        tape.backward(loss);
    }
    std::vector<std::vector<double>> analytic;
    for (auto& in : inputs) analytic.push_back(in->grad);

    FdResult res;
    for (size_t t = 0; t < inputs.size(); ++t) {
        auto& x = inputs[t]->data;
        for (size_t i = 0; i < x.size(); ++i) {
            double orig = x[i];
            x[i] = orig + step;
            double lp;
            {
                DTape tape;
                lp = build(tape)->item();
            }
            x[i] = orig - step;
            double lm;
            {
                DTape tape;
                lm = build(tape)->item();
            }
            x[i] = orig;
            double fd = (lp - lm) / (2 * step);
            double an = analytic[t][i];
            double denom = std::max({std::fabs(fd), std::fabs(an), 1e-6});
            res.max_rel_err = std::max(res.max_rel_err, std::fabs(fd - an) / denom);
            ++res.checked;
        }
    }
    return res;
}

inline DTensor random_dtensor(DTape& tape, std::vector<int> shape, std::mt19937_64& rng,
                              double scale = 1.0) {
    std::normal_distribution<double> nd(0.0, scale);
    std::vector<double> data(shape_numel(shape));
    for (auto& v : data) v = nd(rng);
    return tape.tensor(std::move(shape), std::move(data), true);
}

}  // namespace gspkit::testutil
