#pragma once

// Dense tensors with reverse-mode automatic differentiation and Adam.
// Scalar type is a template parameter: float for training, double for
// the finite-difference shadow checks in the test suite.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gspkit {

class TensorError : public std::runtime_error {
public:
    explicit TensorError(const std::string& msg) : std::runtime_error(msg) {}
};

inline std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

inline int shape_numel(const std::vector<int>& shape) {
    int n = 1;
    for (int d : shape) {
        if (d <= 0) throw TensorError("non-positive dimension in shape " + shape_str(shape));
        n *= d;
    }
    return n;
}

template <class S>
struct TensorT {
    std::vector<int> shape;
    std::vector<S> data;
    bool requires_grad = false;
    std::vector<S> grad;

    int numel() const { return static_cast<int>(data.size()); }
    int last_dim() const { return shape.empty() ? 1 : shape.back(); }
    int lead_dim() const { return numel() / std::max(1, last_dim()); }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), S(0));
    }
    void zero_grad() { std::fill(grad.begin(), grad.end(), S(0)); }
    S item() const {
        if (numel() != 1) throw TensorError("item() on non-scalar tensor " + shape_str(shape));
        return data[0];
    }
};

template <class S>
using TensorPtrT = std::shared_ptr<TensorT<S>>;

template <class S>
using ParamsT = std::vector<std::pair<std::string, TensorPtrT<S>>>;

// Records ops in execution order; backward replays the list once, in reverse.
template <class S>
class TapeT {
public:
    TensorPtrT<S> tensor(std::vector<int> shape, std::vector<S> data, bool requires_grad = false) {
        int n = shape_numel(shape);
        if (static_cast<int>(data.size()) != n)
            throw TensorError("tensor: data length " + std::to_string(data.size()) +
                              " does not match shape " + shape_str(shape));
        auto t = std::make_shared<TensorT<S>>();
        t->shape = std::move(shape);
        t->data = std::move(data);
        t->requires_grad = requires_grad;
        t->ensure_grad();
        return t;
    }

    TensorPtrT<S> zeros(std::vector<int> shape, bool requires_grad = false) {
        int n = shape_numel(shape);
        return tensor(std::move(shape), std::vector<S>(n, S(0)), requires_grad);
    }

    TensorPtrT<S> constant(std::vector<int> shape, S value) {
        int n = shape_numel(shape);
        return tensor(std::move(shape), std::vector<S>(n, value), false);
    }

    // a: [m,k], b: [k,n] -> [m,n]
    TensorPtrT<S> matmul(TensorPtrT<S> a, TensorPtrT<S> b) {
        if (a->shape.size() != 2 || b->shape.size() != 2 || a->shape[1] != b->shape[0])
            throw TensorError("matmul: incompatible shapes " + shape_str(a->shape) + " x " +
                              shape_str(b->shape));
        int m = a->shape[0], k = a->shape[1], n = b->shape[1];
        auto out = alloc({m, n});
        const S* A = a->data.data();
        const S* B = b->data.data();
        S* C = out->data.data();
        for (int i = 0; i < m; ++i)
            for (int p = 0; p < k; ++p) {
                S av = A[i * k + p];
                if (av == S(0)) continue;
                const S* brow = B + p * n;
                S* crow = C + i * n;
                for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        finish("matmul", out);
        record([a, b, out, m, k, n]() {
            const S* G = out->grad.data();
            const S* A = a->data.data();
            const S* B = b->data.data();
            S* dA = a->grad.data();
            S* dB = b->grad.data();
            // dA = G B^T: dot products over contiguous rows
            for (int i = 0; i < m; ++i) {
                const S* grow = G + i * n;
                for (int p = 0; p < k; ++p) {
                    const S* brow = B + p * n;
                    S acc = 0;
                    for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
                    dA[i * k + p] += acc;
                }
            }
            // dB = A^T G: contiguous accumulation into dB rows
            for (int i = 0; i < m; ++i) {
                const S* grow = G + i * n;
                for (int p = 0; p < k; ++p) {
                    S av = A[i * k + p];
                    if (av == S(0)) continue;
                    S* brow = dB + p * n;
                    for (int j = 0; j < n; ++j) brow[j] += av * grow[j];
                }
            }
        });
        return out;
    }

    TensorPtrT<S> add(TensorPtrT<S> a, TensorPtrT<S> b) { return binary_bcast("add", a, b, std::plus<S>(), /*mul=*/false); }
    TensorPtrT<S> sub(TensorPtrT<S> a, TensorPtrT<S> b) { return binary_bcast("sub", a, b, std::minus<S>(), false, true); }
    TensorPtrT<S> mul(TensorPtrT<S> a, TensorPtrT<S> b) { return binary_bcast("mul", a, b, std::multiplies<S>(), true); }

    TensorPtrT<S> tanh_op(TensorPtrT<S> a) {
        auto out = alloc(a->shape);
        for (int i = 0; i < a->numel(); ++i) out->data[i] = std::tanh(a->data[i]);
        finish("tanh", out);
        record([a, out]() {
            for (int i = 0; i < a->numel(); ++i) {
                S y = out->data[i];
                a->grad[i] += out->grad[i] * (S(1) - y * y);
            }
        });
        return out;
    }

    TensorPtrT<S> sigmoid_op(TensorPtrT<S> a) {
        auto out = alloc(a->shape);
        for (int i = 0; i < a->numel(); ++i) {
            S x = a->data[i];
            out->data[i] = x >= S(0) ? S(1) / (S(1) + std::exp(-x))
                                     : std::exp(x) / (S(1) + std::exp(x));
        }
        finish("sigmoid", out);
        record([a, out]() {
            for (int i = 0; i < a->numel(); ++i) {
                S y = out->data[i];
                a->grad[i] += out->grad[i] * y * (S(1) - y);
            }
        });
        return out;
    }

    TensorPtrT<S> relu_op(TensorPtrT<S> a) {
        auto out = alloc(a->shape);
        for (int i = 0; i < a->numel(); ++i) out->data[i] = a->data[i] > S(0) ? a->data[i] : S(0);
        finish("relu", out);
        record([a, out]() {
            for (int i = 0; i < a->numel(); ++i)
                if (a->data[i] > S(0)) a->grad[i] += out->grad[i];
        });
        return out;
    }

    // concat along last axis; leading dims must match
    TensorPtrT<S> concat(TensorPtrT<S> a, TensorPtrT<S> b) {
        if (a->shape.size() != b->shape.size() || a->shape.empty())
            throw TensorError("concat: rank mismatch " + shape_str(a->shape) + " vs " + shape_str(b->shape));
        for (size_t i = 0; i + 1 < a->shape.size(); ++i)
            if (a->shape[i] != b->shape[i])
                throw TensorError("concat: leading dims differ " + shape_str(a->shape) + " vs " + shape_str(b->shape));
        int rows = a->lead_dim(), na = a->last_dim(), nb = b->last_dim();
        auto shape = a->shape;
        shape.back() = na + nb;
        auto out = alloc(shape);
        for (int r = 0; r < rows; ++r) {
            std::copy_n(a->data.data() + r * na, na, out->data.data() + r * (na + nb));
            std::copy_n(b->data.data() + r * nb, nb, out->data.data() + r * (na + nb) + na);
        }
        finish("concat", out);
        record([a, b, out, rows, na, nb]() {
            for (int r = 0; r < rows; ++r) {
                for (int i = 0; i < na; ++i) a->grad[r * na + i] += out->grad[r * (na + nb) + i];
                for (int i = 0; i < nb; ++i) b->grad[r * nb + i] += out->grad[r * (na + nb) + na + i];
            }
        });
        return out;
    }

    // softmax over last axis
    TensorPtrT<S> softmax(TensorPtrT<S> a) {
        int rows = a->lead_dim(), n = a->last_dim();
        auto out = alloc(a->shape);
        for (int r = 0; r < rows; ++r) {
            const S* x = a->data.data() + r * n;
            S* y = out->data.data() + r * n;
            S mx = *std::max_element(x, x + n);
            S sum = 0;
            for (int i = 0; i < n; ++i) {
                y[i] = std::exp(x[i] - mx);
                sum += y[i];
            }
            for (int i = 0; i < n; ++i) y[i] /= sum;
        }
        finish("softmax", out);
        record([a, out, rows, n]() {
            for (int r = 0; r < rows; ++r) {
                const S* y = out->data.data() + r * n;
                const S* g = out->grad.data() + r * n;
                S dot = 0;
                for (int i = 0; i < n; ++i) dot += y[i] * g[i];
                for (int i = 0; i < n; ++i) a->grad[r * n + i] += y[i] * (g[i] - dot);
            }
        });
        return out;
    }

    // mean of squared differences over all elements -> scalar
    TensorPtrT<S> mse(TensorPtrT<S> a, TensorPtrT<S> b) {
        if (a->shape != b->shape)
            throw TensorError("mse: shape mismatch " + shape_str(a->shape) + " vs " + shape_str(b->shape));
        int n = a->numel();
        S acc = 0;
        for (int i = 0; i < n; ++i) {
            S d = a->data[i] - b->data[i];
            acc += d * d;
        }
        auto out = alloc({1});
        out->data[0] = acc / S(n);
        finish("mse", out);
        record([a, b, out, n]() {
            S g = out->grad[0] * S(2) / S(n);
            for (int i = 0; i < n; ++i) {
                S d = a->data[i] - b->data[i];
                a->grad[i] += g * d;
                b->grad[i] -= g * d;
            }
        });
        return out;
    }

    // logits: [B,A], targets: class indices, mean over batch -> scalar
    TensorPtrT<S> cross_entropy_logits(TensorPtrT<S> logits, const std::vector<int>& targets) {
        int rows = logits->lead_dim(), n = logits->last_dim();
        if (static_cast<int>(targets.size()) != rows)
            throw TensorError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                              std::to_string(rows) + " rows of " + shape_str(logits->shape));
        for (int t : targets)
            if (t < 0 || t >= n) throw TensorError("cross_entropy: target class " + std::to_string(t) + " out of range");
        auto probs = std::make_shared<std::vector<S>>(static_cast<size_t>(rows) * n);
        S acc = 0;
        for (int r = 0; r < rows; ++r) {
            const S* x = logits->data.data() + r * n;
            S* p = probs->data() + r * n;
            S mx = *std::max_element(x, x + n);
            S sum = 0;
            for (int i = 0; i < n; ++i) {
                p[i] = std::exp(x[i] - mx);
                sum += p[i];
            }
            for (int i = 0; i < n; ++i) p[i] /= sum;
            acc += std::log(sum) + mx - x[targets[r]];
        }
        auto out = alloc({1});
        out->data[0] = acc / S(rows);
        finish("cross_entropy", out);
        record([logits, targets, probs, out, rows, n]() {
            S g = out->grad[0] / S(rows);
            for (int r = 0; r < rows; ++r)
                for (int i = 0; i < n; ++i) {
                    S p = (*probs)[r * n + i];
                    logits->grad[r * n + i] += g * (p - (i == targets[r] ? S(1) : S(0)));
                }
        });
        return out;
    }

    TensorPtrT<S> scale(TensorPtrT<S> a, S c) {
        auto out = alloc(a->shape);
        for (int i = 0; i < a->numel(); ++i) out->data[i] = c * a->data[i];
        finish("scale", out);
        record([a, out, c]() {
            for (int i = 0; i < a->numel(); ++i) a->grad[i] += c * out->grad[i];
        });
        return out;
    }

    TensorPtrT<S> sum(TensorPtrT<S> a) {
        auto out = alloc({1});
        out->data[0] = std::accumulate(a->data.begin(), a->data.end(), S(0));
        finish("sum", out);
        record([a, out]() {
            for (int i = 0; i < a->numel(); ++i) a->grad[i] += out->grad[0];
        });
        return out;
    }

    TensorPtrT<S> mean(TensorPtrT<S> a) { return scale(sum(a), S(1) / S(a->numel())); }

    // copies the value, severs the graph
    TensorPtrT<S> detach(TensorPtrT<S> a) {
        auto t = std::make_shared<TensorT<S>>();
        t->shape = a->shape;
        t->data = a->data;
        t->ensure_grad();
        return t;
    }

    void backward(TensorPtrT<S> loss) {
        if (loss->numel() != 1) throw TensorError("backward: loss must be scalar, got " + shape_str(loss->shape));
        loss->ensure_grad();
        loss->grad[0] = S(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
        nodes_.clear();
    }

    void clear() { nodes_.clear(); }
    size_t size() const { return nodes_.size(); }

private:
    std::vector<std::function<void()>> nodes_;

    TensorPtrT<S> alloc(std::vector<int> shape) {
        auto t = std::make_shared<TensorT<S>>();
        t->shape = std::move(shape);
        t->data.assign(shape_numel(t->shape), S(0));
        t->ensure_grad();
        return t;
    }

    void record(std::function<void()> back) { nodes_.push_back(std::move(back)); }

    void finish(const char* op, const TensorPtrT<S>& out) {
        for (S v : out->data)
            if (!std::isfinite(static_cast<double>(v)))
                throw TensorError(std::string(op) + ": non-finite output");
    }

    template <class F>
    TensorPtrT<S> binary_bcast(const char* op, TensorPtrT<S> a, TensorPtrT<S> b, F f,
                               bool is_mul, bool is_sub = false) {
        bool same = a->shape == b->shape;
        // leading-axis broadcast: b is 1-D matching a's last dim
        bool bcast = !same && b->shape.size() == 1 && b->shape[0] == a->last_dim();
        if (!same && !bcast)
            throw TensorError(std::string(op) + ": shape mismatch " + shape_str(a->shape) +
                              " vs " + shape_str(b->shape));
        int n = a->numel(), nb = b->numel();
        auto out = alloc(a->shape);
        for (int i = 0; i < n; ++i) out->data[i] = f(a->data[i], b->data[i % nb]);
        finish(op, out);
        if (is_mul) {
            record([a, b, out, n, nb]() {
                for (int i = 0; i < n; ++i) {
                    a->grad[i] += out->grad[i] * b->data[i % nb];
                    b->grad[i % nb] += out->grad[i] * a->data[i];
                }
            });
        } else if (is_sub) {
            record([a, b, out, n, nb]() {
                for (int i = 0; i < n; ++i) {
                    a->grad[i] += out->grad[i];
                    b->grad[i % nb] -= out->grad[i];
                }
            });
        } else {
            record([a, b, out, n, nb]() {
                for (int i = 0; i < n; ++i) {
                    a->grad[i] += out->grad[i];
                    b->grad[i % nb] += out->grad[i];
                }
            });
        }
        return out;
    }
};

template <class S>
struct AdamStateT {
    S learning_rate = S(5e-4);
    S beta1 = S(0.9);
    S beta2 = S(0.999);
    S epsilon = S(1e-8);
    long step_count = 0;
    std::map<std::string, std::pair<std::vector<S>, std::vector<S>>> moments;
};

// Standard Adam with bias correction; zeroes grads after the update.
template <class S>
void adam_step(const ParamsT<S>& params, AdamStateT<S>& st) {
    st.step_count += 1;
    S t = static_cast<S>(st.step_count);
    S bc1 = S(1) - std::pow(st.beta1, t);
    S bc2 = S(1) - std::pow(st.beta2, t);
    for (auto& [name, p] : params) {
        if (p->grad.size() != p->data.size())
            throw TensorError("adam_step: parameter '" + name + "' has no gradient");
        auto& [m, v] = st.moments[name];
        if (m.size() != p->data.size()) {
            m.assign(p->data.size(), S(0));
            v.assign(p->data.size(), S(0));
        }
        for (size_t i = 0; i < p->data.size(); ++i) {
            S g = p->grad[i];
            m[i] = st.beta1 * m[i] + (S(1) - st.beta1) * g;
            v[i] = st.beta2 * v[i] + (S(1) - st.beta2) * g * g;
            S mhat = m[i] / bc1;
            S vhat = v[i] / bc2;
            p->data[i] -= st.learning_rate * mhat / (std::sqrt(vhat) + st.epsilon);
        }
        p->zero_grad();
    }
}

using Tensor = TensorT<float>;
using TensorPtr = TensorPtrT<float>;
using Tape = TapeT<float>;
using AdamState = AdamStateT<float>;
using Params = ParamsT<float>;

}  // namespace gspkit
