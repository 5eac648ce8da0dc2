#pragma once

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "hetfuse/nn/kernels.hpp"

// Reverse-mode autodiff on a flat tape. Every op appends one closure; the
// backward pass runs them in reverse. Nodes own their value and (lazily
// allocated) gradient; parameters are long-lived leaf nodes shared across
// tapes, so their gradients accumulate until the optimizer clears them.

namespace hetfuse::nn {

template <typename T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool needs_grad = false;

    void ensure_grad() {
        if (grad.shape() != value.shape()) grad = Tensor<T>(value.shape());
    }
    void zero_grad() {
        if (grad.shape() == value.shape())
            grad.fill(T(0));
        else
            grad = Tensor<T>(value.shape());
    }
};

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

template <typename T>
NodePtr<T> make_leaf(Tensor<T> value, bool needs_grad = false) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->needs_grad = needs_grad;
    if (needs_grad) n->ensure_grad();
    return n;
}

template <typename T>
class Tape {
public:
    explicit Tape(bool recording = true) : recording_(recording) {}

    bool recording() const { return recording_; }

    NodePtr<T> leaf(Tensor<T> value, bool needs_grad = false) {
        return make_leaf(std::move(value), needs_grad);
    }

    // Creates the output node of an op and records its backward closure.
    // The builder receives the output node and must return the closure.
    NodePtr<T> emit(Tensor<T> value, bool needs_grad,
                    const std::function<std::function<void()>(const NodePtr<T>&)>& make_backward) {
        auto out = std::make_shared<Node<T>>();
        out->value = std::move(value);
        out->needs_grad = needs_grad;
        if (recording_ && needs_grad) {
            out->ensure_grad();
            ops_.push_back(make_backward(out));
        }
        return out;
    }

    void backward(const NodePtr<T>& root) {
        check(root->value.numel() == 1, ErrorKind::Invariant,
              "backward root must be a scalar node");
        root->ensure_grad();
        root->grad[0] += T(1);
        for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
    }

    size_t n_ops() const { return ops_.size(); }

private:
    bool recording_;
    std::vector<std::function<void()>> ops_;
};

// ---------------------------------------------------------------------------
// Differentiable ops
// ---------------------------------------------------------------------------

template <typename T>
NodePtr<T> conv3d(Tape<T>& tape, const NodePtr<T>& x, const NodePtr<T>& w, const NodePtr<T>& b,
                  int64_t sh, int64_t sw, int64_t sd) {
    Tensor<T> y = conv3d_forward(x->value, w->value, b->value, sh, sw, sd);
    const bool needs = x->needs_grad || w->needs_grad || b->needs_grad;
    return tape.emit(std::move(y), needs, [=](const NodePtr<T>& out) {
        return [=]() {
            Tensor<T>* dx = nullptr;
            if (x->needs_grad) {
                x->ensure_grad();
                dx = &x->grad;
            }
            w->ensure_grad();
            b->ensure_grad();
            conv3d_backward(x->value, w->value, out->grad, sh, sw, sd, dx,
                            w->needs_grad ? &w->grad : nullptr,
                            b->needs_grad ? &b->grad : nullptr);
        };
    });
}

template <typename T>
NodePtr<T> conv2d(Tape<T>& tape, const NodePtr<T>& x, const NodePtr<T>& w, const NodePtr<T>& b,
                  int64_t sh, int64_t sw) {
    Tensor<T> y = conv2d_forward(x->value, w->value, b->value, sh, sw);
    const bool needs = x->needs_grad || w->needs_grad || b->needs_grad;
    return tape.emit(std::move(y), needs, [=](const NodePtr<T>& out) {
        return [=]() {
            Tensor<T>* dx = nullptr;
            if (x->needs_grad) {
                x->ensure_grad();
                dx = &x->grad;
            }
            w->ensure_grad();
            b->ensure_grad();
            conv2d_backward(x->value, w->value, out->grad, sh, sw, dx,
                            w->needs_grad ? &w->grad : nullptr,
                            b->needs_grad ? &b->grad : nullptr);
        };
    });
}

template <typename T>
NodePtr<T> instance_norm(Tape<T>& tape, const NodePtr<T>& x, const NodePtr<T>& gamma,
                         const NodePtr<T>& beta, T eps) {
    auto cache = std::make_shared<InstanceNormCache<T>>();
    Tensor<T> y = instance_norm_forward(x->value, gamma->value, beta->value, eps,
                                        tape.recording() ? cache.get() : nullptr);
    const bool needs = x->needs_grad || gamma->needs_grad || beta->needs_grad;
    return tape.emit(std::move(y), needs, [=](const NodePtr<T>& out) {
        return [=]() {
            Tensor<T>* dx = nullptr;
            if (x->needs_grad) {
                x->ensure_grad();
                dx = &x->grad;
            }
            gamma->ensure_grad();
            beta->ensure_grad();
            instance_norm_backward(x->value, gamma->value, *cache, out->grad, dx,
                                   gamma->needs_grad ? &gamma->grad : nullptr,
                                   beta->needs_grad ? &beta->grad : nullptr);
        };
    });
}

template <typename T>
NodePtr<T> relu(Tape<T>& tape, const NodePtr<T>& x) {
    Tensor<T> y(x->value.shape());
    for (int64_t i = 0; i < y.numel(); ++i) y[i] = x->value[i] > T(0) ? x->value[i] : T(0);
    return tape.emit(std::move(y), x->needs_grad, [=](const NodePtr<T>& out) {
        return [=]() {
            x->ensure_grad();
            for (int64_t i = 0; i < x->grad.numel(); ++i)
                if (x->value[i] > T(0)) x->grad[i] += out->grad[i];
        };
    });
}

template <typename T>
NodePtr<T> sigmoid(Tape<T>& tape, const NodePtr<T>& x) {
    // Clamped away from {0,1} so saturated logits keep the open-interval
    // output contract at 32-bit.
    constexpr T kLo = T(1e-7), kHi = T(1) - T(1e-7);
    Tensor<T> y(x->value.shape());
    for (int64_t i = 0; i < y.numel(); ++i)
        y[i] = std::clamp(T(1) / (T(1) + std::exp(-x->value[i])), kLo, kHi);
    return tape.emit(std::move(y), x->needs_grad, [=](const NodePtr<T>& out) {
        return [=]() {
            x->ensure_grad();
            for (int64_t i = 0; i < x->grad.numel(); ++i) {
                const T s = out->value[i];
                x->grad[i] += out->grad[i] * s * (T(1) - s);
            }
        };
    });
}

template <typename T>
NodePtr<T> add(Tape<T>& tape, const NodePtr<T>& a, const NodePtr<T>& b) {
    check(a->value.same_shape(b->value), ErrorKind::Shape, "add: shape mismatch");
    Tensor<T> y(a->value.shape());
    for (int64_t i = 0; i < y.numel(); ++i) y[i] = a->value[i] + b->value[i];
    return tape.emit(std::move(y), a->needs_grad || b->needs_grad, [=](const NodePtr<T>& out) {
        return [=]() {
            if (a->needs_grad) {
                a->ensure_grad();
                for (int64_t i = 0; i < a->grad.numel(); ++i) a->grad[i] += out->grad[i];
            }
            if (b->needs_grad) {
                b->ensure_grad();
                for (int64_t i = 0; i < b->grad.numel(); ++i) b->grad[i] += out->grad[i];
            }
        };
    });
}

// Depth-wise adaptive average pooling of size 1: (B,C,H,W,D) -> (B,C,H,W).
template <typename T>
NodePtr<T> depth_mean(Tape<T>& tape, const NodePtr<T>& x) {
    check(x->value.dim() == 5, ErrorKind::Shape, "depth_mean expects a 5-axis tensor");
    const int64_t D = x->value.size(4);
    Tensor<T> y = depth_mean_forward(x->value);
    return tape.emit(std::move(y), x->needs_grad, [=](const NodePtr<T>& out) {
        return [=]() {
            x->ensure_grad();
            depth_mean_backward(out->grad, D, &x->grad);
        };
    });
}

template <typename T>
NodePtr<T> adaptive_max_pool2d(Tape<T>& tape, const NodePtr<T>& x, int64_t Ho, int64_t Wo) {
    if (x->value.size(2) == Ho && x->value.size(3) == Wo) return x;  // pass-through
    auto argmax = std::make_shared<Tensor<int64_t>>();
    Tensor<T> y = adaptive_max_pool2d_forward(x->value, Ho, Wo, argmax.get());
    const int64_t H = x->value.size(2), W = x->value.size(3);
    return tape.emit(std::move(y), x->needs_grad, [=](const NodePtr<T>& out) {
        return [=]() {
            x->ensure_grad();
            adaptive_max_pool2d_backward(out->grad, *argmax, H, W, &x->grad);
        };
    });
}

template <typename T>
NodePtr<T> upsample2x(Tape<T>& tape, const NodePtr<T>& x) {
    Tensor<T> y = upsample2x_forward(x->value);
    return tape.emit(std::move(y), x->needs_grad, [=](const NodePtr<T>& out) {
        return [=]() {
            x->ensure_grad();
            upsample2x_backward(out->grad, &x->grad);
        };
    });
}

template <typename T>
NodePtr<T> concat_channels(Tape<T>& tape, const std::vector<NodePtr<T>>& xs) {
    check(!xs.empty(), ErrorKind::Shape, "concat of empty list");
    const auto& s0 = xs[0]->value.shape();
    int64_t c_total = 0;
    bool needs = false;
    for (const auto& x : xs) {
        const auto& s = x->value.shape();
        check(s.size() == s0.size() && s[0] == s0[0], ErrorKind::Shape,
              "concat: rank/batch mismatch");
        for (size_t a = 2; a < s.size(); ++a)
            check(s[a] == s0[a], ErrorKind::Shape, "concat: spatial dims mismatch");
        c_total += s[1];
        needs = needs || x->needs_grad;
    }
    std::vector<int64_t> out_shape = s0;
    out_shape[1] = c_total;
    Tensor<T> y(out_shape);
    const int64_t B = s0[0];
    int64_t spatial = 1;
    for (size_t a = 2; a < s0.size(); ++a) spatial *= s0[a];
    for (int64_t b = 0; b < B; ++b) {
        int64_t c_off = 0;
        for (const auto& x : xs) {
            const int64_t c = x->value.size(1);
            std::copy(x->value.data() + b * c * spatial, x->value.data() + (b + 1) * c * spatial,
                      y.data() + (b * c_total + c_off) * spatial);
            c_off += c;
        }
    }
    return tape.emit(std::move(y), needs, [=](const NodePtr<T>& out) {
        return [=]() {
            for (int64_t b = 0; b < B; ++b) {
                int64_t c_off = 0;
                for (const auto& x : xs) {
                    const int64_t c = x->value.size(1);
                    if (x->needs_grad) {
                        x->ensure_grad();
                        const T* src = out->grad.data() + (b * c_total + c_off) * spatial;
                        T* dst = x->grad.data() + b * c * spatial;
                        for (int64_t i = 0; i < c * spatial; ++i) dst[i] += src[i];
                    }
                    c_off += c;
                }
            }
        };
    });
}

// Resizes every feature map to the elementwise-minimum en-face size using
// adaptive max pooling; inputs already at the minimum pass through unchanged.
template <typename T>
std::vector<NodePtr<T>> resize_to_min(Tape<T>& tape, const std::vector<NodePtr<T>>& xs) {
    check(!xs.empty(), ErrorKind::Shape, "resize_to_min of empty list");
    int64_t min_h = xs[0]->value.size(2), min_w = xs[0]->value.size(3);
    for (const auto& x : xs) {
        check(x->value.dim() == 4, ErrorKind::Shape, "resize_to_min expects 2D feature maps");
        check(x->value.size(0) == xs[0]->value.size(0), ErrorKind::Shape,
              "resize_to_min: batch mismatch");
        min_h = std::min(min_h, x->value.size(2));
        min_w = std::min(min_w, x->value.size(3));
    }
    std::vector<NodePtr<T>> out;
    out.reserve(xs.size());
    for (const auto& x : xs) out.push_back(adaptive_max_pool2d(tape, x, min_h, min_w));
    return out;
}

}  // namespace hetfuse::nn
