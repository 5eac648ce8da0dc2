#pragma once

#include <cmath>

#include "hetfuse/nn/graph.hpp"

namespace hetfuse::nn {

// Sum of soft-Dice loss and mean binary cross-entropy on a probability map.
//   dice = 1 - (2*sum(p*g) + eps) / (sum(p) + sum(g) + eps),   eps = 1e-5
//   bce  = mean(-g*log(p) - (1-g)*log(1-p)),  p clamped to [1e-7, 1-1e-7]
// Sums run over the whole batch. Returns a scalar node.
template <typename T>
NodePtr<T> dice_bce_loss(Tape<T>& tape, const NodePtr<T>& pred, const Tensor<T>& target) {
    check(pred->value.same_shape(target), ErrorKind::Shape,
          "dice_bce_loss: pred/target shape mismatch");
    const int64_t n = pred->value.numel();
    check(n > 0, ErrorKind::Shape, "dice_bce_loss on empty tensors");
    constexpr double kDiceEps = 1e-5;
    constexpr double kClamp = 1e-7;

    double sum_p = 0.0, sum_g = 0.0, sum_pg = 0.0, bce = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double p = static_cast<double>(pred->value[i]);
        const double g = static_cast<double>(target[i]);
        sum_p += p;
        sum_g += g;
        sum_pg += p * g;
        const double pc = std::min(1.0 - kClamp, std::max(kClamp, p));
        bce += -(g * std::log(pc) + (1.0 - g) * std::log(1.0 - pc));
    }
    const double den = sum_p + sum_g + kDiceEps;
    const double num = 2.0 * sum_pg + kDiceEps;
    const double loss = (1.0 - num / den) + bce / static_cast<double>(n);

    Tensor<T> value({1}, static_cast<T>(loss));
    return tape.emit(std::move(value), pred->needs_grad, [=](const NodePtr<T>& out) {
        return [=]() {
            pred->ensure_grad();
            const T upstream = out->grad[0];
            const double inv_n = 1.0 / static_cast<double>(n);
            for (int64_t i = 0; i < n; ++i) {
                const double p = static_cast<double>(pred->value[i]);
                const double g = static_cast<double>(target[i]);
                // d(dice)/dp_i = num/den^2 - 2 g_i / den
                double grad = num / (den * den) - 2.0 * g / den;
                const double pc = std::min(1.0 - kClamp, std::max(kClamp, p));
                if (p > kClamp && p < 1.0 - kClamp) grad += inv_n * (-g / pc + (1.0 - g) / (1.0 - pc));
                pred->grad[i] += upstream * static_cast<T>(grad);
            }
        };
    });
}

}  // namespace hetfuse::nn
