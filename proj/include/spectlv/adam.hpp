#pragma once

#include <vector>

#include "spectlv/tensor.hpp"

namespace spectlv {

// Adam with bias correction. One state covers one parameter list; m/v are
// laid out per parameter in registration order.
template <typename T>
struct AdamState {
    std::int64_t step = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::vector<std::vector<T>> m, v;

    void attach(const std::vector<Tensor<T>*>& params) {
        m.clear();
        v.clear();
        for (const auto* p : params) {
            m.emplace_back(p->v.size(), T(0));
            v.emplace_back(p->v.size(), T(0));
        }
    }
};

// Applies one update from the accumulated gradients of `params` (those with
// requires_grad; frozen tensors are left untouched, including their moments).
// Throws naming the parameter if a gradient is non-finite.
template <typename T>
void adam_step(const std::vector<Tensor<T>*>& params, AdamState<T>& state);

extern template void adam_step<float>(const std::vector<Tensor<float>*>&, AdamState<float>&);
extern template void adam_step<double>(const std::vector<Tensor<double>*>&, AdamState<double>&);

}  // namespace spectlv
