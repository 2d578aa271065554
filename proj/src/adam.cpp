#include "spectlv/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace spectlv {

template <typename T>
void adam_step(const std::vector<Tensor<T>*>& params, AdamState<T>& state) {
    if (state.m.size() != params.size())
        throw std::runtime_error("adam_step: state not attached to this parameter list");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor<T>& p = *params[pi];
        if (!p.requires_grad) continue;
        if (p.g.size() != p.v.size())
            throw std::runtime_error("adam_step: missing gradient for " + p.name);
        auto& m = state.m[pi];
        auto& v = state.v[pi];
        if (m.size() != p.v.size())
            throw std::runtime_error("adam_step: moment size mismatch for " + p.name);
        for (std::size_t i = 0; i < p.v.size(); ++i) {
            const double g = static_cast<double>(p.g[i]);
            if (!std::isfinite(g))
                throw std::runtime_error("adam_step: non-finite gradient in " + p.name);
            const double mi = state.beta1 * m[i] + (1.0 - state.beta1) * g;
            const double vi = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
            m[i] = static_cast<T>(mi);
            v[i] = static_cast<T>(vi);
            const double mhat = mi / bc1;
            const double vhat = vi / bc2;
            p.v[i] = static_cast<T>(p.v[i] - state.lr * mhat / (std::sqrt(vhat) + state.eps));
        }
    }
}

template void adam_step<float>(const std::vector<Tensor<float>*>&, AdamState<float>&);
template void adam_step<double>(const std::vector<Tensor<double>*>&, AdamState<double>&);

}  // namespace spectlv
