#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <vector>

#include "spectlv/common.hpp"
#include "spectlv/tape.hpp"
#include "spectlv/tensor.hpp"

namespace spectlv::testing {

// Builds a graph over the registered leaves and returns the scalar loss id.
using GraphBuilder = std::function<Tape<double>::Id(Tape<double>&)>;

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::int64_t checked = 0;
};

// Central finite differences (step 1e-3) against the tape's analytic
// gradients, perturbing every element of every tensor in `inputs`.
// Error metric: |a - n| / max(1, |a|, |n|).
inline GradCheckResult grad_check(std::vector<Tensor<double>*> inputs,
                                  const GraphBuilder& build, double step = 1e-3) {
    auto eval = [&]() {
        Tape<double> tape;
        return tape.val(build(tape)).v[0];
    };
    for (auto* t : inputs) {
        t->requires_grad = true;
        t->zero_grad();
        t->ensure_grad();
    }
    {
        Tape<double> tape;
        auto loss = build(tape);
        tape.backward(loss);
    }
    GradCheckResult res;
    for (auto* t : inputs) {
        for (std::size_t i = 0; i < t->v.size(); ++i) {
            const double keep = t->v[i];
            t->v[i] = keep + step;
            const double fp = eval();
            t->v[i] = keep - step;
            const double fm = eval();
            t->v[i] = keep;
            const double numeric = (fp - fm) / (2.0 * step);
            const double analytic = t->g[i];
            const double denom = std::max({1.0, std::abs(numeric), std::abs(analytic)});
            res.max_rel_err = std::max(res.max_rel_err, std::abs(numeric - analytic) / denom);
            res.checked += 1;
        }
    }
    return res;
}

inline Tensor<double> random_tensor(TensorShape shape, Rng& rng, double scale = 1.0) {
    Tensor<double> t(std::move(shape));
    for (auto& v : t.v) v = rng.normal(0.0, scale);
    return t;
}

inline std::vector<double> random_weights(std::int64_t n, Rng& rng) {
    std::vector<double> w(static_cast<std::size_t>(n));
    for (auto& v : w) v = rng.normal(0.0, 1.0);
    return w;
}

// scratch directory helper for IO tests
inline std::filesystem::path fresh_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace spectlv::testing
