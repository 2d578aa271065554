#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace spectlv {

using TensorShape = std::vector<std::int64_t>;

inline std::int64_t shape_count(const TensorShape& s) {
    std::int64_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

// n-dimensional value with an optional gradient slot of the same shape.
template <typename T>
struct Tensor {
    TensorShape shape;
    std::vector<T> v;
    std::vector<T> g;
    bool requires_grad = false;
    std::string name;

    Tensor() = default;
    explicit Tensor(TensorShape s, T fill = T(0))
        : shape(std::move(s)), v(static_cast<std::size_t>(shape_count(shape)), fill) {}

    std::int64_t count() const { return static_cast<std::int64_t>(v.size()); }

    void ensure_grad() {
        if (g.size() != v.size()) g.assign(v.size(), T(0));
    }
    void zero_grad() { g.assign(v.size(), T(0)); }

    void check_shape() const {
        if (static_cast<std::int64_t>(v.size()) != shape_count(shape))
            throw std::runtime_error("Tensor " + name + ": values do not match shape");
    }
};

}  // namespace spectlv
