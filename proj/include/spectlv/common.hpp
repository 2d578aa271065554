#pragma once

#include <cstdint>
#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace spectlv {

// Deterministic RNG. All randomness in the project flows from explicit
// seeds through this type; distribution algorithms are spelled out here so
// sequences do not depend on the standard library implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t bits() { return gen_(); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // integer in [0, n)
    std::uint64_t below(std::uint64_t n) {
        // modulo bias is irrelevant at the sizes used here
        return gen_() % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller, one value per call (cached partner)
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * M_PI * u2);
        have_spare_ = true;
        return r * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Poisson via Knuth product for small means, normal approximation above.
    std::uint32_t poisson(double lambda) {
        if (lambda <= 0.0) return 0;
        if (lambda < 64.0) {
            double limit = std::exp(-lambda);
            double prod = uniform();
            std::uint32_t k = 0;
            while (prod > limit) {
                prod *= uniform();
                ++k;
            }
            return k;
        }
        double v = std::round(normal(lambda, std::sqrt(lambda)));
        return v < 0.0 ? 0u : static_cast<std::uint32_t>(v);
    }

    template <typename T>
    void shuffle(std::vector<T>& xs) {
        for (std::size_t i = xs.size(); i > 1; --i)
            std::swap(xs[i - 1], xs[below(i)]);
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Worker count for data-parallel loops: min(hardware, SPECTLV_THREADS).
int worker_count();

// Runs fn(begin, end) over disjoint chunks of [0, n). Each index is handled
// by exactly one worker, so results do not depend on the thread count.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn);

}  // namespace spectlv
