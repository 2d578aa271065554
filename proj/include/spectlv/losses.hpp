#pragma once

#include <vector>

#include "spectlv/tape.hpp"

namespace spectlv {

// Sigmoid cross-entropy summed over voxels plus l2_coeff * ||W||^2 over the
// given parameter nodes. Targets are binary.
template <typename T>
typename Tape<T>::Id loss_vnet(Tape<T>& tape, typename Tape<T>::Id logits,
                               const std::vector<T>& target,
                               const std::vector<typename Tape<T>::Id>& w1, T l2_coeff) {
    auto ce = tape.bce_with_logits_sum(logits, target);
    if (w1.empty() || l2_coeff == T(0)) return ce;
    return tape.add(ce, tape.scale(tape.l2_sum(w1), l2_coeff));
}

// Same form with the warped output and the deformation-module weights.
template <typename T>
typename Tape<T>::Id loss_deformation(Tape<T>& tape, typename Tape<T>::Id warped_logits,
                                      const std::vector<T>& target,
                                      const std::vector<typename Tape<T>::Id>& w2, T l2_coeff) {
    return loss_vnet(tape, warped_logits, target, w2, l2_coeff);
}

// A * CE(Y', Y) + B * CE(Y'', Y) + C * l2_coeff * (||W1||^2 + ||W2||^2).
// Throws on negative A, B, or C.
template <typename T>
typename Tape<T>::Id loss_global(Tape<T>& tape, typename Tape<T>::Id logits,
                                 typename Tape<T>::Id warped_logits,
                                 const std::vector<T>& target,
                                 const std::vector<typename Tape<T>::Id>& w1,
                                 const std::vector<typename Tape<T>::Id>& w2, T a, T b, T c,
                                 T l2_coeff) {
    if (a < T(0) || b < T(0) || c < T(0))
        throw std::runtime_error("loss_global: A, B, C must be non-negative");
    auto total = tape.add(tape.scale(tape.bce_with_logits_sum(logits, target), a),
                          tape.scale(tape.bce_with_logits_sum(warped_logits, target), b));
    std::vector<typename Tape<T>::Id> all = w1;
    all.insert(all.end(), w2.begin(), w2.end());
    if (!all.empty() && c * l2_coeff != T(0))
        total = tape.add(total, tape.scale(tape.l2_sum(all), c * l2_coeff));
    return total;
}

}  // namespace spectlv
