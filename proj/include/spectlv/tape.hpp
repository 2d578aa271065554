#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>

#include "spectlv/tensor.hpp"

namespace spectlv {

// Reverse-mode tape. Operations execute eagerly and record a backward
// closure; backward() replays the closures in reverse. Gradients are skipped
// wherever no input requires them, which is how stage-wise weight freezing
// avoids the cost of unused gradient computation.
//
// One tape instance serves one forward/backward pass and is single-threaded
// by contract; the conv kernels it calls may split their inner loops across
// workers without affecting results.
template <typename T>
class Tape {
public:
    using Id = std::int32_t;

    // External tensor (parameter or network input); not owned.
    Id leaf(Tensor<T>* t);
    // Tape-owned constant without gradient.
    Id constant(TensorShape shape, std::vector<T> values);

    // x [N,Ci,L,W,H], w [Co,Ci,k,k,k], b [Co]
    Id conv3d(Id x, Id w, Id b, int stride, int pad);
    // x [N,Ci,L,W,H], w [Ci,Co,2,2,2], b [Co]; doubles spatial dims
    Id deconv3d(Id x, Id w, Id b);
    // x [N,F], w [F,M], b [M]
    Id dense(Id x, Id w, Id b);
    // slope: [C], matched against dim 1 of x
    Id prelu(Id x, Id slope);
    Id sigmoid(Id x);
    // inverted dropout; identity when !training. keep_prob in (0,1].
    Id dropout(Id x, double keep_prob, std::uint64_t seed, bool training);
    Id flatten(Id x);  // [N, rest...] -> [N, prod(rest)]
    Id concat_channels(Id a, Id b);

    Id add(Id a, Id b);   // elementwise, same shape
    Id scale(Id a, T k);
    // sum over all elements of stable sigmoid cross-entropy against a fixed
    // binary target; throws on non-finite logits
    Id bce_with_logits_sum(Id logits, const std::vector<T>& target);
    // sum of squared entries over a parameter list (L2 regularizer)
    Id l2_sum(const std::vector<Id>& params);
    // scalar dot product against fixed weights (validation reductions)
    Id weighted_sum(Id x, const std::vector<T>& weights);

    // params [N,12] (rows of the 3x4 matrix, row-major) -> grid [N,3,L,W,H]
    // of source coordinates in the normalized [-1,1] frame
    Id affine_grid(Id params, std::int64_t l, std::int64_t w, std::int64_t h);
    // x [N,C,Ls,Ws,Hs], grid [N,3,L,W,H] -> [N,C,L,W,H]; trilinear kernel,
    // zero outside the source volume; differentiable in x and grid
    Id grid_sample(Id x, Id grid);

    void backward(Id loss);

    const Tensor<T>& val(Id id) const { return tensor(id); }
    Tensor<T>& mutable_val(Id id) { return tensor(id); }
    bool needs_grad(Id id) const { return nodes_[id].needs; }
    std::size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

private:
    struct Node {
        Tensor<T> own;
        Tensor<T>* ext = nullptr;
        bool needs = false;
        std::function<void(Tape&)> bwd;
    };

    Tensor<T>& tensor(Id id) { return nodes_[id].ext ? *nodes_[id].ext : nodes_[id].own; }
    const Tensor<T>& tensor(Id id) const {
        return nodes_[id].ext ? *nodes_[id].ext : nodes_[id].own;
    }
    Id push(Node n) {
        nodes_.push_back(std::move(n));
        return static_cast<Id>(nodes_.size() - 1);
    }
    Id result_node(TensorShape shape, bool needs);

    std::deque<Node> nodes_;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace spectlv
