#pragma once

#include <cstddef>
#include <vector>

#include "gmil/autodiff.hpp"
#include "gmil/rng.hpp"

namespace gmil {

// Forward products of one bag. attention is 1 x N (empty Id -1 for
// aggregators without per-instance scores).
struct BagOutput {
    autodiff::Tape::Id prediction = -1;  // 1 x 1 in (0,1)
    autodiff::Tape::Id embedding = -1;   // 1 x d bag embedding B
    autodiff::Tape::Id attention = -1;   // 1 x N
    std::size_t critical_index = 0;      // DSMIL stream-1 argmax
};

// Attention pooling: a = softmax(w^T tanh(V h_k^T)), B = sum a_k h_k,
// prediction = sigmoid(g(B)). Non-gated variant.
struct AbmilParams {
    autodiff::Param proj;       // d x d_att (V)
    autodiff::Param attn;       // d_att x 1 (w)
    autodiff::Param head_w;     // d x 1
    autodiff::Param head_b;     // 1 x 1

    static AbmilParams create(std::size_t d, std::size_t d_att, Rng& rng,
                              int param_group = 1);
    BagOutput forward(autodiff::Tape& tape, autodiff::Tape::Id instances);
    std::vector<autodiff::Param*> params();
};

// Dual-stream: instance scores pick a critical instance (argmax, ties to the
// lowest index); queries attend to the critical query; final logit is the
// mean of the two stream logits.
struct DsmilParams {
    autodiff::Param inst_cls;   // d x 1 (W_ic)
    autodiff::Param query;      // d x d_q (W_q)
    autodiff::Param value;      // d x d_v (W_v)
    autodiff::Param head_w;     // d_v x 1
    autodiff::Param head_b;     // 1 x 1

    static DsmilParams create(std::size_t d, std::size_t d_q, std::size_t d_v,
                              Rng& rng, int param_group = 1);
    BagOutput forward(autodiff::Tape& tape, autodiff::Tape::Id instances);
    std::vector<autodiff::Param*> params();
};

// Linear head on a pooled graph vector (graph-only baselines).
struct PooledHeadParams {
    autodiff::Param head_w;  // d x 1
    autodiff::Param head_b;  // 1 x 1

    static PooledHeadParams create(std::size_t d, Rng& rng, int param_group = 1);
    BagOutput forward(autodiff::Tape& tape, autodiff::Tape::Id pooled);
    std::vector<autodiff::Param*> params();
};

}  // namespace gmil
