#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "gmil/autodiff.hpp"
#include "gmil/graph.hpp"
#include "gmil/rng.hpp"

namespace gmil {

// A_hat = D^{-1/2} (A + I) D^{-1/2}, dense. Edge weights, when present,
// populate A before normalization.
Matrix normalize_adjacency(const WsiGraph& graph);

// Per-graph constants reused across epochs.
struct GraphContext {
    Matrix norm_adj;    // N x N, GCN propagation
    Matrix attn_mask;   // N x N, 1 on edges and diagonal
    Matrix msg_weight;  // N x N, edge weights (1 where unweighted), 1 on diagonal
};
GraphContext make_graph_context(const WsiGraph& graph);

enum class GnnKind { Gcn, Gat };
enum class Readout { Max, Mean, None };

struct GcnLayer {
    autodiff::Param weight;  // d_in x d_out
    autodiff::Act activation = autodiff::Act::Relu;
};

struct GatLayer {
    autodiff::Param weight;  // d_in x d_out
    autodiff::Param attn;    // 2*d_out x 1, [source half; target half]
    autodiff::Act activation = autodiff::Act::Elu;
    static constexpr double kLeakySlope = 0.2;
};

// L-layer stack. GCN uses ReLU throughout; GAT uses ELU on hidden layers and
// sigmoid on the last (single attention head, self-loops in attention).
class GnnStack {
public:
    static GnnStack create(GnnKind kind, std::size_t layers, std::size_t d_in,
                           std::size_t hidden, Readout readout, Rng& rng,
                           int param_group = 0);

    // H^0 = node features; returns H^L (readout None) or the 1 x D readout.
    autodiff::Tape::Id forward(autodiff::Tape& tape, autodiff::Tape::Id features,
                               const GraphContext& ctx);

    // Attention rows of the given GAT layer for the current features; test
    // and inspection hook.
    autodiff::Tape::Id gat_attention(autodiff::Tape& tape, autodiff::Tape::Id features,
                                     const GraphContext& ctx, std::size_t layer);

    std::vector<autodiff::Param*> params();
    GnnKind kind() const { return kind_; }
    Readout readout() const { return readout_; }
    std::size_t layer_count() const { return gcn_.size() + gat_.size(); }
    std::size_t output_dim() const { return hidden_; }

private:
    autodiff::Tape::Id gat_layer_forward(autodiff::Tape& tape, autodiff::Tape::Id h,
                                         const GraphContext& ctx, GatLayer& layer);

    GnnKind kind_ = GnnKind::Gcn;
    Readout readout_ = Readout::None;
    std::size_t hidden_ = 0;
    std::vector<GcnLayer> gcn_;
    std::vector<GatLayer> gat_;
};

// Glorot-uniform init, deterministic per rng state.
Matrix glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng);

}  // namespace gmil
