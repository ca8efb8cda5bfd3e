#include "gmil/gnn.hpp"

#include <cmath>

#include "gmil/errors.hpp"

namespace gmil {

using autodiff::Act;
using autodiff::Tape;

Matrix normalize_adjacency(const WsiGraph& graph) {
    const std::size_t n = graph.node_count();
    Matrix a(n, n);
    for (std::size_t e = 0; e < graph.edges.size(); ++e) {
        auto [i, j] = graph.edges[e];
        double w = graph.edge_weights.empty() ? 1.0 : graph.edge_weights[e];
        a(i, j) = w;
        a(j, i) = w;
    }
    for (std::size_t i = 0; i < n; ++i) a(i, i) += 1.0;  // A + I
    std::vector<double> inv_sqrt(n);
    for (std::size_t i = 0; i < n; ++i) {
        double deg = 0.0;
        for (std::size_t j = 0; j < n; ++j) deg += a(i, j);
        inv_sqrt[i] = deg > 0.0 ? 1.0 / std::sqrt(deg) : 0.0;
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a(i, j) *= inv_sqrt[i] * inv_sqrt[j];
    return a;
}

GraphContext make_graph_context(const WsiGraph& graph) {
    const std::size_t n = graph.node_count();
    GraphContext ctx;
    ctx.norm_adj = normalize_adjacency(graph);
    ctx.attn_mask = Matrix::identity(n);
    ctx.msg_weight = Matrix::identity(n);
    for (std::size_t e = 0; e < graph.edges.size(); ++e) {
        auto [i, j] = graph.edges[e];
        double w = graph.edge_weights.empty() ? 1.0 : graph.edge_weights[e];
        ctx.attn_mask(i, j) = 1.0;
        ctx.attn_mask(j, i) = 1.0;
        ctx.msg_weight(i, j) = w;
        ctx.msg_weight(j, i) = w;
    }
    return ctx;
}

Matrix glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    for (std::size_t i = 0; i < m.size(); ++i)
        m.data()[i] = (2.0 * rng.uniform() - 1.0) * limit;
    return m;
}

GnnStack GnnStack::create(GnnKind kind, std::size_t layers, std::size_t d_in,
                          std::size_t hidden, Readout readout, Rng& rng,
                          int param_group) {
    if (layers < 1) throw DataError("gnn stack needs at least one layer");
    GnnStack stack;
    stack.kind_ = kind;
    stack.readout_ = readout;
    stack.hidden_ = hidden;
    std::size_t in = d_in;
    for (std::size_t l = 0; l < layers; ++l) {
        bool last = l + 1 == layers;
        if (kind == GnnKind::Gcn) {
            GcnLayer layer{autodiff::Param("gcn" + std::to_string(l) + ".W",
                                           glorot_uniform(in, hidden, rng), param_group),
                           Act::Relu};
            stack.gcn_.push_back(std::move(layer));
        } else {
            GatLayer layer{autodiff::Param("gat" + std::to_string(l) + ".W",
                                           glorot_uniform(in, hidden, rng), param_group),
                           autodiff::Param("gat" + std::to_string(l) + ".a",
                                           glorot_uniform(2 * hidden, 1, rng), param_group),
                           last ? Act::Sigmoid : Act::Elu};
            stack.gat_.push_back(std::move(layer));
        }
        in = hidden;
    }
    return stack;
}

namespace {

// Selectors extracting the two halves of the stacked attention vector.
Matrix half_selector(std::size_t d_out, bool second) {
    Matrix s(d_out, 2 * d_out);
    for (std::size_t i = 0; i < d_out; ++i) s(i, second ? d_out + i : i) = 1.0;
    return s;
}

struct GatAttention {
    Tape::Id alpha;
    Tape::Id hw;
};

GatAttention gat_alpha(Tape& tape, Tape::Id h, const GraphContext& ctx,
                       GatLayer& layer) {
    const std::size_t n = ctx.attn_mask.rows();
    const std::size_t d_out = layer.weight.value.cols();
    Tape::Id w = tape.param(layer.weight);
    Tape::Id a = tape.param(layer.attn);
    Tape::Id hw = tape.matmul(h, w);  // N x d_out
    Tape::Id a_src = tape.matmul(tape.constant(half_selector(d_out, false)), a);
    Tape::Id a_dst = tape.matmul(tape.constant(half_selector(d_out, true)), a);
    Tape::Id s_src = tape.matmul(hw, a_src);  // N x 1
    Tape::Id s_dst = tape.matmul(hw, a_dst);
    // e[v][u] = s_src[v] + s_dst[u]
    Tape::Id e = tape.add(tape.matmul(s_src, tape.constant(Matrix::ones(1, n))),
                          tape.matmul(tape.constant(Matrix::ones(n, 1)),
                                      tape.transpose(s_dst)));
    e = tape.activation(Act::LeakyRelu, e, GatLayer::kLeakySlope);
    return {tape.masked_softmax_rows(e, ctx.attn_mask), hw};
}

}  // namespace

Tape::Id GnnStack::gat_layer_forward(Tape& tape, Tape::Id h, const GraphContext& ctx,
                                     GatLayer& layer) {
    auto [alpha, hw] = gat_alpha(tape, h, ctx, layer);
    Tape::Id msgs = tape.mul_const(alpha, ctx.msg_weight);
    Tape::Id agg = tape.matmul(msgs, hw);
    return tape.activation(layer.activation, agg);
}

Tape::Id GnnStack::forward(Tape& tape, Tape::Id features, const GraphContext& ctx) {
    Tape::Id h = features;
    if (kind_ == GnnKind::Gcn) {
        for (GcnLayer& layer : gcn_) {
            Tape::Id w = tape.param(layer.weight);
            Tape::Id prop = tape.matmul(tape.constant(ctx.norm_adj), tape.matmul(h, w));
            h = tape.activation(layer.activation, prop);
        }
    } else {
        for (GatLayer& layer : gat_) h = gat_layer_forward(tape, h, ctx, layer);
    }
    switch (readout_) {
        case Readout::None: return h;
        case Readout::Max: return tape.col_max(h);
        case Readout::Mean: return tape.col_mean(h);
    }
    throw InternalError("unknown readout");
}

Tape::Id GnnStack::gat_attention(Tape& tape, Tape::Id features, const GraphContext& ctx,
                                 std::size_t layer) {
    if (kind_ != GnnKind::Gat || layer >= gat_.size())
        throw InternalError("gat_attention: not a GAT stack or layer out of range");
    Tape::Id h = features;
    for (std::size_t l = 0; l < layer; ++l) h = gat_layer_forward(tape, h, ctx, gat_[l]);
    return gat_alpha(tape, h, ctx, gat_[layer]).alpha;
}

std::vector<autodiff::Param*> GnnStack::params() {
    std::vector<autodiff::Param*> out;
    for (GcnLayer& l : gcn_) out.push_back(&l.weight);
    for (GatLayer& l : gat_) {
        out.push_back(&l.weight);
        out.push_back(&l.attn);
    }
    return out;
}

}  // namespace gmil
