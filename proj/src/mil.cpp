#include "gmil/mil.hpp"

#include "gmil/errors.hpp"
#include "gmil/gnn.hpp"

namespace gmil {

using autodiff::Act;
using autodiff::Tape;

AbmilParams AbmilParams::create(std::size_t d, std::size_t d_att, Rng& rng,
                                int param_group) {
    return AbmilParams{
        autodiff::Param("abmil.V", glorot_uniform(d, d_att, rng), param_group),
        autodiff::Param("abmil.w", glorot_uniform(d_att, 1, rng), param_group),
        autodiff::Param("abmil.head_w", glorot_uniform(d, 1, rng), param_group),
        autodiff::Param("abmil.head_b", Matrix(1, 1), param_group)};
}

BagOutput AbmilParams::forward(Tape& tape, Tape::Id instances) {
    const Matrix& h = tape.value(instances);
    if (h.rows() < 1) throw DataError("abmil: empty bag");
    Tape::Id scores = tape.matmul(tape.activation(Act::Tanh,
                                                  tape.matmul(instances, tape.param(proj))),
                                  tape.param(attn));          // N x 1
    Tape::Id a = tape.softmax_rows(tape.transpose(scores));   // 1 x N
    Tape::Id bag = tape.matmul(a, instances);                 // 1 x d
    Tape::Id logit = tape.add(tape.matmul(bag, tape.param(head_w)), tape.param(head_b));
    BagOutput out;
    out.prediction = tape.activation(Act::Sigmoid, logit);
    out.embedding = bag;
    out.attention = a;
    return out;
}

std::vector<autodiff::Param*> AbmilParams::params() {
    return {&proj, &attn, &head_w, &head_b};
}

DsmilParams DsmilParams::create(std::size_t d, std::size_t d_q, std::size_t d_v,
                                Rng& rng, int param_group) {
    return DsmilParams{
        autodiff::Param("dsmil.W_ic", glorot_uniform(d, 1, rng), param_group),
        autodiff::Param("dsmil.W_q", glorot_uniform(d, d_q, rng), param_group),
        autodiff::Param("dsmil.W_v", glorot_uniform(d, d_v, rng), param_group),
        autodiff::Param("dsmil.head_w", glorot_uniform(d_v, 1, rng), param_group),
        autodiff::Param("dsmil.head_b", Matrix(1, 1), param_group)};
}

BagOutput DsmilParams::forward(Tape& tape, Tape::Id instances) {
    const Matrix& h = tape.value(instances);
    const std::size_t n = h.rows();
    if (n < 1) throw DataError("dsmil: empty bag");

    Tape::Id scores = tape.matmul(instances, tape.param(inst_cls));  // N x 1
    const Matrix& s = tape.value(scores);
    std::size_t m = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (s(i, 0) > s(m, 0)) m = i;  // ties keep the lowest index

    Matrix onehot(1, n);
    onehot(0, m) = 1.0;
    Tape::Id pick = tape.constant(std::move(onehot));

    Tape::Id queries = tape.matmul(instances, tape.param(query));  // N x d_q
    Tape::Id values = tape.matmul(instances, tape.param(value));   // N x d_v
    Tape::Id q_crit = tape.matmul(pick, queries);                  // 1 x d_q
    Tape::Id u_logits = tape.matmul(queries, tape.transpose(q_crit));  // N x 1
    Tape::Id u = tape.softmax_rows(tape.transpose(u_logits));     // 1 x N
    Tape::Id bag = tape.matmul(u, values);                         // 1 x d_v

    Tape::Id bag_logit = tape.add(tape.matmul(bag, tape.param(head_w)), tape.param(head_b));
    Tape::Id inst_logit = tape.matmul(pick, scores);               // 1 x 1, = s_m
    Tape::Id logit = tape.scale(tape.add(inst_logit, bag_logit), 0.5);

    BagOutput out;
    out.prediction = tape.activation(Act::Sigmoid, logit);
    out.embedding = bag;
    out.attention = u;
    out.critical_index = m;
    return out;
}

std::vector<autodiff::Param*> DsmilParams::params() {
    return {&inst_cls, &query, &value, &head_w, &head_b};
}

PooledHeadParams PooledHeadParams::create(std::size_t d, Rng& rng, int param_group) {
    return PooledHeadParams{
        autodiff::Param("pooled.head_w", glorot_uniform(d, 1, rng), param_group),
        autodiff::Param("pooled.head_b", Matrix(1, 1), param_group)};
}

BagOutput PooledHeadParams::forward(Tape& tape, Tape::Id pooled) {
    Tape::Id logit = tape.add(tape.matmul(pooled, tape.param(head_w)), tape.param(head_b));
    BagOutput out;
    out.prediction = tape.activation(Act::Sigmoid, logit);
    out.embedding = pooled;
    return out;
}

std::vector<autodiff::Param*> PooledHeadParams::params() { return {&head_w, &head_b}; }

}  // namespace gmil
