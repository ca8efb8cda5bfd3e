#include "gmil/autodiff.hpp"

#include <cmath>
#include <limits>

#include "gmil/errors.hpp"

namespace gmil::autodiff {

double apply_act(Act a, double x, double slope) {
    switch (a) {
        case Act::Identity: return x;
        case Act::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
        case Act::Tanh: return std::tanh(x);
        case Act::Relu: return x > 0.0 ? x : 0.0;
        case Act::LeakyRelu: return x > 0.0 ? x : slope * x;
        case Act::Elu: return x > 0.0 ? x : std::expm1(x);
    }
    throw InternalError("unknown activation");
}

// Derivative in terms of input x and output y (whichever is cheaper).
double act_grad(Act a, double x, double y, double slope) {
    switch (a) {
        case Act::Identity: return 1.0;
        case Act::Sigmoid: return y * (1.0 - y);
        case Act::Tanh: return 1.0 - y * y;
        case Act::Relu: return x > 0.0 ? 1.0 : 0.0;
        case Act::LeakyRelu: return x > 0.0 ? 1.0 : slope;
        case Act::Elu: return x > 0.0 ? 1.0 : y + 1.0;
    }
    throw InternalError("unknown activation");
}

Tape::Id Tape::push(NodeRec rec) {
    nodes_.push_back(std::move(rec));
    return static_cast<Id>(nodes_.size() - 1);
}

Tape::Id Tape::param(Param& p) {
    NodeRec rec{.op = Op::Leaf, .value = p.value, .leaf = &p};
    return push(std::move(rec));
}

Tape::Id Tape::constant(Matrix m) {
    NodeRec rec{.op = Op::Const, .value = std::move(m)};
    return push(std::move(rec));
}

Tape::Id Tape::matmul(Id a, Id b) {
    NodeRec rec{.op = Op::MatMul, .a = a, .b = b,
                .value = gmil::matmul(nodes_[a].value, nodes_[b].value)};
    return push(std::move(rec));
}

Tape::Id Tape::add(Id a, Id b) {
    NodeRec rec{.op = Op::Add, .a = a, .b = b,
                .value = gmil::add(nodes_[a].value, nodes_[b].value)};
    return push(std::move(rec));
}

Tape::Id Tape::sub(Id a, Id b) {
    NodeRec rec{.op = Op::Sub, .a = a, .b = b,
                .value = gmil::sub(nodes_[a].value, nodes_[b].value)};
    return push(std::move(rec));
}

Tape::Id Tape::hadamard(Id a, Id b) {
    NodeRec rec{.op = Op::Hadamard, .a = a, .b = b,
                .value = gmil::hadamard(nodes_[a].value, nodes_[b].value)};
    return push(std::move(rec));
}

Tape::Id Tape::scale(Id a, double alpha) {
    NodeRec rec{.op = Op::Scale, .a = a,
                .value = gmil::scale(alpha, nodes_[a].value), .scalar = alpha};
    return push(std::move(rec));
}

Tape::Id Tape::transpose(Id a) {
    NodeRec rec{.op = Op::Transpose, .a = a, .value = gmil::transpose(nodes_[a].value)};
    return push(std::move(rec));
}

Tape::Id Tape::activation(Act kind, Id a, double slope) {
    const Matrix& x = nodes_[a].value;
    Matrix y(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i)
        y.data()[i] = apply_act(kind, x.data()[i], slope);
    NodeRec rec{.op = Op::Activation, .a = a, .value = std::move(y),
                .scalar = slope, .act = kind};
    return push(std::move(rec));
}

Tape::Id Tape::softmax_rows(Id a) {
    const Matrix& x = nodes_[a].value;
    return masked_softmax_rows(a, Matrix::ones(x.rows(), x.cols()));
}

Tape::Id Tape::masked_softmax_rows(Id a, Matrix mask) {
    const Matrix& x = nodes_[a].value;
    if (mask.rows() != x.rows() || mask.cols() != x.cols())
        throw InternalError("softmax mask shape mismatch");
    x.check_finite("softmax input");
    Matrix y(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < x.cols(); ++j)
            if (mask(i, j) != 0.0 && x(i, j) > mx) mx = x(i, j);
        if (!std::isfinite(mx))
            throw InternalError("softmax row with empty mask support");
        double denom = 0.0;
        for (std::size_t j = 0; j < x.cols(); ++j)
            if (mask(i, j) != 0.0) denom += std::exp(x(i, j) - mx);
        for (std::size_t j = 0; j < x.cols(); ++j)
            y(i, j) = mask(i, j) != 0.0 ? std::exp(x(i, j) - mx) / denom : 0.0;
    }
    NodeRec rec{.op = Op::Softmax, .a = a, .value = std::move(y), .aux = std::move(mask)};
    return push(std::move(rec));
}

Tape::Id Tape::mul_const(Id a, Matrix c) {
    NodeRec rec{.op = Op::MulConst, .a = a,
                .value = gmil::hadamard(nodes_[a].value, c), .aux = std::move(c)};
    return push(std::move(rec));
}

Tape::Id Tape::concat_cols(Id a, Id b) {
    const Matrix& x = nodes_[a].value;
    const Matrix& y = nodes_[b].value;
    if (x.rows() != y.rows()) throw InternalError("concat_cols row mismatch");
    Matrix z(x.rows(), x.cols() + y.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) z(i, j) = x(i, j);
        for (std::size_t j = 0; j < y.cols(); ++j) z(i, x.cols() + j) = y(i, j);
    }
    NodeRec rec{.op = Op::ConcatCols, .a = a, .b = b, .value = std::move(z)};
    return push(std::move(rec));
}

Tape::Id Tape::col_max(Id a) {
    const Matrix& x = nodes_[a].value;
    if (x.rows() == 0) throw InternalError("col_max of empty matrix");
    Matrix y(1, x.cols());
    Matrix arg(1, x.cols());
    for (std::size_t j = 0; j < x.cols(); ++j) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < x.rows(); ++i)
            if (x(i, j) > x(best, j)) best = i;
        y(0, j) = x(best, j);
        arg(0, j) = static_cast<double>(best);
    }
    NodeRec rec{.op = Op::ColMax, .a = a, .value = std::move(y), .aux = std::move(arg)};
    return push(std::move(rec));
}

Tape::Id Tape::col_mean(Id a) {
    const Matrix& x = nodes_[a].value;
    if (x.rows() == 0) throw InternalError("col_mean of empty matrix");
    Matrix y(1, x.cols());
    for (std::size_t j = 0; j < x.cols(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.rows(); ++i) s += x(i, j);
        y(0, j) = s / static_cast<double>(x.rows());
    }
    NodeRec rec{.op = Op::ColMean, .a = a, .value = std::move(y)};
    return push(std::move(rec));
}

Tape::Id Tape::sum(Id a) {
    const Matrix& x = nodes_[a].value;
    Matrix y(1, 1);
    double s = 0.0;
    for (double v : x.vec()) s += v;
    y(0, 0) = s;
    NodeRec rec{.op = Op::Sum, .a = a, .value = std::move(y)};
    return push(std::move(rec));
}

Tape::Id Tape::bce_loss(Id preds, Matrix labels) {
    const Matrix& p = nodes_[preds].value;
    if (p.rows() != labels.rows() || p.cols() != labels.cols())
        throw InternalError("bce shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        double pc = std::min(std::max(p.data()[i], kBceClamp), 1.0 - kBceClamp);
        double y = labels.data()[i];
        s += -(y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
    }
    Matrix out(1, 1);
    out(0, 0) = s / static_cast<double>(p.size());
    NodeRec rec{.op = Op::Bce, .a = preds, .value = std::move(out), .aux = std::move(labels)};
    return push(std::move(rec));
}

void Tape::backward(Id loss) {
    if (nodes_[loss].value.rows() != 1 || nodes_[loss].value.cols() != 1)
        throw InternalError("backward requires a scalar loss");
    for (NodeRec& n : nodes_) n.grad = Matrix(n.value.rows(), n.value.cols());
    nodes_[loss].grad(0, 0) = 1.0;

    for (Id id = loss; id >= 0; --id) {
        NodeRec& n = nodes_[id];
        const Matrix& g = n.grad;
        switch (n.op) {
            case Op::Leaf:
                axpy_into(1.0, g, n.leaf->grad);
                break;
            case Op::Const:
                break;
            case Op::MatMul: {
                Matrix ga = gmil::matmul(g, gmil::transpose(nodes_[n.b].value));
                Matrix gb = gmil::matmul(gmil::transpose(nodes_[n.a].value), g);
                axpy_into(1.0, ga, nodes_[n.a].grad);
                axpy_into(1.0, gb, nodes_[n.b].grad);
                break;
            }
            case Op::Add:
                axpy_into(1.0, g, nodes_[n.a].grad);
                axpy_into(1.0, g, nodes_[n.b].grad);
                break;
            case Op::Sub:
                axpy_into(1.0, g, nodes_[n.a].grad);
                axpy_into(-1.0, g, nodes_[n.b].grad);
                break;
            case Op::Hadamard:
                axpy_into(1.0, gmil::hadamard(g, nodes_[n.b].value), nodes_[n.a].grad);
                axpy_into(1.0, gmil::hadamard(g, nodes_[n.a].value), nodes_[n.b].grad);
                break;
            case Op::Scale:
                axpy_into(n.scalar, g, nodes_[n.a].grad);
                break;
            case Op::Transpose:
                axpy_into(1.0, gmil::transpose(g), nodes_[n.a].grad);
                break;
            case Op::Activation: {
                const Matrix& x = nodes_[n.a].value;
                Matrix gx(x.rows(), x.cols());
                for (std::size_t i = 0; i < x.size(); ++i)
                    gx.data()[i] = g.data()[i] *
                        act_grad(n.act, x.data()[i], n.value.data()[i], n.scalar);
                axpy_into(1.0, gx, nodes_[n.a].grad);
                break;
            }
            case Op::Softmax: {
                // gx = y * (g - rowdot(g, y)), support-restricted by y itself.
                const Matrix& y = n.value;
                Matrix gx(y.rows(), y.cols());
                for (std::size_t i = 0; i < y.rows(); ++i) {
                    double dot = 0.0;
                    for (std::size_t j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
                    for (std::size_t j = 0; j < y.cols(); ++j)
                        gx(i, j) = y(i, j) * (g(i, j) - dot);
                }
                axpy_into(1.0, gx, nodes_[n.a].grad);
                break;
            }
            case Op::MulConst:
                axpy_into(1.0, gmil::hadamard(g, n.aux), nodes_[n.a].grad);
                break;
            case Op::ConcatCols: {
                Matrix& ga = nodes_[n.a].grad;
                Matrix& gb = nodes_[n.b].grad;
                for (std::size_t i = 0; i < ga.rows(); ++i) {
                    for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g(i, j);
                    for (std::size_t j = 0; j < gb.cols(); ++j)
                        gb(i, j) += g(i, ga.cols() + j);
                }
                break;
            }
            case Op::ColMax: {
                Matrix& ga = nodes_[n.a].grad;
                for (std::size_t j = 0; j < g.cols(); ++j)
                    ga(static_cast<std::size_t>(n.aux(0, j)), j) += g(0, j);
                break;
            }
            case Op::ColMean: {
                Matrix& ga = nodes_[n.a].grad;
                double inv = 1.0 / static_cast<double>(ga.rows());
                for (std::size_t i = 0; i < ga.rows(); ++i)
                    for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g(0, j) * inv;
                break;
            }
            case Op::Sum: {
                Matrix& ga = nodes_[n.a].grad;
                for (std::size_t i = 0; i < ga.size(); ++i) ga.data()[i] += g(0, 0);
                break;
            }
            case Op::Bce: {
                const Matrix& p = nodes_[n.a].value;
                const Matrix& labels = n.aux;
                Matrix& ga = nodes_[n.a].grad;
                double inv = g(0, 0) / static_cast<double>(p.size());
                for (std::size_t i = 0; i < p.size(); ++i) {
                    double pv = p.data()[i];
                    if (pv < kBceClamp || pv > 1.0 - kBceClamp) continue;  // clamped: zero slope
                    double y = labels.data()[i];
                    ga.data()[i] += inv * (pv - y) / (pv * (1.0 - pv));
                }
                break;
            }
        }
    }
}

}  // namespace gmil::autodiff
