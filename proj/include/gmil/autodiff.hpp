#pragma once

#include <string>
#include <vector>

#include "gmil/matrix.hpp"

namespace gmil::autodiff {

// Trainable tensor. Gradients accumulate across backward() calls until the
// optimizer consumes them; that accumulation is the gradient-accumulation
// mechanism used by the training loop.
struct Param {
    std::string name;
    Matrix value;
    Matrix grad;
    int group = 0;  // optimizer hyperparameter group

    Param(std::string n, Matrix v, int g = 0)
        : name(std::move(n)), value(std::move(v)),
          grad(value.rows(), value.cols()), group(g) {}
    void zero_grad() { grad.fill(0.0); }
};

enum class Act { Identity, Sigmoid, Tanh, Relu, LeakyRelu, Elu };

double apply_act(Act a, double x, double slope);
double act_grad(Act a, double x, double y, double slope);

// Record-and-replay tape. Nodes are appended in forward order, which is a
// topological order, so backward() is a single reverse sweep visiting each
// node exactly once.
class Tape {
public:
    using Id = int;

    Id param(Param& p);
    Id constant(Matrix m);

    Id matmul(Id a, Id b);
    Id add(Id a, Id b);
    Id sub(Id a, Id b);
    Id hadamard(Id a, Id b);
    Id scale(Id a, double alpha);
    Id transpose(Id a);
    Id activation(Act kind, Id a, double slope = 0.0);
    // Row-wise softmax with max-subtraction; mask (0/1, same shape) restricts
    // each row's support. Masked-out entries are exactly 0 in the output.
    Id softmax_rows(Id a);
    Id masked_softmax_rows(Id a, Matrix mask);
    Id mul_const(Id a, Matrix c);
    Id concat_cols(Id a, Id b);
    Id col_max(Id a);   // 1 x d, per-column max over rows (ties: lowest row)
    Id col_mean(Id a);  // 1 x d
    Id sum(Id a);       // 1 x 1
    // Mean over all entries of -[y log p + (1-y) log(1-p)], preds clamped to
    // [1e-7, 1-1e-7]; labels constant.
    Id bce_loss(Id preds, Matrix labels);

    const Matrix& value(Id id) const { return nodes_[id].value; }
    std::size_t node_count() const { return nodes_.size(); }

    // Seeds d(loss)=1 and sweeps in reverse, adding leaf gradients into the
    // referenced Params. loss must be 1x1.
    void backward(Id loss);

    static constexpr double kBceClamp = 1e-7;

private:
    enum class Op {
        Leaf, Const, MatMul, Add, Sub, Hadamard, Scale, Transpose, Activation,
        Softmax, MulConst, ConcatCols, ColMax, ColMean, Sum, Bce
    };
    struct NodeRec {
        Op op;
        Id a = -1, b = -1;
        Matrix value;
        Matrix grad;
        Param* leaf = nullptr;
        Matrix aux;          // mask / constant multiplier / labels
        double scalar = 0.0; // scale factor or activation slope
        Act act = Act::Identity;
    };

    Id push(NodeRec rec);
    std::vector<NodeRec> nodes_;
};

}  // namespace gmil::autodiff
