#include "gmil/adam.hpp"

#include <cmath>

#include "gmil/errors.hpp"

namespace gmil {

Adam::Adam(std::vector<autodiff::Param*> params, std::vector<AdamGroup> groups)
    : groups_(std::move(groups)) {
    slots_.reserve(params.size());
    for (autodiff::Param* p : params) {
        if (p->group < 0 || static_cast<std::size_t>(p->group) >= groups_.size())
            throw InternalError("param group out of range: " + p->name);
        slots_.push_back({p, Matrix(p->value.rows(), p->value.cols()),
                          Matrix(p->value.rows(), p->value.cols())});
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (Slot& s : slots_) {
        const AdamGroup& gr = groups_[s.p->group];
        double* pv = s.p->value.data();
        double* pg = s.p->grad.data();
        double* m = s.m.data();
        double* v = s.v.data();
        for (std::size_t i = 0; i < s.p->value.size(); ++i) {
            double g = pg[i] + gr.weight_decay * pv[i];
            m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g;
            v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g * g;
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            pv[i] -= gr.lr * mhat / (std::sqrt(vhat) + kEps);
        }
        s.p->zero_grad();
    }
}

}  // namespace gmil
