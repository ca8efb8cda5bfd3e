#pragma once

#include <cstdint>
#include <vector>

#include "gmil/autodiff.hpp"

namespace gmil {

// Classic Adam with L2 weight decay added to the gradient. One hyperparameter
// group per parameter-group tag (the training recipe uses separate lr/wd for
// the GNN and MIL parts).
struct AdamGroup {
    double lr = 1e-4;
    double weight_decay = 0.0;
};

class Adam {
public:
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

    Adam(std::vector<autodiff::Param*> params, std::vector<AdamGroup> groups);

    // One update from the accumulated gradients; zeroes gradients afterwards.
    void step();
    std::int64_t step_count() const { return t_; }

private:
    struct Slot {
        autodiff::Param* p;
        Matrix m;
        Matrix v;
    };
    std::vector<Slot> slots_;
    std::vector<AdamGroup> groups_;
    std::int64_t t_ = 0;
};

}  // namespace gmil
