#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gmil/autodiff.hpp"
#include "gmil/clustering.hpp"
#include "gmil/rng.hpp"

namespace gmil {

// K strata from clustering training bag embeddings (k-means in PCA space,
// strata averaged in the original embedding space) plus their empirical
// priors. model_hash ties the dictionary to the stage-2 model it came from.
struct ConfounderDictionary {
    Matrix strata;                // K x d_B
    std::vector<double> priors;   // K, sum 1
    PcaBasis pca;
    std::uint64_t model_hash = 0;

    std::size_t k() const { return strata.rows(); }
    void validate() const;
};

enum class PriorMode { Proportional, Uniform };

ConfounderDictionary build_confounder_dictionary(const Matrix& bag_embeddings,
                                                 std::size_t k, std::size_t pca_dim,
                                                 std::uint64_t seed,
                                                 PriorMode priors = PriorMode::Proportional,
                                                 std::uint64_t model_hash = 0);

// "GMIC" binary: magic, u16 version, u32 K, u32 d_B, strata f64, priors f64,
// u64 model hash.
void save_dictionary(const ConfounderDictionary& dict, const std::string& path);
ConfounderDictionary load_dictionary(const std::string& path);

// Backdoor-adjustment head: scaled dot-product attention over the strata,
// prior-weighted stratum sum concatenated with B, then a one-hidden-layer
// classifier.
struct InterventionHead {
    autodiff::Param w1;        // d_B x d_p
    autodiff::Param w2;        // d_B x d_p
    autodiff::Param ffn_w;     // 2*d_B x d_B
    autodiff::Param ffn_b;     // 1 x d_B
    autodiff::Param out_w;     // d_B x 1
    autodiff::Param out_b;     // 1 x 1

    static InterventionHead create(std::size_t d_bag, std::size_t d_proj, Rng& rng,
                                   int param_group = 1);

    // alpha = softmax((B W1)(C W2)^T / sqrt(d_p)), 1 x K.
    autodiff::Tape::Id attention(autodiff::Tape& tape, autodiff::Tape::Id bag,
                                 const ConfounderDictionary& dict);
    // sigmoid(FFN(B (+) sum_i alpha_i P(c_i) c_i))
    autodiff::Tape::Id forward(autodiff::Tape& tape, autodiff::Tape::Id bag,
                               const ConfounderDictionary& dict);

    std::vector<autodiff::Param*> params();
    std::size_t proj_dim() const { return w1.value.cols(); }
};

}  // namespace gmil
