#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gmil/gnn.hpp"
#include "gmil/graph.hpp"
#include "gmil/intervention.hpp"
#include "gmil/mil.hpp"

namespace gmil {

enum class Aggregator { Abmil, Dsmil, MaxPool };
Aggregator parse_aggregator(const std::string& name);
std::string aggregator_name(Aggregator a);

// Model family: optional GNN front (use_gnn=false gives the plain-MIL
// baselines over raw patch features), one MIL aggregator, and optionally an
// intervention head trained in stage 3 on the frozen backbone.
struct ModelConfig {
    bool use_gnn = true;
    GnnKind gnn_kind = GnnKind::Gcn;
    Aggregator aggregator = Aggregator::Abmil;
    std::size_t input_dim = 1024;  // F
    std::size_t layers = 3;        // L
    std::size_t hidden = 256;      // D
    std::size_t att_dim = 64;
    std::uint64_t seed = 0;

    std::size_t bag_dim() const { return use_gnn ? hidden : input_dim; }
    std::string name(GraphKind graph) const;
};

class Model {
public:
    explicit Model(const ModelConfig& cfg);

    // Forward one bag. ctx must be non-null when the model has a GNN front.
    BagOutput forward(autodiff::Tape& tape, const Matrix& features,
                      const GraphContext* ctx);
    // Stage-3 forward: frozen backbone embedding through the intervention head.
    BagOutput forward_intervened(autodiff::Tape& tape, const Matrix& features,
                                 const GraphContext* ctx,
                                 const ConfounderDictionary& dict);

    void attach_intervention_head(std::size_t d_proj, std::uint64_t seed);
    bool has_intervention() const { return head_.has_value(); }
    InterventionHead& intervention_head();

    std::vector<autodiff::Param*> backbone_params();
    std::vector<autodiff::Param*> head_params();
    std::vector<autodiff::Param*> all_params();

    const ModelConfig& config() const { return cfg_; }
    bool has_attention() const { return cfg_.aggregator != Aggregator::MaxPool; }

    // FNV-1a over the serialized backbone tensors; identifies the stage-2
    // model a confounder dictionary belongs to.
    std::uint64_t backbone_hash();

private:
    ModelConfig cfg_;
    std::optional<GnnStack> gnn_;
    std::optional<std::variant<AbmilParams, DsmilParams, PooledHeadParams>> aggregator_;
    std::optional<InterventionHead> head_;
};

// "GMIP" checkpoint: magic, u16 version, u32 tensor count, then per tensor
// u16 name length + name, u32 rows, u32 cols, f64 row-major data.
void save_checkpoint(const std::vector<autodiff::Param*>& params,
                     const std::string& path);
void load_checkpoint(const std::vector<autodiff::Param*>& params,
                     const std::string& path);
std::uint64_t params_hash(const std::vector<autodiff::Param*>& params);

}  // namespace gmil
