#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gmil/adam.hpp"
#include "gmil/metrics.hpp"
#include "gmil/model.hpp"
#include "gmil/slide.hpp"
#include "gmil/synth.hpp"

namespace gmil {

// Training recipe plus model/graph selection; mirrors the key=value config.
struct TrainConfig {
    std::size_t epochs = 50;
    std::size_t grad_accum = 8;
    double lr_gnn = 1e-3;
    double lr_mil = 1e-4;
    double wd_gnn = 5e-4;
    double wd_mil = 1e-4;
    std::uint64_t seed = 0;

    bool use_gnn = true;
    GnnKind gnn_kind = GnnKind::Gcn;
    Aggregator aggregator = Aggregator::Abmil;
    std::size_t layers = 3;
    std::size_t hidden = 256;
    std::size_t att_dim = 64;

    GraphKind graph_kind = GraphKind::Patch;
    std::size_t k_regions = 10;
    std::size_t centroid_k = 9;
    std::size_t chunk = 50;
    int patch_connectivity = 8;
    int cc_connectivity = 4;
    bool allow_global_fit = false;

    std::size_t confounder_k = 8;
    std::size_t pca_dim = 64;
    std::size_t proj_dim = 128;
    PriorMode prior_mode = PriorMode::Proportional;

    double threshold = 0.5;
    std::size_t folds = 5;
    FoldMode fold_mode = FoldMode::Shuffled;

    ModelConfig model_config(std::size_t feature_dim) const;
    std::string model_name() const;
};

// One bag prepared for training: node features plus graph context (absent
// for the plain-MIL baselines, which consume raw patch features).
struct BagInput {
    std::string slide_id;
    std::string center_id;
    int label = 0;
    Matrix features;
    std::optional<GraphContext> ctx;
};

struct FoldInputs {
    std::vector<BagInput> train;
    std::vector<BagInput> test;
};

// Builds per-slide inputs for one fold. The global region-graph k-means fits
// on train slides only (test assigned to trained centroids) unless
// allow_global_fit reproduces the dataset-wide protocol.
FoldInputs prepare_fold_inputs(const TrainConfig& cfg, const Manifest& manifest,
                               const FoldPlan::Fold& fold);

// Converts one slide with the configured graph strategy; graph_out, when
// non-null, receives the constructed graph (heatmap export needs
// node_to_patches). For RegionGlobal a fitted clusterer must be supplied.
BagInput make_bag_input(const TrainConfig& cfg, const SlideRecord& slide,
                        const MiniBatchKMeans* global_clusters,
                        WsiGraph* graph_out = nullptr);

struct TrainResult {
    std::vector<double> epoch_loss;  // mean BCE per epoch
    std::size_t optimizer_steps = 0;
};

// Stage 2: batch size 1, gradients accumulate grad_accum slides per Adam
// step (remainder flushed at epoch end), epoch order reshuffled from the
// fold seed.
TrainResult train_stage2(Model& model, const std::vector<BagInput>& train,
                         const TrainConfig& cfg, std::uint64_t fold_seed);

Matrix extract_bag_embeddings(Model& model, const std::vector<BagInput>& bags);

std::vector<double> predict_scores(Model& model, const std::vector<BagInput>& bags,
                                   const ConfounderDictionary* dict = nullptr);

Metrics evaluate_model(Model& model, const std::vector<BagInput>& test,
                       double threshold, const ConfounderDictionary* dict = nullptr);

// Stage 3: dictionary from stage-2 train embeddings, backbone frozen, only
// the intervention head trains. Rejects a dictionary whose model hash does
// not match the backbone.
TrainResult train_stage3(Model& model, const ConfounderDictionary& dict,
                         const std::vector<BagInput>& train, const TrainConfig& cfg,
                         std::uint64_t fold_seed);

struct FoldOutcome {
    std::size_t fold = 0;
    Metrics base;
    std::optional<Metrics> with_intervention;
    double final_loss = 0.0;
};

struct CvResult {
    std::string model_name;
    std::vector<FoldOutcome> folds;
};

struct CvOptions {
    bool with_intervention = false;
    // Directory for checkpoints/dictionaries; empty disables artifact dumps.
    std::string artifact_dir;
};

CvResult cross_validate(const TrainConfig& cfg, const Manifest& manifest,
                        const CvOptions& options);

// Metrics CSV: config,fold,auc,ba,f1,precision,recall (one row per fold and
// stage). Deterministic bytes for identical inputs.
void write_metrics_csv(const CvResult& result, const std::string& path);
// Human-readable table with per-fold rows, mean +/- std, accuracy next to
// balanced accuracy, and the with/without-intervention delta rows.
std::string format_metrics_table(const CvResult& result);

struct PurityReport {
    double purity = 0.0;
    // cluster -> class -> count
    std::vector<std::vector<std::size_t>> table;
};
PurityReport purity_report(const Matrix& bag_embeddings, const std::vector<int>& labels,
                           std::size_t k, std::uint64_t seed);

// Attention heatmap over the patch grid: background cells -1, patch cells
// min-max normalized (all-equal scores map to 1.0). CSV grid plus 8-bit
// binary PGM.
void export_heatmap(Model& model, const SlideRecord& slide, const WsiGraph& graph,
                    const BagInput& input, const std::string& csv_path,
                    const std::string& pgm_path);

void export_embeddings(const Matrix& bag_embeddings,
                       const std::vector<const ManifestEntry*>& entries,
                       const std::string& path);

}  // namespace gmil
