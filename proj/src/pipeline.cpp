#include "gmil/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "gmil/errors.hpp"
#include "gmil/gnn.hpp"

namespace gmil {

using autodiff::Tape;

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    return seed ^ (salt + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
}

std::uint64_t slide_seed(std::uint64_t seed, const std::string& slide_id) {
    std::uint64_t h = 14695981039346656037ULL;
    for (char c : slide_id) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return mix_seed(seed, h);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

ModelConfig TrainConfig::model_config(std::size_t feature_dim) const {
    ModelConfig mc;
    mc.use_gnn = use_gnn;
    mc.gnn_kind = gnn_kind;
    mc.aggregator = aggregator;
    mc.input_dim = feature_dim;
    mc.layers = layers;
    mc.hidden = hidden;
    mc.att_dim = att_dim;
    mc.seed = seed;
    return mc;
}

std::string TrainConfig::model_name() const {
    return model_config(0).name(graph_kind);
}

BagInput make_bag_input(const TrainConfig& cfg, const SlideRecord& slide,
                        const MiniBatchKMeans* global_clusters, WsiGraph* graph_out) {
    BagInput bag;
    bag.slide_id = slide.slide_id;
    bag.center_id = slide.center_id;
    bag.label = slide.label;
    if (!cfg.use_gnn) {
        bag.features = slide.features;
        if (graph_out) *graph_out = build_patch_graph(slide, cfg.patch_connectivity);
        return bag;
    }
    WsiGraph graph;
    switch (cfg.graph_kind) {
        case GraphKind::Patch:
            graph = build_patch_graph(slide, cfg.patch_connectivity);
            break;
        case GraphKind::RegionGlobal: {
            if (!global_clusters || !global_clusters->initialized())
                throw InternalError("global region graph requires fitted clusters");
            auto assignments = global_clusters->assign(slide.features);
            graph = build_region_graph(slide, assignments, cfg.cc_connectivity);
            break;
        }
        case GraphKind::RegionLocal:
            graph = build_region_graph_local(slide, cfg.k_regions,
                                             slide_seed(cfg.seed, slide.slide_id));
            break;
        case GraphKind::Centroid:
            graph = build_centroid_graph(slide, cfg.centroid_k,
                                         slide_seed(cfg.seed, slide.slide_id));
            break;
    }
    graph.slide_id = slide.slide_id;
    bag.features = graph.node_features;
    bag.ctx = make_graph_context(graph);
    if (graph_out) *graph_out = std::move(graph);
    return bag;
}

FoldInputs prepare_fold_inputs(const TrainConfig& cfg, const Manifest& manifest,
                               const FoldPlan::Fold& fold) {
    MiniBatchKMeans clusters(cfg.k_regions, mix_seed(cfg.seed, 77));
    const MiniBatchKMeans* fitted = nullptr;
    if (cfg.use_gnn && cfg.graph_kind == GraphKind::RegionGlobal) {
        std::vector<std::size_t> fit_indices = fold.train;
        if (cfg.allow_global_fit) {
            fit_indices.insert(fit_indices.end(), fold.test.begin(), fold.test.end());
            std::sort(fit_indices.begin(), fit_indices.end());
        }
        clusters = fit_global_clusters(manifest, fit_indices, cfg.k_regions, cfg.chunk,
                                       mix_seed(cfg.seed, 77));
        fitted = &clusters;
    }
    FoldInputs out;
    for (std::size_t idx : fold.train)
        out.train.push_back(
            make_bag_input(cfg, load_manifest_slide(manifest.entries[idx]), fitted));
    for (std::size_t idx : fold.test)
        out.test.push_back(
            make_bag_input(cfg, load_manifest_slide(manifest.entries[idx]), fitted));
    return out;
}

namespace {

double run_bag(Model& model, const BagInput& bag, const ConfounderDictionary* dict,
               bool backward) {
    Tape tape;
    const GraphContext* ctx = bag.ctx ? &*bag.ctx : nullptr;
    BagOutput out = dict ? model.forward_intervened(tape, bag.features, ctx, *dict)
                         : model.forward(tape, bag.features, ctx);
    if (!backward) return tape.value(out.prediction)(0, 0);
    Matrix label(1, 1);
    label(0, 0) = static_cast<double>(bag.label);
    Tape::Id loss = tape.bce_loss(out.prediction, label);
    tape.backward(loss);
    return tape.value(loss)(0, 0);
}

TrainResult train_loop(Model& model, Adam& adam, const std::vector<BagInput>& train,
                       const TrainConfig& cfg, std::uint64_t fold_seed,
                       const ConfounderDictionary* dict) {
    if (train.empty()) throw DataError("training set is empty");
    TrainResult result;
    Rng base(fold_seed);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng er = base.derive(epoch);
        er.shuffle(order);
        double total = 0.0;
        std::size_t pending = 0;
        for (std::size_t idx : order) {
            total += run_bag(model, train[idx], dict, /*backward=*/true);
            if (++pending == cfg.grad_accum) {
                adam.step();
                pending = 0;
            }
        }
        if (pending > 0) adam.step();
        result.epoch_loss.push_back(total / static_cast<double>(train.size()));
    }
    result.optimizer_steps = static_cast<std::size_t>(adam.step_count());
    return result;
}

}  // namespace

TrainResult train_stage2(Model& model, const std::vector<BagInput>& train,
                         const TrainConfig& cfg, std::uint64_t fold_seed) {
    Adam adam(model.backbone_params(),
              {{cfg.lr_gnn, cfg.wd_gnn}, {cfg.lr_mil, cfg.wd_mil}});
    return train_loop(model, adam, train, cfg, fold_seed, nullptr);
}

TrainResult train_stage3(Model& model, const ConfounderDictionary& dict,
                         const std::vector<BagInput>& train, const TrainConfig& cfg,
                         std::uint64_t fold_seed) {
    if (dict.model_hash != model.backbone_hash())
        throw DataError("confounder dictionary does not match the trained backbone");
    // Backbone frozen: only intervention-head parameters enter the optimizer.
    Adam adam(model.head_params(),
              {{cfg.lr_gnn, cfg.wd_gnn}, {cfg.lr_mil, cfg.wd_mil}});
    return train_loop(model, adam, train, cfg, fold_seed, &dict);
}

Matrix extract_bag_embeddings(Model& model, const std::vector<BagInput>& bags) {
    if (bags.empty()) throw DataError("no bags to embed");
    Matrix out;
    for (std::size_t i = 0; i < bags.size(); ++i) {
        Tape tape;
        const GraphContext* ctx = bags[i].ctx ? &*bags[i].ctx : nullptr;
        BagOutput bo = model.forward(tape, bags[i].features, ctx);
        const Matrix& e = tape.value(bo.embedding);
        if (i == 0) out = Matrix(bags.size(), e.cols());
        for (std::size_t j = 0; j < e.cols(); ++j) out(i, j) = e(0, j);
    }
    return out;
}

std::vector<double> predict_scores(Model& model, const std::vector<BagInput>& bags,
                                   const ConfounderDictionary* dict) {
    std::vector<double> scores;
    scores.reserve(bags.size());
    for (const BagInput& bag : bags)
        scores.push_back(run_bag(model, bag, dict, /*backward=*/false));
    return scores;
}

Metrics evaluate_model(Model& model, const std::vector<BagInput>& test,
                       double threshold, const ConfounderDictionary* dict) {
    std::vector<double> scores = predict_scores(model, test, dict);
    std::vector<int> labels;
    labels.reserve(test.size());
    for (const BagInput& bag : test) labels.push_back(bag.label);
    return evaluate_scores(scores, labels, threshold);
}

CvResult cross_validate(const TrainConfig& cfg, const Manifest& manifest,
                        const CvOptions& options) {
    FoldPlan plan = build_folds(manifest, cfg.fold_mode, cfg.folds, cfg.seed);
    CvResult result;
    result.model_name = cfg.model_name();
    for (std::size_t f = 0; f < plan.folds.size(); ++f) {
        FoldInputs inputs = prepare_fold_inputs(cfg, manifest, plan.folds[f]);
        if (inputs.train.empty() || inputs.test.empty())
            throw DataError("fold " + std::to_string(f) + " has an empty split");

        ModelConfig mc = cfg.model_config(inputs.train.front().features.cols());
        mc.seed = mix_seed(cfg.seed, 1000 + f);
        Model model(mc);

        FoldOutcome outcome;
        outcome.fold = f;
        TrainResult tr = train_stage2(model, inputs.train, cfg, mix_seed(cfg.seed, 2000 + f));
        outcome.final_loss = tr.epoch_loss.back();
        outcome.base = evaluate_model(model, inputs.test, cfg.threshold);

        if (options.with_intervention) {
            Matrix emb = extract_bag_embeddings(model, inputs.train);
            ConfounderDictionary dict = build_confounder_dictionary(
                emb, cfg.confounder_k, cfg.pca_dim, mix_seed(cfg.seed, 3000 + f),
                cfg.prior_mode, model.backbone_hash());
            model.attach_intervention_head(cfg.proj_dim, mix_seed(cfg.seed, 4000 + f));
            train_stage3(model, dict, inputs.train, cfg, mix_seed(cfg.seed, 5000 + f));
            outcome.with_intervention = evaluate_model(model, inputs.test, cfg.threshold, &dict);
            if (!options.artifact_dir.empty()) {
                save_dictionary(dict, options.artifact_dir + "/fold" + std::to_string(f) +
                                          ".gmic");
                save_checkpoint(model.head_params(), options.artifact_dir + "/fold" +
                                                         std::to_string(f) + ".head.gmip");
            }
        }
        // Backbone-only checkpoint so heatmap/purity can reload it without
        // knowing whether an intervention head was trained.
        if (!options.artifact_dir.empty())
            save_checkpoint(model.backbone_params(), options.artifact_dir + "/fold" +
                                                         std::to_string(f) + ".gmip");
        result.folds.push_back(std::move(outcome));
    }
    return result;
}

namespace {

std::string metrics_row(const std::string& config, std::size_t fold, const Metrics& m) {
    std::string auc = m.auc ? fmt(*m.auc) : "na";
    return config + "," + std::to_string(fold) + "," + auc + "," +
           fmt(m.balanced_accuracy) + "," + fmt(m.f1) + "," + fmt(m.precision) + "," +
           fmt(m.recall);
}

}  // namespace

void write_metrics_csv(const CvResult& result, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for write: " + path);
    out << "config,fold,auc,ba,f1,precision,recall\n";
    for (const FoldOutcome& fo : result.folds)
        out << metrics_row(result.model_name, fo.fold, fo.base) << "\n";
    for (const FoldOutcome& fo : result.folds)
        if (fo.with_intervention)
            out << metrics_row(result.model_name + "+it", fo.fold, *fo.with_intervention)
                << "\n";
    if (!out) throw DataError("write failed: " + path);
}

namespace {

void table_block(std::ostringstream& os, const std::string& label,
                 const CvResult& result, bool intervened) {
    std::vector<double> auc, ba, acc, f1;
    os << label << "\n";
    os << "  fold      auc       ba      acc       f1     prec      rec\n";
    for (const FoldOutcome& fo : result.folds) {
        const Metrics* m = intervened ? (fo.with_intervention ? &*fo.with_intervention
                                                              : nullptr)
                                      : &fo.base;
        if (!m) continue;
        char buf[160];
        std::snprintf(buf, sizeof(buf), "  %4zu %8s %8.4f %8.4f %8.4f %8.4f %8.4f\n",
                      fo.fold, m->auc ? fmt(*m->auc).c_str() : "na",
                      m->balanced_accuracy, m->accuracy, m->f1, m->precision, m->recall);
        os << buf;
        if (m->auc) auc.push_back(*m->auc);
        ba.push_back(m->balanced_accuracy);
        acc.push_back(m->accuracy);
        f1.push_back(m->f1);
    }
    auto ms = [](const std::vector<double>& v) {
        MeanStd s = mean_std(v);
        return fmt(s.mean) + " +/- " + fmt(s.std);
    };
    if (!auc.empty()) os << "  mean auc " << ms(auc) << "\n";
    os << "  mean ba  " << ms(ba) << "\n";
    os << "  mean acc " << ms(acc) << "\n";
    os << "  mean f1  " << ms(f1) << "\n";
}

}  // namespace

std::string format_metrics_table(const CvResult& result) {
    std::ostringstream os;
    table_block(os, result.model_name, result, false);
    bool any_it = false;
    for (const FoldOutcome& fo : result.folds)
        if (fo.with_intervention) any_it = true;
    if (any_it) {
        table_block(os, result.model_name + "+it", result, true);
        std::vector<double> delta;
        for (const FoldOutcome& fo : result.folds)
            if (fo.with_intervention)
                delta.push_back(fo.with_intervention->balanced_accuracy -
                                fo.base.balanced_accuracy);
        MeanStd d = mean_std(delta);
        os << "intervention ba delta " << fmt(d.mean) << " +/- " << fmt(d.std) << "\n";
    }
    return os.str();
}

PurityReport purity_report(const Matrix& bag_embeddings, const std::vector<int>& labels,
                           std::size_t k, std::uint64_t seed) {
    if (bag_embeddings.rows() != labels.size())
        throw DataError("purity: embedding/label count mismatch");
    KMeansResult km = kmeans(bag_embeddings, k, seed);
    PurityReport report;
    report.purity = cluster_purity(km.assignments, labels);
    report.table.assign(k, std::vector<std::size_t>(2, 0));
    for (std::size_t i = 0; i < labels.size(); ++i)
        report.table[km.assignments[i]][labels[i] == 1 ? 1 : 0]++;
    return report;
}

void export_heatmap(Model& model, const SlideRecord& slide, const WsiGraph& graph,
                    const BagInput& input, const std::string& csv_path,
                    const std::string& pgm_path) {
    if (!model.has_attention())
        throw UsageError("model '" + aggregator_name(model.config().aggregator) +
                         "' has no attention scores to map");
    Tape tape;
    const GraphContext* ctx = input.ctx ? &*input.ctx : nullptr;
    BagOutput out = model.forward(tape, input.features, ctx);
    if (out.attention < 0) throw InternalError("attention output missing");
    const Matrix& att = tape.value(out.attention);
    if (att.cols() != graph.node_count())
        throw InternalError("attention/node count mismatch");

    double lo = att(0, 0), hi = att(0, 0);
    for (std::size_t i = 0; i < att.cols(); ++i) {
        lo = std::min(lo, att(0, i));
        hi = std::max(hi, att(0, i));
    }

    std::int32_t min_r = 0, min_c = 0, max_r = 0, max_c = 0;
    for (std::size_t i = 0; i < slide.coords.size(); ++i) {
        auto [r, c] = slide.coords[i];
        if (i == 0) { min_r = max_r = r; min_c = max_c = c; }
        min_r = std::min(min_r, r); max_r = std::max(max_r, r);
        min_c = std::min(min_c, c); max_c = std::max(max_c, c);
    }
    const std::size_t h = static_cast<std::size_t>(max_r - min_r) + 1;
    const std::size_t w = static_cast<std::size_t>(max_c - min_c) + 1;
    std::vector<double> grid(h * w, -1.0);
    for (std::size_t node = 0; node < graph.node_to_patches.size(); ++node) {
        double v = hi > lo ? (att(0, node) - lo) / (hi - lo) : 1.0;
        for (std::size_t patch : graph.node_to_patches[node]) {
            auto [r, c] = slide.coords[patch];
            grid[static_cast<std::size_t>(r - min_r) * w +
                 static_cast<std::size_t>(c - min_c)] = v;
        }
    }

    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) throw DataError("cannot open for write: " + csv_path);
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            if (c) csv << ",";
            double v = grid[r * w + c];
            csv << (v < 0.0 ? std::string("-1") : fmt(v));
        }
        csv << "\n";
    }
    if (!csv) throw DataError("write failed: " + csv_path);

    std::ofstream pgm(pgm_path, std::ios::binary);
    if (!pgm) throw DataError("cannot open for write: " + pgm_path);
    pgm << "P5\n" << w << " " << h << "\n255\n";
    for (double v : grid) {
        unsigned char byte =
            v < 0.0 ? 0 : static_cast<unsigned char>(std::lround(v * 255.0));
        pgm.write(reinterpret_cast<const char*>(&byte), 1);
    }
    if (!pgm) throw DataError("write failed: " + pgm_path);
}

void export_embeddings(const Matrix& bag_embeddings,
                       const std::vector<const ManifestEntry*>& entries,
                       const std::string& path) {
    if (bag_embeddings.rows() != entries.size())
        throw DataError("embedding export: row/entry count mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for write: " + path);
    out << "slide_id,center_id,label";
    for (std::size_t j = 0; j < bag_embeddings.cols(); ++j) out << ",e_" << j;
    out << "\n";
    for (std::size_t i = 0; i < entries.size(); ++i) {
        out << entries[i]->slide_id << "," << entries[i]->center_id << ","
            << entries[i]->label;
        for (std::size_t j = 0; j < bag_embeddings.cols(); ++j)
            out << "," << fmt(bag_embeddings(i, j));
        out << "\n";
    }
    if (!out) throw DataError("write failed: " + path);
}

}  // namespace gmil
