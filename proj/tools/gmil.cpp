#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "gmil/config.hpp"
#include "gmil/errors.hpp"
#include "gmil/pipeline.hpp"

namespace fs = std::filesystem;
using namespace gmil;

namespace {

struct Args {
    std::string config;
    std::string manifest;
    std::string out;
    std::string checkpoint;
    std::string slide;
    std::string embeddings_out;
    std::size_t purity_k = 2;
    bool with_intervention = false;
    bool allow_global_fit = false;
};

// Global region graphs need centroids fitted over a slide set before any
// graph can be built; commands outside cross-validation fit on every slide.
const MiniBatchKMeans* maybe_fit_all(const TrainConfig& cfg, const Manifest& manifest,
                                     MiniBatchKMeans& storage) {
    if (!cfg.use_gnn || cfg.graph_kind != GraphKind::RegionGlobal) return nullptr;
    std::vector<std::size_t> all(manifest.entries.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    storage = fit_global_clusters(manifest, all, cfg.k_regions, cfg.chunk, cfg.seed);
    return &storage;
}

int cmd_synth(const Args& args) {
    RunConfig cfg = load_run_config(args.config);
    fs::create_directories(args.out);
    Manifest manifest = generate_dataset(cfg.synth, args.out);
    std::cout << "wrote " << manifest.entries.size() << " slides and manifest.csv to "
              << args.out << "\n";
    return 0;
}

int cmd_build_graphs(const Args& args) {
    RunConfig cfg = load_run_config(args.config);
    Manifest manifest = load_manifest(args.manifest);
    fs::create_directories(args.out);
    MiniBatchKMeans storage(cfg.train.k_regions, cfg.train.seed);
    const MiniBatchKMeans* clusters = maybe_fit_all(cfg.train, manifest, storage);
    for (const ManifestEntry& entry : manifest.entries) {
        SlideRecord slide = load_manifest_slide(entry);
        WsiGraph graph;
        make_bag_input(cfg.train, slide, clusters, &graph);
        dump_graph(graph, args.out + "/" + entry.slide_id + ".edges",
                   args.out + "/" + entry.slide_id + ".features");
    }
    std::cout << "wrote " << manifest.entries.size() << " graphs ("
              << graph_kind_name(cfg.train.graph_kind) << ") to " << args.out << "\n";
    return 0;
}

int cmd_cv(const Args& args) {
    RunConfig cfg = load_run_config(args.config);
    cfg.train.allow_global_fit = args.allow_global_fit;
    Manifest manifest = load_manifest(args.manifest);
    fs::create_directories(args.out);
    CvOptions options;
    options.with_intervention = args.with_intervention;
    options.artifact_dir = args.out;
    CvResult result = cross_validate(cfg.train, manifest, options);
    write_metrics_csv(result, args.out + "/metrics.csv");
    std::cout << format_metrics_table(result);
    return 0;
}

Model load_model_for(const TrainConfig& cfg, std::size_t feature_dim,
                     const std::string& checkpoint) {
    Model model(cfg.model_config(feature_dim));
    load_checkpoint(model.backbone_params(), checkpoint);
    return model;
}

int cmd_heatmap(const Args& args) {
    RunConfig cfg = load_run_config(args.config);
    SlideRecord slide = load_slide(args.slide);
    slide.slide_id = fs::path(args.slide).stem().string();
    MiniBatchKMeans storage(cfg.train.k_regions, cfg.train.seed);
    const MiniBatchKMeans* clusters = nullptr;
    if (cfg.train.use_gnn && cfg.train.graph_kind == GraphKind::RegionGlobal) {
        if (args.manifest.empty())
            throw UsageError("--manifest is required for region-global graphs");
        Manifest manifest = load_manifest(args.manifest);
        clusters = maybe_fit_all(cfg.train, manifest, storage);
    }
    WsiGraph graph;
    BagInput input = make_bag_input(cfg.train, slide, clusters, &graph);
    Model model = load_model_for(cfg.train, slide.feature_dim(), args.checkpoint);
    export_heatmap(model, slide, graph, input, args.out + ".csv", args.out + ".pgm");
    std::cout << "wrote " << args.out << ".csv and " << args.out << ".pgm\n";
    return 0;
}

int cmd_purity(const Args& args) {
    RunConfig cfg = load_run_config(args.config);
    Manifest manifest = load_manifest(args.manifest);
    MiniBatchKMeans storage(cfg.train.k_regions, cfg.train.seed);
    const MiniBatchKMeans* clusters = maybe_fit_all(cfg.train, manifest, storage);
    std::vector<BagInput> bags;
    std::vector<int> labels;
    std::vector<const ManifestEntry*> entries;
    for (const ManifestEntry& entry : manifest.entries) {
        bags.push_back(make_bag_input(cfg.train, load_manifest_slide(entry), clusters));
        labels.push_back(entry.label);
        entries.push_back(&entry);
    }
    if (bags.empty()) throw DataError("manifest is empty");
    Model model = load_model_for(cfg.train, bags.front().features.cols(), args.checkpoint);
    Matrix embeddings = extract_bag_embeddings(model, bags);
    PurityReport report = purity_report(embeddings, labels, args.purity_k, cfg.train.seed);

    std::ofstream out(args.out, std::ios::binary);
    if (!out) throw DataError("cannot open for write: " + args.out);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", report.purity);
    out << "purity " << buf << "\n";
    out << "cluster,neg,pos\n";
    for (std::size_t c = 0; c < report.table.size(); ++c)
        out << c << "," << report.table[c][0] << "," << report.table[c][1] << "\n";
    if (!out) throw DataError("write failed: " + args.out);

    if (!args.embeddings_out.empty())
        export_embeddings(embeddings, entries, args.embeddings_out);
    std::cout << "purity " << buf << "\n";
    return 0;
}

int run(int argc, char** argv) {
    CLI::App app{"graph multiple-instance learning toolkit"};
    app.require_subcommand(1);
    Args args;

    auto* synth = app.add_subcommand("synth", "generate a synthetic multi-center dataset");
    synth->add_option("--config", args.config)->required();
    synth->add_option("--out", args.out)->required();

    auto* graphs = app.add_subcommand("build-graphs", "write graph dumps for every slide");
    graphs->add_option("--config", args.config)->required();
    graphs->add_option("--manifest", args.manifest)->required();
    graphs->add_option("--out", args.out)->required();

    auto* cv = app.add_subcommand("cv", "cross-validated training and evaluation");
    cv->add_option("--config", args.config)->required();
    cv->add_option("--manifest", args.manifest)->required();
    cv->add_option("--out", args.out)->required();
    cv->add_flag("--with-intervention", args.with_intervention,
                 "also train and evaluate the backdoor-adjustment head");
    cv->add_flag("--allow-global-fit", args.allow_global_fit,
                 "fit global region clusters on train+test (dataset-wide protocol)");

    auto* heatmap = app.add_subcommand("heatmap", "attention heatmap for one slide");
    heatmap->add_option("--config", args.config)->required();
    heatmap->add_option("--checkpoint", args.checkpoint)->required();
    heatmap->add_option("--slide", args.slide)->required();
    heatmap->add_option("--out", args.out, "output path prefix (.csv/.pgm appended)")
        ->required();
    heatmap->add_option("--manifest", args.manifest,
                        "slide set for fitting global region clusters");

    auto* purity = app.add_subcommand("purity", "bag-embedding cluster purity report");
    purity->add_option("--config", args.config)->required();
    purity->add_option("--checkpoint", args.checkpoint)->required();
    purity->add_option("--manifest", args.manifest)->required();
    purity->add_option("--k", args.purity_k, "cluster count")->required();
    purity->add_option("--out", args.out)->required();
    purity->add_option("--embeddings", args.embeddings_out,
                       "also write a bag-embedding CSV here");

    auto* keys = app.add_subcommand("config-keys", "print the config key reference");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }

    if (synth->parsed()) return cmd_synth(args);
    if (graphs->parsed()) return cmd_build_graphs(args);
    if (cv->parsed()) return cmd_cv(args);
    if (heatmap->parsed()) return cmd_heatmap(args);
    if (purity->parsed()) return cmd_purity(args);
    if (keys->parsed()) {
        std::cout << config_key_reference();
        return 0;
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}
