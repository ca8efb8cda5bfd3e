#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "gmil/errors.hpp"
#include "gmil/model.hpp"
#include "test_util.hpp"

using namespace gmil;
using autodiff::Tape;

namespace {

ModelConfig small_config(bool use_gnn, GnnKind gk, Aggregator agg) {
    ModelConfig cfg;
    cfg.use_gnn = use_gnn;
    cfg.gnn_kind = gk;
    cfg.aggregator = agg;
    cfg.input_dim = 4;
    cfg.layers = 2;
    cfg.hidden = 6;
    cfg.att_dim = 3;
    cfg.seed = 11;
    return cfg;
}

GraphContext context_for(const Matrix& features) {
    WsiGraph g;
    g.slide_id = "m";
    g.node_features = features;
    for (std::size_t i = 0; i + 1 < features.rows(); ++i) g.edges.emplace_back(i, i + 1);
    for (std::size_t i = 0; i < features.rows(); ++i) g.node_to_patches.push_back({i});
    return make_graph_context(g);
}

}  // namespace

TEST_CASE("model names") {
    CHECK(small_config(false, GnnKind::Gcn, Aggregator::Abmil).name(GraphKind::Patch) ==
          "abmil");
    CHECK(small_config(true, GnnKind::Gcn, Aggregator::Abmil).name(GraphKind::Patch) ==
          "patch-gcn-abmil");
    CHECK(small_config(true, GnnKind::Gat, Aggregator::MaxPool)
              .name(GraphKind::Centroid) == "centroid-gat-max");
}

TEST_CASE("every model family produces a probability") {
    Rng rng(1);
    Matrix features = testutil::random_matrix(5, 4, rng);
    GraphContext ctx = context_for(features);
    for (bool gnn : {false, true})
        for (GnnKind gk : {GnnKind::Gcn, GnnKind::Gat})
            for (Aggregator agg :
                 {Aggregator::Abmil, Aggregator::Dsmil, Aggregator::MaxPool}) {
                if (!gnn && agg == Aggregator::MaxPool) continue;  // needs a readout
                Model model(small_config(gnn, gk, agg));
                Tape tape;
                BagOutput out = model.forward(tape, features, gnn ? &ctx : nullptr);
                double p = tape.value(out.prediction)(0, 0);
                CHECK(p > 0.0);
                CHECK(p < 1.0);
            }
}

TEST_CASE("checkpoint round trip restores weights bitwise") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "gmil_ckpt";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::string path = (dir / "m.gmip").string();

    Model model(small_config(true, GnnKind::Gat, Aggregator::Abmil));
    std::vector<Matrix> saved;
    for (auto* p : model.backbone_params()) saved.push_back(p->value);
    save_checkpoint(model.backbone_params(), path);
    for (auto* p : model.backbone_params()) p->value.fill(0.123);
    load_checkpoint(model.backbone_params(), path);
    std::size_t i = 0;
    for (auto* p : model.backbone_params()) CHECK(p->value == saved[i++]);

    std::string bytes = testutil::read_file(path);
    {
        std::string bad = bytes;
        bad[0] = 'Q';
        std::ofstream(dir / "bad.gmip", std::ios::binary) << bad;
        try {
            load_checkpoint(model.backbone_params(), (dir / "bad.gmip").string());
            FAIL("expected bad magic");
        } catch (const FileFormatError& e) {
            CHECK(e.issue() == FileFormatIssue::BadMagic);
        }
    }
    {
        std::ofstream(dir / "trunc.gmip", std::ios::binary)
            << bytes.substr(0, bytes.size() - 4);
        try {
            load_checkpoint(model.backbone_params(), (dir / "trunc.gmip").string());
            FAIL("expected truncation");
        } catch (const FileFormatError& e) {
            CHECK(e.issue() == FileFormatIssue::Truncated);
        }
    }
    {
        std::string bad = bytes;
        bad[4] = 9;
        std::ofstream(dir / "ver.gmip", std::ios::binary) << bad;
        try {
            load_checkpoint(model.backbone_params(), (dir / "ver.gmip").string());
            FAIL("expected version mismatch");
        } catch (const FileFormatError& e) {
            CHECK(e.issue() == FileFormatIssue::VersionMismatch);
        }
    }
    // checkpoint from a different architecture is rejected by tensor metadata
    Model other(small_config(true, GnnKind::Gcn, Aggregator::Abmil));
    CHECK_THROWS_AS(load_checkpoint(other.backbone_params(), path), DataError);
}

TEST_CASE("backbone hash tracks weight changes") {
    Model model(small_config(true, GnnKind::Gcn, Aggregator::Dsmil));
    std::uint64_t h1 = model.backbone_hash();
    CHECK(h1 == model.backbone_hash());
    model.backbone_params()[0]->value(0, 0) += 1.0;
    CHECK(h1 != model.backbone_hash());
}

TEST_CASE("intervention head integrates with the model") {
    Rng rng(2);
    Matrix features = testutil::random_matrix(5, 4, rng);
    GraphContext ctx = context_for(features);
    Model model(small_config(true, GnnKind::Gcn, Aggregator::Abmil));
    Matrix emb(6, model.config().bag_dim());
    for (std::size_t i = 0; i < emb.size(); ++i) emb.data()[i] = rng.normal();
    ConfounderDictionary dict =
        build_confounder_dictionary(emb, 2, 2, 3, PriorMode::Proportional,
                                    model.backbone_hash());
    CHECK_THROWS_AS(model.intervention_head(), InternalError);
    model.attach_intervention_head(8, 4);
    Tape tape;
    BagOutput out = model.forward_intervened(tape, features, &ctx, dict);
    double p = tape.value(out.prediction)(0, 0);
    CHECK(p > 0.0);
    CHECK(p < 1.0);
    CHECK(model.head_params().size() == 6);
    CHECK(model.all_params().size() ==
          model.backbone_params().size() + model.head_params().size());
}
