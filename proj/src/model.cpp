#include "gmil/model.hpp"

#include <cstring>
#include <fstream>
#include <type_traits>

#include "gmil/errors.hpp"

namespace gmil {

using autodiff::Tape;

Aggregator parse_aggregator(const std::string& name) {
    if (name == "abmil") return Aggregator::Abmil;
    if (name == "dsmil") return Aggregator::Dsmil;
    if (name == "max") return Aggregator::MaxPool;
    throw UsageError("unknown aggregator: " + name);
}

std::string aggregator_name(Aggregator a) {
    switch (a) {
        case Aggregator::Abmil: return "abmil";
        case Aggregator::Dsmil: return "dsmil";
        case Aggregator::MaxPool: return "max";
    }
    throw InternalError("unknown aggregator");
}

std::string ModelConfig::name(GraphKind graph) const {
    if (!use_gnn) return aggregator_name(aggregator);
    std::string gnn = gnn_kind == GnnKind::Gcn ? "gcn" : "gat";
    return graph_kind_name(graph) + "-" + gnn + "-" + aggregator_name(aggregator);
}

Model::Model(const ModelConfig& cfg) : cfg_(cfg) {
    Rng rng(cfg.seed);
    if (cfg.use_gnn) {
        // Graph parameters are group 0 (their own lr/wd); everything else group 1.
        gnn_ = GnnStack::create(cfg.gnn_kind, cfg.layers, cfg.input_dim, cfg.hidden,
                                cfg.aggregator == Aggregator::MaxPool ? Readout::Max
                                                                      : Readout::None,
                                rng, /*param_group=*/0);
    }
    const std::size_t d = cfg.bag_dim();
    switch (cfg.aggregator) {
        case Aggregator::Abmil:
            aggregator_ = AbmilParams::create(d, cfg.att_dim, rng, 1);
            break;
        case Aggregator::Dsmil:
            aggregator_ = DsmilParams::create(d, cfg.att_dim, d, rng, 1);
            break;
        case Aggregator::MaxPool:
            aggregator_ = PooledHeadParams::create(d, rng, 1);
            break;
    }
}

BagOutput Model::forward(Tape& tape, const Matrix& features, const GraphContext* ctx) {
    if (features.cols() != cfg_.input_dim)
        throw DataError("model: feature dim " + std::to_string(features.cols()) +
                        " != configured input dim " + std::to_string(cfg_.input_dim));
    Tape::Id h = tape.constant(features);
    if (gnn_) {
        if (!ctx) throw InternalError("graph model forward without graph context");
        h = gnn_->forward(tape, h, *ctx);
    }
    return std::visit([&](auto& agg) { return agg.forward(tape, h); }, *aggregator_);
}

BagOutput Model::forward_intervened(Tape& tape, const Matrix& features,
                                    const GraphContext* ctx,
                                    const ConfounderDictionary& dict) {
    if (!head_) throw InternalError("intervention head not attached");
    BagOutput base = forward(tape, features, ctx);
    BagOutput out = base;
    out.prediction = head_->forward(tape, base.embedding, dict);
    return out;
}

void Model::attach_intervention_head(std::size_t d_proj, std::uint64_t seed) {
    Rng rng(seed);
    head_ = InterventionHead::create(cfg_.bag_dim(), d_proj, rng, 1);
}

InterventionHead& Model::intervention_head() {
    if (!head_) throw InternalError("intervention head not attached");
    return *head_;
}

std::vector<autodiff::Param*> Model::backbone_params() {
    std::vector<autodiff::Param*> out;
    if (gnn_) {
        auto g = gnn_->params();
        out.insert(out.end(), g.begin(), g.end());
    }
    std::visit(
        [&](auto& agg) {
            auto p = agg.params();
            out.insert(out.end(), p.begin(), p.end());
        },
        *aggregator_);
    return out;
}

std::vector<autodiff::Param*> Model::head_params() {
    if (!head_) return {};
    return head_->params();
}

std::vector<autodiff::Param*> Model::all_params() {
    auto out = backbone_params();
    auto h = head_params();
    out.insert(out.end(), h.begin(), h.end());
    return out;
}

std::uint64_t Model::backbone_hash() { return params_hash(backbone_params()); }

namespace {

constexpr char kMagic[4] = {'G', 'M', 'I', 'P'};
constexpr std::uint16_t kVersion = 1;

template <typename T>
void write_le(std::ostream& out, T v) {
    unsigned char buf[sizeof(T)];
    std::uint64_t bits;
    if constexpr (sizeof(T) == 8 && !std::is_integral_v<T>) {
        std::memcpy(&bits, &v, 8);
    } else {
        bits = static_cast<std::uint64_t>(v);
    }
    for (std::size_t i = 0; i < sizeof(T); ++i)
        buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const std::string& path) {
    unsigned char buf[sizeof(T)];
    in.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (!in)
        throw FileFormatError(FileFormatIssue::Truncated, "truncated checkpoint: " + path);
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    if constexpr (sizeof(T) == 8 && !std::is_integral_v<T>) {
        T v;
        std::memcpy(&v, &bits, 8);
        return v;
    } else {
        return static_cast<T>(bits);
    }
}

}  // namespace

void save_checkpoint(const std::vector<autodiff::Param*>& params,
                     const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for write: " + path);
    out.write(kMagic, 4);
    write_le<std::uint16_t>(out, kVersion);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
    for (const autodiff::Param* p : params) {
        write_le<std::uint16_t>(out, static_cast<std::uint16_t>(p->name.size()));
        out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(p->value.rows()));
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(p->value.cols()));
        for (double v : p->value.vec()) write_le<double>(out, v);
    }
    if (!out) throw DataError("write failed: " + path);
}

void load_checkpoint(const std::vector<autodiff::Param*>& params,
                     const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in) throw FileFormatError(FileFormatIssue::Truncated, "truncated checkpoint: " + path);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw FileFormatError(FileFormatIssue::BadMagic, "bad magic in checkpoint: " + path);
    std::uint16_t version = read_le<std::uint16_t>(in, path);
    if (version != kVersion)
        throw FileFormatError(FileFormatIssue::VersionMismatch,
                              "unsupported checkpoint version: " + path);
    std::uint32_t count = read_le<std::uint32_t>(in, path);
    if (count != params.size())
        throw DataError("checkpoint tensor count mismatch: " + path);
    for (autodiff::Param* p : params) {
        std::uint16_t len = read_le<std::uint16_t>(in, path);
        std::string name(len, '\0');
        in.read(name.data(), len);
        if (!in)
            throw FileFormatError(FileFormatIssue::Truncated, "truncated checkpoint: " + path);
        if (name != p->name)
            throw DataError("checkpoint tensor order mismatch: expected " + p->name +
                            ", found " + name);
        std::uint32_t rows = read_le<std::uint32_t>(in, path);
        std::uint32_t cols = read_le<std::uint32_t>(in, path);
        if (rows != p->value.rows() || cols != p->value.cols())
            throw DataError("checkpoint tensor shape mismatch for " + p->name);
        for (std::size_t i = 0; i < p->value.size(); ++i)
            p->value.data()[i] = read_le<double>(in, path);
    }
}

std::uint64_t params_hash(const std::vector<autodiff::Param*>& params) {
    std::uint64_t h = 14695981039346656037ULL;  // FNV-1a
    auto mix = [&](const unsigned char* bytes, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 1099511628211ULL;
        }
    };
    for (const autodiff::Param* p : params) {
        mix(reinterpret_cast<const unsigned char*>(p->name.data()), p->name.size());
        for (double v : p->value.vec()) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            mix(reinterpret_cast<const unsigned char*>(&bits), 8);
        }
    }
    return h;
}

}  // namespace gmil
