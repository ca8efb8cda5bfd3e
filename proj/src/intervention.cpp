#include "gmil/intervention.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <type_traits>

#include "gmil/errors.hpp"
#include "gmil/gnn.hpp"

namespace gmil {

using autodiff::Act;
using autodiff::Tape;

void ConfounderDictionary::validate() const {
    if (strata.rows() != priors.size())
        throw InternalError("dictionary strata/prior count mismatch");
    double s = 0.0;
    for (double p : priors) {
        if (p < 0.0) throw InternalError("negative confounder prior");
        s += p;
    }
    if (std::fabs(s - 1.0) > 1e-9) throw InternalError("confounder priors do not sum to 1");
}

ConfounderDictionary build_confounder_dictionary(const Matrix& bag_embeddings,
                                                 std::size_t k, std::size_t pca_dim,
                                                 std::uint64_t seed, PriorMode priors,
                                                 std::uint64_t model_hash) {
    const std::size_t n = bag_embeddings.rows();
    const std::size_t d = bag_embeddings.cols();
    if (n < k) throw DataError("confounder dictionary: fewer embeddings than K");
    ConfounderDictionary dict;
    dict.model_hash = model_hash;

    PcaResult pca = pca_fit_transform(bag_embeddings, std::min({pca_dim, n, d}));
    dict.pca = pca.basis;
    KMeansResult km = kmeans(pca.projected, k, seed);

    // Strata are means of the ORIGINAL embeddings per cluster; PCA is only a
    // clustering aid.
    dict.strata = Matrix(k, d);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t c = km.assignments[i];
        ++counts[c];
        for (std::size_t j = 0; j < d; ++j) dict.strata(c, j) += bag_embeddings(i, j);
    }
    dict.priors.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0) throw InternalError("empty confounder cluster");
        for (std::size_t j = 0; j < d; ++j)
            dict.strata(c, j) /= static_cast<double>(counts[c]);
        dict.priors[c] = priors == PriorMode::Uniform
                             ? 1.0 / static_cast<double>(k)
                             : static_cast<double>(counts[c]) / static_cast<double>(n);
    }
    dict.validate();
    return dict;
}

namespace {

constexpr char kMagic[4] = {'G', 'M', 'I', 'C'};
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
        throw FileFormatError(FileFormatIssue::Truncated, "truncated dictionary: " + path);
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

void save_dictionary(const ConfounderDictionary& dict, const std::string& path) {
    dict.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for write: " + path);
    out.write(kMagic, 4);
    write_le<std::uint16_t>(out, kVersion);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(dict.k()));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(dict.strata.cols()));
    for (double v : dict.strata.vec()) write_le<double>(out, v);
    for (double v : dict.priors) write_le<double>(out, v);
    write_le<std::uint64_t>(out, dict.model_hash);
    if (!out) throw DataError("write failed: " + path);
}

ConfounderDictionary load_dictionary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in) throw FileFormatError(FileFormatIssue::Truncated, "truncated dictionary: " + path);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw FileFormatError(FileFormatIssue::BadMagic, "bad magic in dictionary: " + path);
    std::uint16_t version = read_le<std::uint16_t>(in, path);
    if (version != kVersion)
        throw FileFormatError(FileFormatIssue::VersionMismatch,
                              "unsupported dictionary version: " + path);
    std::uint32_t k = read_le<std::uint32_t>(in, path);
    std::uint32_t d = read_le<std::uint32_t>(in, path);
    ConfounderDictionary dict;
    dict.strata = Matrix(k, d);
    for (std::size_t i = 0; i < dict.strata.size(); ++i)
        dict.strata.data()[i] = read_le<double>(in, path);
    dict.priors.resize(k);
    for (double& p : dict.priors) p = read_le<double>(in, path);
    dict.model_hash = read_le<std::uint64_t>(in, path);
    dict.validate();
    return dict;
}

InterventionHead InterventionHead::create(std::size_t d_bag, std::size_t d_proj,
                                          Rng& rng, int param_group) {
    return InterventionHead{
        autodiff::Param("ivt.W1", glorot_uniform(d_bag, d_proj, rng), param_group),
        autodiff::Param("ivt.W2", glorot_uniform(d_bag, d_proj, rng), param_group),
        autodiff::Param("ivt.ffn_w", glorot_uniform(2 * d_bag, d_bag, rng), param_group),
        autodiff::Param("ivt.ffn_b", Matrix(1, d_bag), param_group),
        autodiff::Param("ivt.out_w", glorot_uniform(d_bag, 1, rng), param_group),
        autodiff::Param("ivt.out_b", Matrix(1, 1), param_group)};
}

Tape::Id InterventionHead::attention(Tape& tape, Tape::Id bag,
                                     const ConfounderDictionary& dict) {
    if (tape.value(bag).cols() != dict.strata.cols())
        throw DataError("intervention: bag/stratum dimension mismatch");
    Tape::Id proj_bag = tape.matmul(bag, tape.param(w1));                  // 1 x d_p
    Tape::Id proj_strata = tape.matmul(tape.constant(dict.strata), tape.param(w2));  // K x d_p
    Tape::Id logits = tape.scale(tape.matmul(proj_bag, tape.transpose(proj_strata)),
                                 1.0 / std::sqrt(static_cast<double>(proj_dim())));
    return tape.softmax_rows(logits);  // 1 x K
}

Tape::Id InterventionHead::forward(Tape& tape, Tape::Id bag,
                                   const ConfounderDictionary& dict) {
    Tape::Id alpha = attention(tape, bag, dict);
    Matrix prior_row(1, dict.k());
    for (std::size_t i = 0; i < dict.k(); ++i) prior_row(0, i) = dict.priors[i];
    Tape::Id weighted = tape.matmul(tape.mul_const(alpha, std::move(prior_row)),
                                    tape.constant(dict.strata));  // 1 x d_B
    Tape::Id z = tape.concat_cols(bag, weighted);                 // 1 x 2 d_B
    Tape::Id hidden = tape.activation(
        Act::Relu, tape.add(tape.matmul(z, tape.param(ffn_w)), tape.param(ffn_b)));
    Tape::Id logit = tape.add(tape.matmul(hidden, tape.param(out_w)), tape.param(out_b));
    return tape.activation(Act::Sigmoid, logit);
}

std::vector<autodiff::Param*> InterventionHead::params() {
    return {&w1, &w2, &ffn_w, &ffn_b, &out_w, &out_b};
}

}  // namespace gmil
