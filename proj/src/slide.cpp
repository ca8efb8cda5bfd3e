#include "gmil/slide.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "gmil/rng.hpp"

namespace gmil {
namespace {

constexpr char kMagic[4] = {'G', 'M', 'I', 'L'};
constexpr std::uint16_t kVersion = 1;

template <typename T>
void write_le(std::ostream& out, T v) {
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i)
        buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

void write_f32(std::ostream& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_le<std::uint32_t>(out, bits);
}

template <typename T>
T read_le(std::istream& in, const std::string& path) {
    unsigned char buf[sizeof(T)];
    in.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (!in)
        throw FileFormatError(FileFormatIssue::Truncated, "truncated slide file: " + path);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return static_cast<T>(v);
}

float read_f32(std::istream& in, const std::string& path) {
    std::uint32_t bits = read_le<std::uint32_t>(in, path);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

}  // namespace

void SlideRecord::validate() const {
    if (coords.empty()) throw DataError("slide " + slide_id + ": no patches");
    if (features.rows() != coords.size())
        throw DataError("slide " + slide_id + ": feature rows != coord count");
    std::set<std::pair<std::int32_t, std::int32_t>> seen(coords.begin(), coords.end());
    if (seen.size() != coords.size())
        throw DataError("slide " + slide_id + ": duplicate coordinates");
    features.check_finite("slide features");
}

void save_slide(const SlideRecord& record, const std::string& path) {
    record.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for write: " + path);
    out.write(kMagic, 4);
    write_le<std::uint16_t>(out, kVersion);
    write_le<std::uint8_t>(out, static_cast<std::uint8_t>(record.label));
    write_le<std::uint16_t>(out, static_cast<std::uint16_t>(record.center_id.size()));
    out.write(record.center_id.data(),
              static_cast<std::streamsize>(record.center_id.size()));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(record.n_patches()));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(record.feature_dim()));
    for (auto [x, y] : record.coords) {
        write_le<std::int32_t>(out, x);
        write_le<std::int32_t>(out, y);
    }
    for (double v : record.features.vec()) write_f32(out, static_cast<float>(v));
    if (!out) throw DataError("write failed: " + path);
}

SlideRecord load_slide(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in) throw FileFormatError(FileFormatIssue::Truncated, "truncated slide file: " + path);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw FileFormatError(FileFormatIssue::BadMagic, "bad magic in slide file: " + path);
    std::uint16_t version = read_le<std::uint16_t>(in, path);
    if (version != kVersion)
        throw FileFormatError(FileFormatIssue::VersionMismatch,
                              "unsupported slide format version " +
                                  std::to_string(version) + ": " + path);
    SlideRecord rec;
    rec.label = read_le<std::uint8_t>(in, path);
    std::uint16_t center_len = read_le<std::uint16_t>(in, path);
    rec.center_id.resize(center_len);
    in.read(rec.center_id.data(), center_len);
    if (!in) throw FileFormatError(FileFormatIssue::Truncated, "truncated slide file: " + path);
    std::uint32_t n = read_le<std::uint32_t>(in, path);
    std::uint32_t f = read_le<std::uint32_t>(in, path);
    rec.coords.resize(n);
    for (auto& [x, y] : rec.coords) {
        x = read_le<std::int32_t>(in, path);
        y = read_le<std::int32_t>(in, path);
    }
    rec.features = Matrix(n, f);
    double* fd = rec.features.data();
    for (std::size_t i = 0; i < rec.features.size(); ++i)
        fd[i] = static_cast<double>(read_f32(in, path));
    return rec;
}

std::vector<std::string> Manifest::center_ids() const {
    std::vector<std::string> out;
    for (const auto& e : entries)
        if (std::find(out.begin(), out.end(), e.center_id) == out.end())
            out.push_back(e.center_id);
    return out;
}

Manifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest: " + path);
    std::filesystem::path base = std::filesystem::path(path).parent_path();
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty manifest: " + path);
    if (line != "slide_id,path,label,center_id")
        throw DataError("bad manifest header: " + line);
    Manifest m;
    std::set<std::string> ids;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        ManifestEntry e;
        std::string label_str;
        if (!std::getline(ss, e.slide_id, ',') || !std::getline(ss, e.path, ',') ||
            !std::getline(ss, label_str, ',') || !std::getline(ss, e.center_id))
            throw DataError("malformed manifest row: " + line);
        e.label = std::stoi(label_str);
        if (e.label != 0 && e.label != 1)
            throw DataError("manifest label must be 0 or 1: " + line);
        if (!ids.insert(e.slide_id).second)
            throw DataError("duplicate slide_id in manifest: " + e.slide_id);
        std::filesystem::path p(e.path);
        if (p.is_relative()) e.path = (base / p).string();
        if (!std::filesystem::exists(e.path))
            throw DataError("manifest references missing file: " + e.path);
        m.entries.push_back(std::move(e));
    }
    return m;
}

void save_manifest(const Manifest& manifest, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for write: " + path);
    out << "slide_id,path,label,center_id\n";
    std::filesystem::path base = std::filesystem::path(path).parent_path();
    for (const auto& e : manifest.entries) {
        std::filesystem::path p(e.path);
        std::string rel = p.lexically_proximate(base).string();
        out << e.slide_id << ',' << rel << ',' << e.label << ',' << e.center_id << '\n';
    }
}

SlideRecord load_manifest_slide(const ManifestEntry& entry) {
    SlideRecord rec = load_slide(entry.path);
    rec.slide_id = entry.slide_id;
    return rec;
}

FoldPlan build_folds(const Manifest& manifest, FoldMode mode, std::size_t k,
                     std::uint64_t seed) {
    FoldPlan plan;
    plan.mode = mode;
    const std::size_t n = manifest.entries.size();
    if (mode == FoldMode::ByCenter) {
        auto centers = manifest.center_ids();
        if (centers.size() != k)
            throw DataError("by-center folds: " + std::to_string(centers.size()) +
                            " centers but k=" + std::to_string(k));
        for (const std::string& c : centers) {
            FoldPlan::Fold fold;
            fold.test_center = c;
            for (std::size_t i = 0; i < n; ++i) {
                if (manifest.entries[i].center_id == c) fold.test.push_back(i);
                else fold.train.push_back(i);
            }
            plan.folds.push_back(std::move(fold));
        }
        return plan;
    }

    if (n < k) throw DataError("shuffled folds: fewer slides than folds");
    // Stratified: shuffle within each label, then deal round-robin.
    Rng rng(seed);
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < n; ++i)
        (manifest.entries[i].label == 1 ? pos : neg).push_back(i);
    rng.shuffle(pos);
    rng.shuffle(neg);
    std::vector<std::vector<std::size_t>> test_sets(k);
    std::size_t next = 0;
    for (std::size_t i = 0; i < pos.size(); ++i, next = (next + 1) % k)
        test_sets[next].push_back(pos[i]);
    for (std::size_t i = 0; i < neg.size(); ++i, next = (next + 1) % k)
        test_sets[next].push_back(neg[i]);
    for (std::size_t f = 0; f < k; ++f) {
        FoldPlan::Fold fold;
        fold.test = test_sets[f];
        std::sort(fold.test.begin(), fold.test.end());
        for (std::size_t i = 0; i < n; ++i)
            if (!std::binary_search(fold.test.begin(), fold.test.end(), i))
                fold.train.push_back(i);
        plan.folds.push_back(std::move(fold));
    }
    return plan;
}

}  // namespace gmil
