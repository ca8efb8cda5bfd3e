#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gmil/errors.hpp"
#include "gmil/matrix.hpp"

namespace gmil {

// One bag: per-patch features plus grid coordinates (pixel coord / patch
// size; adjacency is integer arithmetic on these).
struct SlideRecord {
    std::string slide_id;
    int label = 0;  // 0 normal, 1 tumor
    std::string center_id;
    std::vector<std::pair<std::int32_t, std::int32_t>> coords;
    Matrix features;  // N_p x F

    std::size_t n_patches() const { return coords.size(); }
    std::size_t feature_dim() const { return features.cols(); }
    void validate() const;
};

enum class FileFormatIssue { BadMagic, Truncated, VersionMismatch };

class FileFormatError : public DataError {
public:
    FileFormatError(FileFormatIssue issue, std::string msg)
        : DataError(std::move(msg)), issue_(issue) {}
    FileFormatIssue issue() const { return issue_; }

private:
    FileFormatIssue issue_;
};

// GMIL binary slide format, little-endian:
//   "GMIL" | u16 version=1 | u8 label | u16 center-id length + bytes
//   | u32 N_p | u32 F | N_p x 2 i32 coords | N_p x F f32 features row-major
void save_slide(const SlideRecord& record, const std::string& path);
SlideRecord load_slide(const std::string& path);

struct ManifestEntry {
    std::string slide_id;
    std::string path;
    int label = 0;
    std::string center_id;
};

struct Manifest {
    std::vector<ManifestEntry> entries;
    std::vector<std::string> center_ids() const;  // distinct, in first-seen order
};

// CSV with header: slide_id,path,label,center_id. Relative paths resolve
// against the manifest's directory.
Manifest load_manifest(const std::string& path);
void save_manifest(const Manifest& manifest, const std::string& path);
SlideRecord load_manifest_slide(const ManifestEntry& entry);

enum class FoldMode { Shuffled, ByCenter };

struct FoldPlan {
    struct Fold {
        std::vector<std::size_t> train;  // manifest indices
        std::vector<std::size_t> test;
        std::string test_center;         // by-center mode only
    };
    std::vector<Fold> folds;
    FoldMode mode = FoldMode::Shuffled;
};

// Shuffled: seed-deterministic label-stratified split into k near-equal
// folds. ByCenter: one fold per distinct center (count must equal k).
FoldPlan build_folds(const Manifest& manifest, FoldMode mode, std::size_t k,
                     std::uint64_t seed);

}  // namespace gmil
