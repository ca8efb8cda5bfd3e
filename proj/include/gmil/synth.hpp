#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gmil/slide.hpp"

namespace gmil {

enum class SynthTask { Presence, Contiguity };

// Multi-center synthetic generator. Every patch gets gaussian noise plus its
// center's shift vector; tumor patches additionally get the unit signal
// direction u. Presence: only positive slides contain tumor patches (one
// disc). Contiguity: every slide contains exactly disc-area tumor patches;
// positives as one contiguous disc, negatives scattered with no two
// 8-adjacent, so per-instance statistics are class-identical and only the
// spatial arrangement carries the label.
struct SynthConfig {
    std::size_t n_centers = 3;
    std::size_t slides_per_center = 20;
    std::size_t grid_h = 12;
    std::size_t grid_w = 12;
    std::size_t feature_dim = 16;
    double blob_radius = 2.0;      // grid units
    double sigma_shift = 0.5;      // magnitude of per-center feature shift
    double label_center_corr = 0.0;  // rho in [0,1]
    SynthTask task = SynthTask::Presence;
    double noise_std = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
};

// Cells of a disc of the configured radius; defines the tumor patch count m.
std::vector<std::pair<int, int>> disc_cells(double radius);

// Writes GMIL slide files plus manifest.csv into out_dir; returns the
// manifest. Byte-deterministic per (config, out_dir layout).
Manifest generate_dataset(const SynthConfig& cfg, const std::string& out_dir);

}  // namespace gmil
