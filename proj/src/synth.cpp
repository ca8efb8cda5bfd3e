#include "gmil/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "gmil/errors.hpp"
#include "gmil/rng.hpp"

namespace gmil {
namespace {

std::vector<double> random_unit_vector(std::size_t dim, Rng& rng) {
    std::vector<double> v(dim);
    double norm = 0.0;
    do {
        norm = 0.0;
        for (double& x : v) {
            x = rng.normal();
            norm += x * x;
        }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    return v;
}

// Scatter m cells with no two 8-adjacent; restarts on dead ends.
std::vector<std::pair<int, int>> scatter_cells(std::size_t m, std::size_t h,
                                               std::size_t w, Rng& rng) {
    const int max_restarts = 1000;
    for (int attempt = 0; attempt < max_restarts; ++attempt) {
        std::vector<std::pair<int, int>> all;
        all.reserve(h * w);
        for (std::size_t r = 0; r < h; ++r)
            for (std::size_t c = 0; c < w; ++c)
                all.emplace_back(static_cast<int>(c), static_cast<int>(r));
        rng.shuffle(all);
        std::vector<std::pair<int, int>> chosen;
        std::set<std::pair<int, int>> blocked;
        for (auto cell : all) {
            if (blocked.count(cell)) continue;
            chosen.push_back(cell);
            if (chosen.size() == m) return chosen;
            for (int dx = -1; dx <= 1; ++dx)
                for (int dy = -1; dy <= 1; ++dy)
                    blocked.insert({cell.first + dx, cell.second + dy});
        }
    }
    throw DataError("synth: grid too small to scatter non-adjacent tumor patches");
}

}  // namespace

void SynthConfig::validate() const {
    if (label_center_corr < 0.0 || label_center_corr > 1.0)
        throw DataError("synth: label_center_corr must be in [0,1]");
    if (blob_radius < 1.0) throw DataError("synth: blob_radius must be >= 1");
    if (n_centers == 0 || slides_per_center == 0)
        throw DataError("synth: empty dataset configuration");
    std::size_t m = disc_cells(blob_radius).size();
    if (m > grid_h * grid_w)
        throw DataError("synth: grid smaller than tumor disc");
    std::size_t span = 2 * static_cast<std::size_t>(std::floor(blob_radius)) + 1;
    if (grid_h < span || grid_w < span)
        throw DataError("synth: tumor disc does not fit in the grid");
}

std::vector<std::pair<int, int>> disc_cells(double radius) {
    std::vector<std::pair<int, int>> cells;
    int r = static_cast<int>(std::floor(radius));
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
            if (dx * dx + dy * dy <= radius * radius) cells.emplace_back(dx, dy);
    return cells;
}

Manifest generate_dataset(const SynthConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    std::filesystem::create_directories(out_dir);
    Rng root(cfg.seed);

    const std::vector<double> u = random_unit_vector(cfg.feature_dim, root);
    std::vector<std::vector<double>> shifts(cfg.n_centers);
    for (std::size_t c = 0; c < cfg.n_centers; ++c) {
        shifts[c] = random_unit_vector(cfg.feature_dim, root);
        for (double& x : shifts[c]) x *= cfg.sigma_shift;
    }

    const auto disc = disc_cells(cfg.blob_radius);
    const std::size_t m = disc.size();
    const int h = static_cast<int>(cfg.grid_h);
    const int w = static_cast<int>(cfg.grid_w);
    const int r = static_cast<int>(std::floor(cfg.blob_radius));

    Manifest manifest;
    for (std::size_t c = 0; c < cfg.n_centers; ++c) {
        const std::string center = "center" + std::to_string(c);
        const double sign = (c % 2 == 0) ? 1.0 : -1.0;
        const double pos_rate = 0.5 + 0.5 * cfg.label_center_corr * sign;
        const std::size_t n_pos = static_cast<std::size_t>(
            std::llround(pos_rate * static_cast<double>(cfg.slides_per_center)));

        std::vector<int> labels(cfg.slides_per_center, 0);
        for (std::size_t i = 0; i < n_pos && i < labels.size(); ++i) labels[i] = 1;
        Rng label_rng = root.derive(1000 + c);
        label_rng.shuffle(labels);

        for (std::size_t s = 0; s < cfg.slides_per_center; ++s) {
            Rng rng = root.derive((c + 1) * 100000 + s);
            SlideRecord rec;
            rec.slide_id = center + "_s" + std::to_string(s);
            rec.center_id = center;
            rec.label = labels[s];
            rec.coords.reserve(cfg.grid_h * cfg.grid_w);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) rec.coords.emplace_back(x, y);
            rec.features = Matrix(rec.coords.size(), cfg.feature_dim);
            for (std::size_t i = 0; i < rec.features.rows(); ++i)
                for (std::size_t j = 0; j < cfg.feature_dim; ++j)
                    rec.features(i, j) = rng.normal(0.0, cfg.noise_std) + shifts[c][j];

            std::vector<std::pair<int, int>> tumor;
            bool place_disc = rec.label == 1;
            bool place_scatter =
                cfg.task == SynthTask::Contiguity && rec.label == 0;
            if (place_disc) {
                int cx = r + static_cast<int>(rng.uniform_index(
                                 static_cast<std::uint64_t>(w - 2 * r)));
                int cy = r + static_cast<int>(rng.uniform_index(
                                 static_cast<std::uint64_t>(h - 2 * r)));
                for (auto [dx, dy] : disc) tumor.emplace_back(cx + dx, cy + dy);
            } else if (place_scatter) {
                // Contiguity: both classes carry exactly m tumor patches.
                tumor = scatter_cells(m, cfg.grid_h, cfg.grid_w, rng);
            }
            for (auto [tx, ty] : tumor) {
                std::size_t idx = static_cast<std::size_t>(ty) * cfg.grid_w +
                                  static_cast<std::size_t>(tx);
                for (std::size_t j = 0; j < cfg.feature_dim; ++j)
                    rec.features(idx, j) += u[j];
            }

            std::string fname = rec.slide_id + ".gmil";
            std::string path = (std::filesystem::path(out_dir) / fname).string();
            save_slide(rec, path);
            manifest.entries.push_back({rec.slide_id, path, rec.label, center});
        }
    }
    save_manifest(manifest, (std::filesystem::path(out_dir) / "manifest.csv").string());
    return manifest;
}

}  // namespace gmil
