#include "gmil/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "gmil/errors.hpp"

namespace gmil {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::size_t to_size(const std::string& key, const std::string& v) {
    std::size_t out{};
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw UsageError("config key '" + key + "': not a non-negative integer: " + v);
    return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::uint64_t out{};
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw UsageError("config key '" + key + "': not a non-negative integer: " + v);
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw UsageError("config key '" + key + "': not a number: " + v);
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw UsageError("config key '" + key + "': expected true/false: " + v);
}

struct KeySpec {
    std::function<void(RunConfig&, const std::string&)> apply;
    std::string doc;  // "type default meaning"
};

const std::map<std::string, KeySpec>& key_table() {
    static const std::map<std::string, KeySpec> table = {
        {"seed", {[](RunConfig& c, const std::string& v) {
                      c.train.seed = to_u64("seed", v);
                      c.synth.seed = c.train.seed;
                  },
                  "uint (required) master seed for every random choice"}},
        {"epochs", {[](RunConfig& c, const std::string& v) {
                        c.train.epochs = to_size("epochs", v);
                    },
                    "uint default=50 training epochs per stage"}},
        {"grad_accum", {[](RunConfig& c, const std::string& v) {
                            c.train.grad_accum = to_size("grad_accum", v);
                            if (c.train.grad_accum == 0)
                                throw UsageError("config key 'grad_accum': must be >= 1");
                        },
                        "uint default=8 slides accumulated per optimizer step"}},
        {"lr_gnn", {[](RunConfig& c, const std::string& v) {
                        c.train.lr_gnn = to_double("lr_gnn", v);
                    },
                    "float default=1e-3 learning rate, graph parameters"}},
        {"lr_mil", {[](RunConfig& c, const std::string& v) {
                        c.train.lr_mil = to_double("lr_mil", v);
                    },
                    "float default=1e-4 learning rate, aggregator and heads"}},
        {"wd_gnn", {[](RunConfig& c, const std::string& v) {
                        c.train.wd_gnn = to_double("wd_gnn", v);
                    },
                    "float default=5e-4 weight decay, graph parameters"}},
        {"wd_mil", {[](RunConfig& c, const std::string& v) {
                        c.train.wd_mil = to_double("wd_mil", v);
                    },
                    "float default=1e-4 weight decay, aggregator and heads"}},
        {"use_gnn", {[](RunConfig& c, const std::string& v) {
                         c.train.use_gnn = to_bool("use_gnn", v);
                     },
                     "bool default=true graph front end on/off (off = plain MIL)"}},
        {"gnn", {[](RunConfig& c, const std::string& v) {
                     if (v == "gcn") c.train.gnn_kind = GnnKind::Gcn;
                     else if (v == "gat") c.train.gnn_kind = GnnKind::Gat;
                     else throw UsageError("config key 'gnn': expected gcn|gat: " + v);
                 },
                 "enum default=gcn graph layer type (gcn|gat)"}},
        {"aggregator", {[](RunConfig& c, const std::string& v) {
                            c.train.aggregator = parse_aggregator(v);
                        },
                        "enum default=abmil bag aggregator (abmil|dsmil|max)"}},
        {"layers", {[](RunConfig& c, const std::string& v) {
                        c.train.layers = to_size("layers", v);
                        if (c.train.layers == 0)
                            throw UsageError("config key 'layers': must be >= 1");
                    },
                    "uint default=3 graph layer count"}},
        {"hidden", {[](RunConfig& c, const std::string& v) {
                        c.train.hidden = to_size("hidden", v);
                    },
                    "uint default=256 graph hidden width"}},
        {"att_dim", {[](RunConfig& c, const std::string& v) {
                         c.train.att_dim = to_size("att_dim", v);
                     },
                     "uint default=64 aggregator attention width"}},
        {"graph", {[](RunConfig& c, const std::string& v) {
                       c.train.graph_kind = parse_graph_kind(v);
                   },
                   "enum default=patch graph construction "
                   "(patch|region-global|region-local|centroid)"}},
        {"k_regions", {[](RunConfig& c, const std::string& v) {
                           c.train.k_regions = to_size("k_regions", v);
                       },
                       "uint default=10 clusters for region graphs"}},
        {"centroid_k", {[](RunConfig& c, const std::string& v) {
                            c.train.centroid_k = to_size("centroid_k", v);
                        },
                        "uint default=9 nodes for centroid graphs"}},
        {"chunk", {[](RunConfig& c, const std::string& v) {
                       c.train.chunk = to_size("chunk", v);
                       if (c.train.chunk == 0)
                           throw UsageError("config key 'chunk': must be >= 1");
                   },
                   "uint default=50 slides per global clustering batch"}},
        {"patch_connectivity",
         {[](RunConfig& c, const std::string& v) {
              c.train.patch_connectivity = static_cast<int>(to_size("patch_connectivity", v));
              if (c.train.patch_connectivity != 4 && c.train.patch_connectivity != 8)
                  throw UsageError("config key 'patch_connectivity': expected 4 or 8");
          },
          "uint default=8 patch graph neighborhood (4|8)"}},
        {"cc_connectivity",
         {[](RunConfig& c, const std::string& v) {
              c.train.cc_connectivity = static_cast<int>(to_size("cc_connectivity", v));
              if (c.train.cc_connectivity != 4 && c.train.cc_connectivity != 8)
                  throw UsageError("config key 'cc_connectivity': expected 4 or 8");
          },
          "uint default=4 region component neighborhood (4|8)"}},
        {"confounder_k", {[](RunConfig& c, const std::string& v) {
                              c.train.confounder_k = to_size("confounder_k", v);
                          },
                          "uint default=8 confounder dictionary size K"}},
        {"pca_dim", {[](RunConfig& c, const std::string& v) {
                         c.train.pca_dim = to_size("pca_dim", v);
                     },
                     "uint default=64 PCA dimension cap for dictionary clustering"}},
        {"proj_dim", {[](RunConfig& c, const std::string& v) {
                          c.train.proj_dim = to_size("proj_dim", v);
                      },
                      "uint default=128 intervention attention projection width"}},
        {"priors", {[](RunConfig& c, const std::string& v) {
                        if (v == "proportional") c.train.prior_mode = PriorMode::Proportional;
                        else if (v == "uniform") c.train.prior_mode = PriorMode::Uniform;
                        else
                            throw UsageError(
                                "config key 'priors': expected proportional|uniform: " + v);
                    },
                    "enum default=proportional stratum priors (proportional|uniform)"}},
        {"threshold", {[](RunConfig& c, const std::string& v) {
                           c.train.threshold = to_double("threshold", v);
                       },
                       "float default=0.5 decision threshold"}},
        {"folds", {[](RunConfig& c, const std::string& v) {
                       c.train.folds = to_size("folds", v);
                       if (c.train.folds < 2)
                           throw UsageError("config key 'folds': must be >= 2");
                   },
                   "uint default=5 cross-validation folds"}},
        {"fold_mode", {[](RunConfig& c, const std::string& v) {
                           if (v == "shuffled") c.train.fold_mode = FoldMode::Shuffled;
                           else if (v == "by-center") c.train.fold_mode = FoldMode::ByCenter;
                           else
                               throw UsageError(
                                   "config key 'fold_mode': expected shuffled|by-center: " + v);
                       },
                       "enum default=shuffled fold assignment (shuffled|by-center)"}},
        {"n_centers", {[](RunConfig& c, const std::string& v) {
                           c.synth.n_centers = to_size("n_centers", v);
                       },
                       "uint default=3 synthetic centers"}},
        {"slides_per_center", {[](RunConfig& c, const std::string& v) {
                                   c.synth.slides_per_center = to_size("slides_per_center", v);
                               },
                               "uint default=20 synthetic slides per center"}},
        {"grid_h", {[](RunConfig& c, const std::string& v) {
                        c.synth.grid_h = to_size("grid_h", v);
                    },
                    "uint default=12 synthetic patch grid height"}},
        {"grid_w", {[](RunConfig& c, const std::string& v) {
                        c.synth.grid_w = to_size("grid_w", v);
                    },
                    "uint default=12 synthetic patch grid width"}},
        {"feature_dim", {[](RunConfig& c, const std::string& v) {
                             c.synth.feature_dim = to_size("feature_dim", v);
                         },
                         "uint default=16 synthetic feature dimension"}},
        {"blob_radius", {[](RunConfig& c, const std::string& v) {
                             c.synth.blob_radius = to_double("blob_radius", v);
                         },
                         "float default=2.0 tumor disc radius in grid units"}},
        {"sigma_shift", {[](RunConfig& c, const std::string& v) {
                             c.synth.sigma_shift = to_double("sigma_shift", v);
                         },
                         "float default=0.5 per-center feature shift magnitude"}},
        {"rho", {[](RunConfig& c, const std::string& v) {
                     c.synth.label_center_corr = to_double("rho", v);
                 },
                 "float default=0.0 label/center correlation in [0,1]"}},
        {"task", {[](RunConfig& c, const std::string& v) {
                      if (v == "presence") c.synth.task = SynthTask::Presence;
                      else if (v == "contiguity") c.synth.task = SynthTask::Contiguity;
                      else
                          throw UsageError(
                              "config key 'task': expected presence|contiguity: " + v);
                  },
                  "enum default=presence synthetic task (presence|contiguity)"}},
        {"noise_std", {[](RunConfig& c, const std::string& v) {
                           c.synth.noise_std = to_double("noise_std", v);
                       },
                       "float default=1.0 synthetic feature noise"}},
    };
    return table;
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
    RunConfig cfg;
    bool seen_seed = false;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError("config line " + std::to_string(lineno) +
                             ": expected key=value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        auto it = key_table().find(key);
        if (it == key_table().end())
            throw UsageError("unknown config key '" + key + "' (line " +
                             std::to_string(lineno) + ")");
        it->second.apply(cfg, value);
        if (key == "seed") seen_seed = true;
    }
    if (!seen_seed) throw UsageError("missing required config key 'seed'");
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str());
}

std::string config_key_reference() {
    std::ostringstream os;
    for (const auto& [key, spec] : key_table()) os << key << "  " << spec.doc << "\n";
    return os.str();
}

}  // namespace gmil
