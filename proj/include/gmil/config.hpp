#pragma once

#include <string>

#include "gmil/pipeline.hpp"
#include "gmil/synth.hpp"

namespace gmil {

// Flat key=value run configuration covering training, graph and synthesis
// options. '#' starts a comment; unknown keys and bad values are usage
// errors. Every key has a default except `seed`, which must be present.
struct RunConfig {
    TrainConfig train;
    SynthConfig synth;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

// One line per key: name, type, default, meaning. Source for docs and help.
std::string config_key_reference();

}  // namespace gmil
