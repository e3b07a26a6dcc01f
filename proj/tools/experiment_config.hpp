#pragma once

#include <filesystem>
#include <stdexcept>

#include "pottsvb/evalbench.hpp"

namespace pottsvb::cli {

/// Invalid experiment configuration; the message carries a JSON-pointer
/// style location of the offending entry.
class config_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Loads and validates an experiment configuration file. Unknown keys are
/// rejected; every error names its location, e.g. "/methods/2".
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

} // namespace pottsvb::cli
