#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "crowdloc/synth.hpp"

namespace crowdloc {

// process exit codes
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitIoError = 3;
inline constexpr int kExitNumericError = 4;

/// Entry point behind the crowdloc binary; args exclude the program name.
/// Subcommands: gen, train, eval, match, ablate.
int run_cli(const std::vector<std::string>& args);

/// Loads the three split files written by `gen` from a dataset directory.
SynthDataset load_dataset_dir(const std::filesystem::path& dir);

}  // namespace crowdloc
