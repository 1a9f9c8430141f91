#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace metaenc::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kConvergenceError = 3,
  kIoError = 4,
};

/// Runs the command line `args` (without the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Git blob id: SHA-1 of "blob <size>\0" followed by the bytes.
std::string git_blob_hash(const std::string& bytes);

/// Default manifest location for a primary output file.
std::filesystem::path manifest_path_for(const std::filesystem::path& output);

}  // namespace metaenc::cli
