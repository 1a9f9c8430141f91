#pragma once

// Property checks shared by the `selftest` command and the acceptance suite.
// Each returns a verdict with a one-line detail string.

#include <cstdint>
#include <string>

namespace metaenc {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

/// Random nets (every activation kind, removed edges, frozen entries):
/// reverse-mode parameter and input gradients against central differences.
/// Relative error is |a - n| / max(|a|, |n|, 1e-3).
CheckResult check_gradients(std::size_t nets = 100, std::uint64_t seed = 1);

/// The closed-form line AE reconstructs sampled points of its line exactly.
CheckResult check_line_optimum(std::size_t points = 1000, std::uint64_t seed = 1);

/// |z - decode(encode(z))| over random points of a line, a circle and an arc.
CheckResult check_encodability(std::size_t points = 10000, std::uint64_t seed = 1);

/// Idempotence, behaviour preservation and permutation canonicalization of
/// arc AE normalization over random AEs.
CheckResult check_normalization(std::size_t aes = 50, std::uint64_t seed = 1);

/// Exec-loss between the slope-1 and slope-2 closed-form line AEs against
/// the value computed directly from the probe abscissae (55.54445).
CheckResult check_exec_oracle();

/// Save/load round trip of a small corpus and detection of a corrupt byte.
CheckResult check_persistence(std::uint64_t seed = 1);

}  // namespace metaenc
