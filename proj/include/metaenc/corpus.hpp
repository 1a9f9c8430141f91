#pragma once

// Corpora of trained class AEs: building, splitting and persistence.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "metaenc/autoenc.hpp"
#include "metaenc/classes.hpp"

namespace metaenc {

enum class Family { Line, Circle, Arc };

std::string_view to_string(Family f);
Family family_from_string(std::string_view s);
Family family_of(const ClassSpec& spec);

/// How the starting weights of the AEs in a corpus are chosen.
///  - Independent: a fresh draw per AE.
///  - Shared: every AE starts from the same draw.
///  - Continuation: the first class starts from a shared draw; each later
///    class starts from the best trained AE of the class before it, in grid
///    order. AEs of neighbouring classes then sit in the same basin, which
///    keeps their parameter vectors comparable across the family.
enum class AeInit { Independent, Shared, Continuation };

std::string_view to_string(AeInit init);
AeInit ae_init_from_string(std::string_view s);

struct CorpusConfig {
  Family family = Family::Line;
  std::vector<ClassSpec> classes;
  std::size_t aes_per_class = 2;
  std::size_t points_per_ae = 0;  // 0 = default_points for the architecture
  AeTrainConfig ae;
  AeInit init = AeInit::Independent;
  std::uint64_t seed = 0;
  /// A build with more excluded AEs than this fraction fails.
  double max_failure_fraction = 0.5;

  /// 16 lines x 2 AEs x 1000 points; 10 radii x 2 AEs x 200 points.
  static CorpusConfig desk(Family family);
  /// 160 lines x 10 AEs x 1000 points; 10 radii x 10 AEs x 200 points.
  static CorpusConfig full(Family family);
};

/// Stable digest of every setting that affects the built records.
std::string config_hash(const CorpusConfig& cfg);

struct CorpusProvenance {
  std::string family;
  std::uint64_t base_seed = 0;
  std::size_t classes = 0;
  std::size_t aes_per_class = 0;
  std::size_t points_per_ae = 0;
  std::string init;
  std::size_t excluded = 0;
  std::string config_hash;

  bool operator==(const CorpusProvenance&) const = default;
};

struct Corpus {
  AeArchId arch = AeArchId::Line212;
  std::vector<AeRecord> records;
  CorpusProvenance provenance;

  bool operator==(const Corpus&) const = default;
};

using LogSink = std::function<void(const std::string&)>;

/// Trains cfg.aes_per_class AEs per class; AE k of class c uses seed
/// derive_seed(cfg.seed, c, k) and its own point sample. Arc and circle
/// records are normalized. Non-converging AEs are excluded and counted.
/// `jobs` worker threads train records concurrently; the result does not
/// depend on it. Throws TrainingError when too many AEs fail.
Corpus build_corpus(const CorpusConfig& cfg, std::size_t jobs = 1, const LogSink& log = {});

/// Throws ContractError on mixed architectures or duplicate (class, seed) pairs.
void check_corpus(const Corpus& corpus);

enum class SplitMode { ByRecord, ByClass };

std::string_view to_string(SplitMode m);
SplitMode split_mode_from_string(std::string_view s);

struct CorpusSplit {
  std::vector<AeRecord> train;
  std::vector<AeRecord> test;
};

/// Holds out round(test_fraction * n) records (ByRecord) or whole classes
/// (ByClass), chosen by a seeded shuffle. Both sides keep corpus order.
/// Throws ContractError when either side would be empty.
CorpusSplit split(const Corpus& corpus, double test_fraction, SplitMode mode, std::uint64_t seed);

/// Classes of the records, without repeats, in order of first appearance.
std::vector<ClassSpec> distinct_classes(std::span<const AeRecord> records);

void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_corpus(const std::filesystem::path& path);

std::string corpus_to_string(const Corpus& corpus);
Corpus corpus_from_string(const std::string& text);

}  // namespace metaenc
