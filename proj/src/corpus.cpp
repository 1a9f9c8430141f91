#include "metaenc/corpus.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <optional>
#include <set>
#include <thread>

#include "metaenc/errors.hpp"
#include "metaenc/rng.hpp"
#include "metaenc/serialize.hpp"

namespace metaenc {

namespace {

constexpr std::uint64_t kSharedInitStream = 0x1a17;

constexpr std::string_view kFlattenOrder =
    "per layer transition: trainable weights row-major over (destination, source), "
    "then trainable biases; absent and frozen entries omitted";

// Runs body(i) for i in [0, n) on up to `jobs` threads; rethrows the first
// exception after all workers stop.
template <class F>
void parallel_for(std::size_t n, std::size_t jobs, F&& body) {
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (error) std::rethrow_exception(error);
}

Json ae_config_to_json(const AeTrainConfig& c) {
  return Json{{"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"lr", format_double(c.adam.lr)},
              {"beta1", format_double(c.adam.beta1)},
              {"beta2", format_double(c.adam.beta2)},
              {"eps", format_double(c.adam.eps)},
              {"lr_final", format_double(c.lr_final)},
              {"init_scale", format_double(c.init_scale)},
              {"test_points", c.test_points},
              {"line_threshold", format_double(c.line_threshold)},
              {"arc_threshold_factor", format_double(c.arc_threshold_factor)},
              {"max_retries", c.max_retries}};
}

}  // namespace

std::string_view to_string(Family f) {
  switch (f) {
    case Family::Line: return "line";
    case Family::Circle: return "circle";
    case Family::Arc: return "arc";
  }
  return "?";
}

Family family_from_string(std::string_view s) {
  if (s == "line") return Family::Line;
  if (s == "circle") return Family::Circle;
  if (s == "arc") return Family::Arc;
  throw ContractError("unknown family '" + std::string(s) + "'");
}

Family family_of(const ClassSpec& spec) {
  if (std::holds_alternative<LineClass>(spec)) return Family::Line;
  if (std::holds_alternative<CircleClass>(spec)) return Family::Circle;
  return Family::Arc;
}

std::string_view to_string(AeInit init) {
  switch (init) {
    case AeInit::Independent: return "independent";
    case AeInit::Shared: return "shared";
    case AeInit::Continuation: return "continuation";
  }
  return "?";
}

AeInit ae_init_from_string(std::string_view s) {
  if (s == "independent") return AeInit::Independent;
  if (s == "shared") return AeInit::Shared;
  if (s == "continuation") return AeInit::Continuation;
  throw ContractError("unknown init mode '" + std::string(s) + "'");
}

CorpusConfig CorpusConfig::desk(Family family) {
  CorpusConfig cfg;
  cfg.family = family;
  cfg.aes_per_class = 2;
  switch (family) {
    case Family::Line: cfg.classes = line_grid(16); break;
    case Family::Circle: cfg.classes = circle_grid(10); break;
    case Family::Arc: cfg.classes = arc_grid(10); break;
  }
  const AeArchId arch = family == Family::Line ? AeArchId::Line212 : AeArchId::Arc28122;
  cfg.points_per_ae = default_points(arch);
  cfg.ae = default_ae_config(arch);
  cfg.init = family == Family::Line ? AeInit::Independent : AeInit::Continuation;
  return cfg;
}

CorpusConfig CorpusConfig::full(Family family) {
  CorpusConfig cfg = desk(family);
  cfg.aes_per_class = 10;
  if (family == Family::Line) cfg.classes = line_grid(160);
  return cfg;
}

std::string config_hash(const CorpusConfig& cfg) {
  Json classes = Json::array();
  for (const ClassSpec& c : cfg.classes) classes.push_back(class_to_json(c));
  const Json j{{"family", std::string(to_string(cfg.family))},
               {"classes", classes},
               {"aes_per_class", cfg.aes_per_class},
               {"points_per_ae", cfg.points_per_ae},
               {"ae", ae_config_to_json(cfg.ae)},
               {"init", std::string(to_string(cfg.init))},
               {"seed", cfg.seed},
               {"max_failure_fraction", format_double(cfg.max_failure_fraction)}};
  return hex64(fnv1a64(j.dump()));
}

Corpus build_corpus(const CorpusConfig& cfg, std::size_t jobs, const LogSink& log) {
  if (cfg.classes.empty()) throw ContractError("corpus needs at least one class");
  if (cfg.aes_per_class == 0) throw ContractError("aes_per_class must be positive");
  for (const ClassSpec& c : cfg.classes) {
    validate(c);
    if (family_of(c) != cfg.family) {
      throw ContractError(label(c) + " is not in the " + std::string(to_string(cfg.family)) +
                          " family");
    }
  }
  const AeArchId arch = arch_for(cfg.classes.front());
  const std::size_t points = cfg.points_per_ae ? cfg.points_per_ae : default_points(arch);

  const std::size_t n_classes = cfg.classes.size();
  const std::size_t per = cfg.aes_per_class;
  std::vector<std::optional<AeRecord>> trained(n_classes * per);

  AeTrainConfig base = cfg.ae;
  base.shared_init_seed.reset();
  base.init_params.clear();
  if (cfg.init != AeInit::Independent) base.shared_init_seed = derive_seed(cfg.seed, kSharedInitStream);

  auto train_one = [&](std::size_t c, std::size_t k, const AeTrainConfig& ae_cfg) {
    try {
      trained[c * per + k] = train_ae_until_converged(arch, cfg.classes[c], points, ae_cfg,
                                                      derive_seed(cfg.seed, c, k));
    } catch (const TrainingError&) {
      trained[c * per + k].reset();
    }
  };

  if (cfg.init == AeInit::Continuation) {
    AeTrainConfig ae_cfg = base;
    for (std::size_t c = 0; c < n_classes; ++c) {
      parallel_for(per, jobs, [&](std::size_t k) { train_one(c, k, ae_cfg); });
      const AeRecord* seed_rec = nullptr;
      for (std::size_t k = 0; k < per; ++k) {
        const auto& r = trained[c * per + k];
        if (!r || !r->converged) continue;
        if (!seed_rec || r->train_stats.final_test_rmse < seed_rec->train_stats.final_test_rmse) {
          seed_rec = &*r;
        }
      }
      if (seed_rec) {
        const auto p = seed_rec->model.params();
        ae_cfg.init_params.assign(p.begin(), p.end());
      }
    }
  } else {
    parallel_for(n_classes * per, jobs, [&](std::size_t i) { train_one(i / per, i % per, base); });
  }

  Corpus corpus;
  corpus.arch = arch;
  std::size_t excluded = 0;
  for (auto& r : trained) {
    if (!r || !r->converged) {
      ++excluded;
      continue;
    }
    corpus.records.push_back(arch == AeArchId::Arc28122 ? normalize_ae(*r) : std::move(*r));
  }
  const std::size_t total = trained.size();
  if (log) {
    log("trained " + std::to_string(total) + " AEs, excluded " + std::to_string(excluded) +
        " that did not converge");
  }
  if (static_cast<double>(excluded) > cfg.max_failure_fraction * static_cast<double>(total)) {
    throw TrainingError("corpus build failed: " + std::to_string(excluded) + " of " +
                            std::to_string(total) + " AEs did not converge",
                        cfg.ae.epochs);
  }

  CorpusProvenance& p = corpus.provenance;
  p.family = std::string(to_string(cfg.family));
  p.base_seed = cfg.seed;
  p.classes = n_classes;
  p.aes_per_class = per;
  p.points_per_ae = points;
  p.init = std::string(to_string(cfg.init));
  p.excluded = excluded;
  p.config_hash = config_hash(cfg);
  return corpus;
}

void check_corpus(const Corpus& corpus) {
  std::set<std::pair<std::string, std::uint64_t>> seen;
  for (const AeRecord& r : corpus.records) {
    if (r.arch != corpus.arch) throw ContractError("corpus mixes AE architectures");
    if (!seen.emplace(class_to_json(r.class_spec).dump(), r.train_stats.seed).second) {
      throw ContractError("duplicate record for " + label(r.class_spec) + " with seed " +
                          std::to_string(r.train_stats.seed));
    }
  }
}

std::string_view to_string(SplitMode m) {
  return m == SplitMode::ByRecord ? "by_record" : "by_class";
}

SplitMode split_mode_from_string(std::string_view s) {
  if (s == "by_record") return SplitMode::ByRecord;
  if (s == "by_class") return SplitMode::ByClass;
  throw ContractError("unknown split mode '" + std::string(s) + "'");
}

std::vector<ClassSpec> distinct_classes(std::span<const AeRecord> records) {
  std::vector<ClassSpec> out;
  for (const AeRecord& r : records) {
    if (std::find(out.begin(), out.end(), r.class_spec) == out.end()) out.push_back(r.class_spec);
  }
  return out;
}

CorpusSplit split(const Corpus& corpus, double test_fraction, SplitMode mode, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ContractError("test fraction must be in (0, 1)");
  }
  const auto classes = distinct_classes(corpus.records);
  const std::size_t units = mode == SplitMode::ByClass ? classes.size() : corpus.records.size();
  const auto n_test = static_cast<std::size_t>(std::lround(test_fraction * static_cast<double>(units)));
  if (n_test == 0 || n_test >= units) {
    throw ContractError("split of " + std::to_string(units) + " units at fraction " +
                        format_double(test_fraction) + " leaves one side empty");
  }
  std::vector<std::size_t> order(units);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t k = units; k > 1; --k) std::swap(order[k - 1], order[rng.below(k)]);
  std::vector<bool> held(units, false);
  for (std::size_t i = 0; i < n_test; ++i) held[order[i]] = true;

  CorpusSplit out;
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    const AeRecord& r = corpus.records[i];
    std::size_t unit = i;
    if (mode == SplitMode::ByClass) {
      unit = static_cast<std::size_t>(
          std::find(classes.begin(), classes.end(), r.class_spec) - classes.begin());
    }
    (held[unit] ? out.test : out.train).push_back(r);
  }
  return out;
}

std::string corpus_to_string(const Corpus& corpus) {
  const CorpusProvenance& p = corpus.provenance;
  Json records = Json::array();
  for (const AeRecord& r : corpus.records) records.push_back(record_to_json(r));
  Json doc{{"arch", std::string(to_string(corpus.arch))},
           {"flatten_order", std::string(kFlattenOrder)},
           {"provenance",
            Json{{"family", p.family},
                 {"base_seed", p.base_seed},
                 {"classes", p.classes},
                 {"aes_per_class", p.aes_per_class},
                 {"points_per_ae", p.points_per_ae},
                 {"init", p.init},
                 {"excluded", p.excluded},
                 {"config_hash", p.config_hash}}},
           {"records", records}};
  return seal_document(std::move(doc), "corpus");
}

Corpus corpus_from_string(const std::string& text) {
  const Json doc = open_document(text, "corpus");
  Corpus corpus;
  try {
    corpus.arch = arch_from_string(doc.at("arch").get<std::string>());
    const Json& p = doc.at("provenance");
    corpus.provenance.family = p.at("family").get<std::string>();
    corpus.provenance.base_seed = p.at("base_seed").get<std::uint64_t>();
    corpus.provenance.classes = p.at("classes").get<std::size_t>();
    corpus.provenance.aes_per_class = p.at("aes_per_class").get<std::size_t>();
    corpus.provenance.points_per_ae = p.at("points_per_ae").get<std::size_t>();
    corpus.provenance.init = p.at("init").get<std::string>();
    corpus.provenance.excluded = p.at("excluded").get<std::size_t>();
    corpus.provenance.config_hash = p.at("config_hash").get<std::string>();
    for (const Json& r : doc.at("records")) corpus.records.push_back(record_from_json(r));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed corpus: ") + e.what());
  } catch (const ContractError& e) {
    throw FormatError(std::string("malformed corpus: ") + e.what());
  }
  try {
    check_corpus(corpus);
  } catch (const ContractError& e) {
    throw FormatError(std::string("inconsistent corpus: ") + e.what());
  }
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  write_text_file(path, corpus_to_string(corpus));
}

Corpus load_corpus(const std::filesystem::path& path) {
  return corpus_from_string(read_text_file(path));
}

}  // namespace metaenc
