#include "cli.hpp"

#include <openssl/sha.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "metaenc/corpus.hpp"
#include "metaenc/errors.hpp"
#include "metaenc/evalrep.hpp"
#include "metaenc/mae.hpp"
#include "metaenc/selfcheck.hpp"
#include "metaenc/serialize.hpp"

namespace metaenc::cli {

namespace fs = std::filesystem;

std::string git_blob_hash(const std::string& bytes) {
  const std::string header = "blob " + std::to_string(bytes.size()) + '\0';
  SHA_CTX ctx;
  SHA1_Init(&ctx);
  SHA1_Update(&ctx, header.data(), header.size());
  SHA1_Update(&ctx, bytes.data(), bytes.size());
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1_Final(digest, &ctx);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned char c : digest) {
    out.push_back(kHex[c >> 4]);
    out.push_back(kHex[c & 15]);
  }
  return out;
}

fs::path manifest_path_for(const fs::path& output) {
  return fs::path(output.string() + ".manifest.json");
}

namespace {

std::string to_text(const std::string& v) { return v; }
std::string to_text(double v) { return format_double(v); }
template <class T>
  requires std::is_integral_v<T>
std::string to_text(T v) {
  return std::to_string(v);
}

// Registers options on a subcommand and remembers them, so a run can be
// written out as a fully resolved argument list and replayed.
class Recorder {
 public:
  explicit Recorder(CLI::App* app) : app_(app) {}

  CLI::App* app() const { return app_; }

  template <class T>
  CLI::Option* option(const std::string& name, T& var, const std::string& desc) {
    emit_.push_back([name, &var](std::vector<std::string>& out) {
      out.push_back(name);
      out.push_back(to_text(var));
    });
    return app_->add_option(name, var, desc)->capture_default_str();
  }

  CLI::Option* flag(const std::string& name, bool& var, const std::string& desc) {
    emit_.push_back([name, &var](std::vector<std::string>& out) {
      if (var) out.push_back(name);
    });
    return app_->add_flag(name, var, desc);
  }

  CLI::Option* input(const std::string& name, std::string& path, const std::string& desc) {
    inputs_.emplace_back(name, &path);
    return option(name, path, desc);
  }

  CLI::Option* output(const std::string& name, std::string& path, const std::string& desc) {
    outputs_.emplace_back(name, &path);
    return option(name, path, desc);
  }

  std::vector<std::string> args() const {
    std::vector<std::string> out;
    for (const auto& e : emit_) e(out);
    return out;
  }

  const std::vector<std::pair<std::string, std::string*>>& inputs() const { return inputs_; }
  const std::vector<std::pair<std::string, std::string*>>& outputs() const { return outputs_; }

 private:
  CLI::App* app_;
  std::vector<std::function<void(std::vector<std::string>&)>> emit_;
  std::vector<std::pair<std::string, std::string*>> inputs_;
  std::vector<std::pair<std::string, std::string*>> outputs_;
};

Json file_entries(const std::vector<std::pair<std::string, std::string*>>& files) {
  Json arr = Json::array();
  for (const auto& [name, path] : files) {
    if (path->empty() || !fs::is_regular_file(*path)) continue;
    arr.push_back(Json{{"option", name},
                       {"path", *path},
                       {"hash", git_blob_hash(read_text_file(*path))}});
  }
  return arr;
}

void write_manifest(const std::string& command, const Recorder& rec, std::uint64_t seed,
                    const fs::path& path, std::ostream& out) {
  const std::vector<std::string> args = rec.args();
  Json outputs = file_entries(rec.outputs());
  std::string digest_input = command;
  for (const std::string& a : args) digest_input += '\n' + a;
  for (const Json& o : outputs) digest_input += '\n' + o["hash"].get<std::string>();
  Json doc{{"tool", "metaenc"},
           {"command", command},
           {"args", args},
           {"seed", seed},
           {"inputs", file_entries(rec.inputs())},
           {"outputs", outputs},
           {"content_hash", git_blob_hash(digest_input)}};
  write_text_file(path, seal_document(std::move(doc), "manifest"));
  out << "manifest: " << path.string() << "\n";
}

std::pair<SplitMode, double> parse_split(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw ContractError("split must look like by_class:0.25");
  const SplitMode mode = split_mode_from_string(s.substr(0, colon));
  double frac = 0.0;
  try {
    frac = parse_double(s.substr(colon + 1));
  } catch (const FormatError&) {
    throw ContractError("bad split fraction in '" + s + "'");
  }
  return {mode, frac};
}

ClassSpec parse_class(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  auto num = [&](std::size_t i) {
    try {
      return parse_double(parts.at(i));
    } catch (const std::exception&) {
      throw ContractError("bad class '" + s + "'");
    }
  };
  ClassSpec spec;
  if (parts.size() == 2 && parts[0] == "line") {
    const double theta = num(1);
    if (theta != std::floor(theta)) throw ContractError("line angles are whole degrees");
    spec = LineClass{static_cast<int>(theta)};
  } else if (parts.size() == 2 && parts[0] == "circle") {
    spec = CircleClass{num(1)};
  } else if (parts.size() == 2 && parts[0] == "arc") {
    spec = ArcClass{num(1)};
  } else if (parts.size() == 4 && parts[0] == "arc") {
    spec = ArcClass{num(1), num(2), num(3)};
  } else {
    throw ContractError("class must be line:DEG, circle:R, arc:R or arc:R:LO:HI, got '" + s + "'");
  }
  validate(spec);
  return spec;
}

std::vector<ClassSpec> grid_for(Family family, int count, double r_min, double r_max) {
  switch (family) {
    case Family::Line: return line_grid(count);
    case Family::Circle: return circle_grid(count, r_min, r_max);
    case Family::Arc: return arc_grid(count, r_min, r_max);
  }
  return {};
}

std::vector<ClassSpec> load_grid(const std::string& path) {
  const Json doc = open_document(read_text_file(path), "class_grid");
  std::vector<ClassSpec> out;
  try {
    for (const Json& c : doc.at("classes")) out.push_back(class_from_json(c));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed class grid: ") + e.what());
  }
  return out;
}

std::string file_stem_for(const AeRecord& rec) {
  std::string s = label(rec.class_spec) + "_" + std::to_string(rec.train_stats.seed);
  for (char& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '.') c = '_';
  }
  return s;
}

struct Shared {
  std::uint64_t seed = 0;
  std::string manifest;
};

// ---- gen-classes ----------------------------------------------------------

struct GenClassesOpts {
  std::string family;
  std::string preset = "desk";
  int count = 0;
  double r_min = 1.0;
  double r_max = 10.0;
  std::string out;
};

int cmd_gen_classes(const GenClassesOpts& o, std::ostream& out) {
  const Family family = family_from_string(o.family);
  std::vector<ClassSpec> classes;
  if (o.count > 0) {
    classes = grid_for(family, o.count, o.r_min, o.r_max);
  } else if (o.preset == "desk" || o.preset == "full") {
    classes = (o.preset == "desk" ? CorpusConfig::desk(family) : CorpusConfig::full(family)).classes;
  } else {
    throw ContractError("unknown preset '" + o.preset + "'");
  }
  Json arr = Json::array();
  for (const ClassSpec& c : classes) arr.push_back(class_to_json(c));
  write_text_file(o.out, seal_document(Json{{"family", o.family}, {"classes", arr}}, "class_grid"));
  out << "wrote " << classes.size() << " " << o.family << " classes to " << o.out << "\n";
  return kOk;
}

// ---- train-ae -------------------------------------------------------------

struct TrainAeOpts {
  std::string cls;
  std::size_t points = 0;
  std::size_t epochs = 0;
  double lr = 0.0;
  std::string out;
};

int cmd_train_ae(const TrainAeOpts& o, const Shared& sh, std::ostream& out) {
  const ClassSpec spec = parse_class(o.cls);
  const AeArchId arch = arch_for(spec);
  AeTrainConfig cfg = default_ae_config(arch);
  if (o.epochs) cfg.epochs = o.epochs;
  if (o.lr > 0.0) cfg.adam.lr = o.lr;
  const std::size_t points = o.points ? o.points : default_points(arch);
  AeRecord rec = train_ae_until_converged(arch, spec, points, cfg, sh.seed);
  if (arch == AeArchId::Arc28122) rec = normalize_ae(rec);
  save_record(rec, o.out);
  out << label(spec) << ": test RMSE " << rec.train_stats.final_test_rmse << " after "
      << rec.train_stats.attempts << " attempt(s), " << (rec.converged ? "converged" : "NOT converged")
      << " -> " << o.out << "\n";
  return rec.converged ? kOk : kConvergenceError;
}

// ---- build-corpus ---------------------------------------------------------

struct BuildCorpusOpts {
  std::string family;
  std::string preset = "full";
  std::string grid;
  int classes = 0;
  double r_min = 1.0;
  double r_max = 10.0;
  std::size_t aes_per_class = 0;
  std::size_t points = 0;
  std::size_t epochs = 0;
  std::string init;
  std::size_t jobs = 1;
  std::string out;
};

int cmd_build_corpus(const BuildCorpusOpts& o, const Shared& sh, std::ostream& out,
                     std::ostream& err) {
  const Family family = family_from_string(o.family);
  CorpusConfig cfg;
  if (o.preset == "full") {
    cfg = CorpusConfig::full(family);
  } else if (o.preset == "desk") {
    cfg = CorpusConfig::desk(family);
  } else {
    throw ContractError("unknown preset '" + o.preset + "'");
  }
  if (!o.grid.empty()) {
    cfg.classes = load_grid(o.grid);
  } else if (o.classes > 0) {
    cfg.classes = grid_for(family, o.classes, o.r_min, o.r_max);
  }
  if (o.aes_per_class) cfg.aes_per_class = o.aes_per_class;
  if (o.points) cfg.points_per_ae = o.points;
  if (o.epochs) cfg.ae.epochs = o.epochs;
  if (!o.init.empty()) cfg.init = ae_init_from_string(o.init);
  cfg.seed = sh.seed;
  const Corpus corpus = build_corpus(cfg, o.jobs, [&](const std::string& m) { err << m << "\n"; });
  save_corpus(corpus, o.out);
  out << "corpus: " << corpus.records.size() << " records (" << cfg.classes.size() << " classes x "
      << cfg.aes_per_class << ", " << corpus.provenance.excluded << " excluded) -> " << o.out
      << "\n";
  return kOk;
}

// ---- train-mae ------------------------------------------------------------

struct TrainMaeOpts {
  std::string corpus;
  std::string arch;
  bool relu = false;
  std::string split = "by_class:0.25";
  std::int64_t split_seed = -1;
  std::size_t epochs = 0;
  double lr = 0.0;
  double lr_final = -1.0;
  std::size_t batch = 0;
  std::size_t restarts = 0;
  double weight_decay = -1.0;
  std::string loss_weighting;
  std::size_t probes = 0;
  std::string out;
  std::string curve;
  std::string test_out;
};

int cmd_train_mae(const TrainMaeOpts& o, const Shared& sh, std::ostream& out) {
  const Corpus corpus = load_corpus(o.corpus);
  MaeKind kind = corpus.arch == AeArchId::Line212 ? MaeKind::Line818 : MaeKind::Arc9Layer;
  if (!o.arch.empty()) kind = mae_kind_from_string(o.arch);
  MaeSpec spec = kind == MaeKind::Line818 ? MaeSpec::line818(o.relu) : MaeSpec::arc9();
  if (spec.ae_arch != corpus.arch) {
    throw ContractError(std::string(to_string(kind)) + " cannot encode a " +
                        std::string(to_string(corpus.arch)) + " corpus");
  }
  const auto [mode, frac] = parse_split(o.split);
  const std::uint64_t split_seed = o.split_seed >= 0 ? static_cast<std::uint64_t>(o.split_seed) : sh.seed;
  const CorpusSplit parts = split(corpus, frac, mode, split_seed);

  MaeTrainConfig hyper = MaeTrainConfig::for_kind(kind);
  if (o.epochs) hyper.epochs = o.epochs;
  if (o.lr > 0.0) hyper.adam.lr = o.lr;
  if (o.lr_final >= 0.0) hyper.lr_final = o.lr_final;
  if (o.batch) hyper.batch_size = o.batch;
  if (o.restarts) hyper.restarts = o.restarts;
  if (o.weight_decay >= 0.0) hyper.weight_decay = o.weight_decay;
  if (o.loss_weighting == "plain") {
    hyper.scale_normalized_loss = false;
  } else if (o.loss_weighting == "scale") {
    hyper.scale_normalized_loss = true;
  } else if (!o.loss_weighting.empty()) {
    throw ContractError("loss weighting must be plain or scale");
  }
  hyper.log_every = std::max<std::size_t>(1, hyper.epochs / 20);
  ExecLossConfig loss_cfg = ExecLossConfig::for_kind(kind);
  if (o.probes) {
    if (kind != MaeKind::Arc9Layer) throw ContractError("--probes applies to arc9 only");
    std::get<SampledArcProbes>(loss_cfg.probes).count = o.probes;
  }

  out << to_string(kind) << ": " << parts.train.size() << " train / " << parts.test.size()
      << " held-out records (" << o.split << ")\n";
  const MaeModel mae = train_mae(parts.train, parts.test, spec, loss_cfg, hyper, sh.seed);
  save_mae(mae, o.out);

  out << "epoch  train_exec_loss  test_exec_loss\n";
  std::string csv = "epoch,train_loss,test_loss\n";
  char buf[128];
  for (const MaeCurvePoint& p : mae.train_stats.curve) {
    std::snprintf(buf, sizeof buf, "%5zu  %15.6g  %14.6g\n", p.epoch, p.train_loss, p.test_loss);
    out << buf;
    csv += std::to_string(p.epoch) + "," + format_double(p.train_loss) + "," +
           format_double(p.test_loss) + "\n";
  }
  if (!o.curve.empty()) write_text_file(o.curve, csv);
  if (!o.test_out.empty()) {
    Corpus held;
    held.arch = corpus.arch;
    held.records = parts.test;
    held.provenance = corpus.provenance;
    save_corpus(held, o.test_out);
  }
  const MaeVerdict verdict = judge_mae(mae, parts.test, loss_cfg);
  out << verdict.summary << "\n";
  return verdict.success ? kOk : kConvergenceError;
}

// ---- eval -----------------------------------------------------------------

struct EvalOpts {
  std::string mae;
  std::string corpus;
  std::string split;
  std::int64_t split_seed = -1;
  std::string out;
  std::string figures;
  std::size_t figure_count = 3;
  std::size_t figure_points = 50;
  bool no_svg = false;
  std::size_t jobs = 1;
};

int cmd_eval(const EvalOpts& o, const Shared& sh, std::ostream& out) {
  const MaeModel mae = load_mae(o.mae);
  const Corpus corpus = load_corpus(o.corpus);
  if (corpus.arch != mae.spec.ae_arch) throw ContractError("MAE and corpus architectures differ");
  std::vector<AeRecord> records = corpus.records;
  if (!o.split.empty()) {
    const auto [mode, frac] = parse_split(o.split);
    const std::uint64_t split_seed = o.split_seed >= 0 ? static_cast<std::uint64_t>(o.split_seed) : sh.seed;
    records = split(corpus, frac, mode, split_seed).test;
  }
  const ExecLossConfig cfg = ExecLossConfig::for_kind(mae.spec.kind);
  const EvalReport report = eval_mae(mae, records, cfg, o.jobs);
  Json j = report_to_json(report);
  j["mae_kind"] = std::string(to_string(mae.spec.kind));
  j["records_evaluated"] = records.size();
  std::vector<double> codes, params;
  for (const RecordEval& e : report.records) {
    codes.push_back(e.code);
    params.push_back(e.family_parameter);
  }
  if (records.size() >= 2) j["spearman_code_vs_family_parameter"] = spearman(codes, params);
  if (mae.spec.kind == MaeKind::Arc9Layer) {
    const RadiusCheck rc = radius_check(mae, records);
    j["radius_check"] = Json{{"tolerance", 0.15},
                             {"within", rc.within},
                             {"true_r", rc.true_r},
                             {"fitted_r", rc.fitted_r}};
  }
  write_text_file(o.out, j.dump(2) + "\n");
  out << "evaluated " << records.size() << " records: exec-RMSE mean " << report.mean_exec_rmse
      << ", median " << report.median_exec_rmse << ", max " << report.max_exec_rmse << " -> "
      << o.out << "\n";

  if (!o.figures.empty() && o.figure_count > 0) {
    const std::size_t n = std::min(o.figure_count, records.size());
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i = n == 1 ? 0 : k * (records.size() - 1) / (n - 1);
      const AeRecord& rec = records[i];
      emit_points_figure(rec, reconstruct(mae, rec), o.figure_points, o.figures, file_stem_for(rec),
                         !o.no_svg, sh.seed);
    }
    out << "figures for " << n << " records in " << o.figures << "\n";
  }
  return kOk;
}

// ---- selftest -------------------------------------------------------------

int cmd_selftest(std::ostream& out) {
  bool ok = true;
  for (const CheckResult& r : {check_gradients(), check_line_optimum(), check_encodability(),
                               check_normalization(), check_exec_oracle(), check_persistence()}) {
    out << (r.pass ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
    ok = ok && r.pass;
  }
  return ok ? kOk : kFailure;
}

// ---- replay ---------------------------------------------------------------

struct ReplayOpts {
  std::string manifest;
  std::string into;
};

int cmd_replay(const ReplayOpts& o, std::ostream& out, std::ostream& err) {
  const Json doc = open_document(read_text_file(o.manifest), "manifest");
  std::vector<std::string> args;
  std::map<std::string, std::string> recorded_outputs;  // redirected path -> hash
  try {
    for (const Json& in : doc.at("inputs")) {
      const std::string path = in.at("path").get<std::string>();
      if (git_blob_hash(read_text_file(path)) != in.at("hash").get<std::string>()) {
        throw IoError("input " + path + " changed since the recorded run");
      }
    }
    const fs::path into = o.into.empty()
                              ? fs::temp_directory_path() /
                                    ("metaenc-replay-" + doc.at("content_hash").get<std::string>())
                              : fs::path(o.into);
    fs::create_directories(into);
    std::map<std::string, std::string> redirect;
    for (const Json& f : doc.at("outputs")) {
      const fs::path target = into / fs::path(f.at("path").get<std::string>()).filename();
      redirect[f.at("option").get<std::string>()] = target.string();
      recorded_outputs[target.string()] = f.at("hash").get<std::string>();
    }
    args.push_back(doc.at("command").get<std::string>());
    const auto recorded = doc.at("args").get<std::vector<std::string>>();
    for (std::size_t i = 0; i < recorded.size(); ++i) {
      args.push_back(recorded[i]);
      const auto it = redirect.find(recorded[i]);
      if (it != redirect.end() && i + 1 < recorded.size()) {
        args.push_back(it->second);
        ++i;
      }
    }
    // Optional outputs left empty in the original run stay empty; the rest
    // not listed in the manifest are sent to the replay directory as well.
    for (std::size_t i = 1; i + 1 < args.size(); ++i) {
      const std::string& a = args[i];
      if ((a == "--curve" || a == "--test-out" || a == "--figures") && !args[i + 1].empty() &&
          !recorded_outputs.count(args[i + 1])) {
        args[i + 1] = (into / fs::path(args[i + 1]).filename()).string();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed manifest: ") + e.what());
  }

  std::ostringstream inner_out;
  const int code = run(args, inner_out, err);
  if (code != kOk && code != kConvergenceError) {
    err << inner_out.str();
    return code;
  }
  bool identical = true;
  for (const auto& [path, hash] : recorded_outputs) {
    const std::string now = fs::is_regular_file(path) ? git_blob_hash(read_text_file(path)) : "missing";
    const bool same = now == hash;
    identical = identical && same;
    out << (same ? "identical " : "DIFFERENT ") << path << " " << now << "\n";
  }
  out << (identical ? "replay reproduced every output bit-for-bit\n"
                    : "replay produced different outputs\n");
  return identical ? kOk : kFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Meta-autoencoders for parameterized families of planar point classes", "metaenc"};
  app.set_config("--config", "", "Key-value config file; command-line flags take precedence");
  app.require_subcommand(1);

  Shared shared;
  auto add_shared = [&](Recorder& rec, bool seeded) {
    if (seeded) {
      rec.option("--seed", shared.seed, "Base seed")->envname("METAENC_SEED");
    }
    rec.app()->add_option("--manifest", shared.manifest,
                           "Manifest path (default: <output>.manifest.json)");
  };

  GenClassesOpts gen;
  Recorder gen_rec(app.add_subcommand("gen-classes", "Write a class grid"));
  gen_rec.option("--family", gen.family, "line | circle | arc")->required();
  gen_rec.option("--preset", gen.preset, "desk | full (used when --count is 0)");
  gen_rec.option("--count", gen.count, "Number of classes");
  gen_rec.option("--r-min", gen.r_min, "Smallest radius");
  gen_rec.option("--r-max", gen.r_max, "Largest radius");
  gen_rec.output("--out", gen.out, "Output file")->required();
  add_shared(gen_rec, false);

  TrainAeOpts tae;
  Recorder tae_rec(app.add_subcommand("train-ae", "Train one class autoencoder"));
  tae_rec.option("--class", tae.cls, "line:DEG | circle:R | arc:R[:LO:HI]")->required();
  tae_rec.option("--points", tae.points, "Training points (0 = 1000 lines, 200 otherwise)");
  tae_rec.option("--epochs", tae.epochs, "Epochs (0 = default)");
  tae_rec.option("--lr", tae.lr, "Initial learning rate (0 = default)");
  tae_rec.output("--out", tae.out, "Output record file")->required();
  add_shared(tae_rec, true);

  BuildCorpusOpts bc;
  Recorder bc_rec(app.add_subcommand("build-corpus", "Train a corpus of class autoencoders"));
  bc_rec.option("--family", bc.family, "line | circle | arc")->required();
  bc_rec.option("--preset", bc.preset, "full (160 lines x 10) | desk (16 lines x 2)");
  bc_rec.input("--grid", bc.grid, "Class grid file from gen-classes");
  bc_rec.option("--classes", bc.classes, "Number of classes (0 = preset)");
  bc_rec.option("--r-min", bc.r_min, "Smallest radius");
  bc_rec.option("--r-max", bc.r_max, "Largest radius");
  bc_rec.option("--aes-per-class", bc.aes_per_class, "AEs per class (0 = preset)");
  bc_rec.option("--points", bc.points, "Points per AE (0 = preset)");
  bc_rec.option("--epochs", bc.epochs, "AE epochs (0 = default)");
  bc_rec.option("--init", bc.init, "independent | shared | continuation (empty = preset)");
  bc_rec.option("--jobs", bc.jobs, "Worker threads; results do not depend on it");
  bc_rec.output("--out", bc.out, "Output corpus file")->required();
  add_shared(bc_rec, true);

  TrainMaeOpts tm;
  Recorder tm_rec(app.add_subcommand("train-mae", "Train a meta-autoencoder on a corpus"));
  tm_rec.input("--corpus", tm.corpus, "Corpus file")->required();
  tm_rec.option("--arch", tm.arch, "line818 | arc9 (empty = from the corpus)");
  tm_rec.flag("--relu", tm.relu, "ReLU bottleneck for line818");
  tm_rec.option("--split", tm.split, "by_class:F | by_record:F");
  tm_rec.option("--split-seed", tm.split_seed, "Split seed (-1 = --seed)");
  tm_rec.option("--epochs", tm.epochs, "Epochs (0 = default)");
  tm_rec.option("--lr", tm.lr, "Initial learning rate (0 = default)");
  tm_rec.option("--lr-final", tm.lr_final, "Final learning rate (-1 = default)");
  tm_rec.option("--batch", tm.batch, "Batch size (0 = full batch)");
  tm_rec.option("--restarts", tm.restarts, "Independent initializations (0 = default)");
  tm_rec.option("--weight-decay", tm.weight_decay, "L2 weight (-1 = default)");
  tm_rec.option("--loss-weighting", tm.loss_weighting,
                "plain | scale: per-record training weight (empty = default)");
  tm_rec.option("--probes", tm.probes, "Arc probe count (0 = default)");
  tm_rec.output("--out", tm.out, "Output MAE file")->required();
  tm_rec.output("--curve", tm.curve, "Optional CSV of the loss curve");
  tm_rec.output("--test-out", tm.test_out, "Optional corpus file of the held-out records");
  add_shared(tm_rec, true);

  EvalOpts ev;
  Recorder ev_rec(app.add_subcommand("eval", "Evaluate an MAE on a corpus"));
  ev_rec.input("--mae", ev.mae, "MAE file")->required();
  ev_rec.input("--corpus", ev.corpus, "Corpus file")->required();
  ev_rec.option("--split", ev.split, "Evaluate only the held-out side of this split");
  ev_rec.option("--split-seed", ev.split_seed, "Split seed (-1 = --seed)");
  ev_rec.output("--out", ev.out, "Report JSON")->required();
  ev_rec.option("--figures", ev.figures, "Directory for CSV/SVG figures");
  ev_rec.option("--figure-count", ev.figure_count, "Records to draw");
  ev_rec.option("--figure-points", ev.figure_points, "Points per figure");
  ev_rec.flag("--no-svg", ev.no_svg, "CSV only");
  ev_rec.option("--jobs", ev.jobs, "Worker threads");
  add_shared(ev_rec, true);

  CLI::App* selftest = app.add_subcommand("selftest", "Gradient checks and property suites");

  ReplayOpts rp;
  CLI::App* replay = app.add_subcommand("replay", "Re-run a manifest and compare outputs");
  replay->add_option("--manifest", rp.manifest, "Manifest file")->required();
  replay->add_option("--into", rp.into, "Directory for the replayed outputs");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  auto finish = [&](const std::string& command, const Recorder& rec, const std::string& primary,
                    int code) {
    const fs::path path = shared.manifest.empty() ? manifest_path_for(primary) : fs::path(shared.manifest);
    write_manifest(command, rec, shared.seed, path, out);
    return code;
  };

  try {
    if (app.got_subcommand("gen-classes")) {
      return finish("gen-classes", gen_rec, gen.out, cmd_gen_classes(gen, out));
    }
    if (app.got_subcommand("train-ae")) {
      return finish("train-ae", tae_rec, tae.out, cmd_train_ae(tae, shared, out));
    }
    if (app.got_subcommand("build-corpus")) {
      return finish("build-corpus", bc_rec, bc.out, cmd_build_corpus(bc, shared, out, err));
    }
    if (app.got_subcommand("train-mae")) {
      return finish("train-mae", tm_rec, tm.out, cmd_train_mae(tm, shared, out));
    }
    if (app.got_subcommand("eval")) {
      return finish("eval", ev_rec, ev.out, cmd_eval(ev, shared, out));
    }
    if (selftest->parsed()) return cmd_selftest(out);
    if (replay->parsed()) return cmd_replay(rp, out, err);
  } catch (const ContractError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const TrainingError& e) {
    err << "training failed: " << e.what() << "\n";
    return kConvergenceError;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kConvergenceError;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kIoError;
  } catch (const FormatError& e) {
    err << "bad file: " << e.what() << "\n";
    return kIoError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "I/O error: " << e.what() << "\n";
    return kIoError;
  }
  return kFailure;
}

}  // namespace metaenc::cli
