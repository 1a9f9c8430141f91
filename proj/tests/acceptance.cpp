// Acceptance run: one PASS/FAIL line per criterion. Both pipelines use base
// seed 0 for corpus, split and MAE.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>

#include "cli.hpp"
#include "metaenc/corpus.hpp"
#include "metaenc/evalrep.hpp"
#include "metaenc/selfcheck.hpp"
#include "metaenc/serialize.hpp"

using namespace metaenc;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 0;

int failures = 0;

void report(int id, bool pass, const std::string& name, const std::string& detail) {
  std::printf("%s  %d  %s: %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

void report(int id, const CheckResult& r, const std::string& extra = "") {
  report(id, r.pass, r.name, r.detail + extra);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

bool bit_equal(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

struct LinePipeline {
  Corpus corpus;
  CorpusSplit parts;
  MaeModel mae;
  double seconds = 0.0;
};

LinePipeline run_line_pipeline() {
  const auto t0 = std::chrono::steady_clock::now();
  LinePipeline p;
  CorpusConfig cfg = CorpusConfig::desk(Family::Line);
  cfg.seed = kSeed;
  p.corpus = build_corpus(cfg, 1);
  p.parts = split(p.corpus, 0.25, SplitMode::ByClass, kSeed);
  p.mae = train_mae(p.parts.train, p.parts.test, MaeSpec::line818(),
                    ExecLossConfig::for_kind(MaeKind::Line818),
                    MaeTrainConfig::for_kind(MaeKind::Line818), kSeed);
  p.seconds = seconds_since(t0);
  return p;
}

void criterion_4_5(const LinePipeline& p) {
  const ExecLossConfig cfg = ExecLossConfig::for_kind(MaeKind::Line818);
  double worst_ae = 0.0;
  for (const AeRecord& r : p.corpus.records) worst_ae = std::max(worst_ae, r.train_stats.final_test_rmse);
  const MaeVerdict v = judge_mae(p.mae, p.parts.test, cfg);
  const bool ok = p.corpus.records.size() + p.corpus.provenance.excluded == 32 && worst_ae <= 0.05 &&
                  v.max_exec_rmse <= 0.2 && p.seconds < 300.0;
  report(4, ok, "desk line pipeline",
         std::to_string(p.corpus.records.size()) + " AEs included (" +
             std::to_string(p.corpus.provenance.excluded) + " excluded), max AE test RMSE " +
             fmt("%.4f (bound 0.05)", worst_ae) + ", " + std::to_string(p.parts.test.size()) +
             " held-out AEs max exec-RMSE " + fmt("%.3g (bound 0.2), %.1f s (bound 300 s)", v.max_exec_rmse, p.seconds));

  std::vector<double> codes, slopes;
  for (const AeRecord& r : p.parts.test) {
    codes.push_back(encode_ae(p.mae, r));
    slopes.push_back(family_parameter(r.class_spec));
  }
  const double rho = spearman(codes, slopes);
  report(5, std::abs(rho) >= 0.95, "latent code vs slope",
         fmt("Spearman rho %.4f over %.0f held-out AEs (bound |rho| >= 0.95)", rho,
             static_cast<double>(codes.size())));
}

void criterion_6() {
  const auto t0 = std::chrono::steady_clock::now();
  CorpusConfig cfg = CorpusConfig::desk(Family::Arc);
  cfg.seed = kSeed;
  const Corpus corpus = build_corpus(cfg, 1);
  bool normalized = true;
  for (const AeRecord& r : corpus.records) normalized = normalized && normalize_ae(r) == r;
  const CorpusSplit parts = split(corpus, 0.25, SplitMode::ByClass, kSeed);
  const ExecLossConfig ecfg = ExecLossConfig::for_kind(MaeKind::Arc9Layer);
  const MaeModel mae = train_mae(parts.train, parts.test, MaeSpec::arc9(), ecfg,
                                 MaeTrainConfig::for_kind(MaeKind::Arc9Layer), kSeed);
  const MaeVerdict v = judge_mae(mae, parts.test, ecfg);
  const double secs = seconds_since(t0);
  const RadiusCheck rc = radius_check(mae, parts.test);
  std::string radii;
  for (std::size_t i = 0; i < rc.true_r.size(); ++i) {
    radii += fmt(" %g->%.3f", rc.true_r[i], rc.fitted_r[i]);
  }
  const bool ok = normalized && v.test_loss_reduction >= 0.9 && v.radius_fraction >= 0.8 &&
                  secs < 900.0;
  report(6, ok, "desk arc pipeline",
         std::to_string(corpus.records.size()) + " AEs" + (normalized ? " normalized" : " NOT normalized") +
             ", test exec-loss reduction " +
             fmt("%.1f%% (bound 90%%), radii within 15%%: %.0f%% (bound 80%%)", 100 * v.test_loss_reduction,
                 100 * v.radius_fraction) +
             " [" + radii.substr(1) + "]" + fmt(", %.1f s (bound 900 s)", secs));
}

void criterion_9(const LinePipeline& p) {
  const fs::path dir = fs::temp_directory_path() / "metaenc_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path corpus_path = dir / "lines.json";
  save_corpus(p.corpus, corpus_path);
  const Corpus back = load_corpus(corpus_path);
  bool exact = back == p.corpus;
  for (std::size_t i = 0; exact && i < back.records.size(); ++i) {
    exact = bit_equal(back.records[i].model.params(), p.corpus.records[i].model.params());
  }
  const CheckResult arc = check_persistence(kSeed);

  std::ostringstream out, err;
  const fs::path mae_path = dir / "mae.json";
  const int train_code = cli::run({"train-mae", "--corpus", corpus_path.string(), "--split",
                                   "by_class:0.25", "--seed", std::to_string(kSeed), "--out",
                                   mae_path.string()},
                                  out, err);
  const int replay_code = cli::run({"replay", "--manifest", cli::manifest_path_for(mae_path).string(),
                                    "--into", (dir / "replay").string()},
                                   out, err);
  bool weights_identical = false;
  if (fs::exists(dir / "replay" / "mae.json") && fs::exists(mae_path)) {
    weights_identical = bit_equal(load_mae(mae_path).net.params(),
                                  load_mae(dir / "replay" / "mae.json").net.params());
  }
  const bool trained = train_code == cli::kOk || train_code == cli::kConvergenceError;
  const bool ok = exact && arc.pass && trained && replay_code == cli::kOk && weights_identical;
  report(9, ok, "persistence",
         std::string("line corpus round trip ") + (exact ? "bit-exact" : "NOT exact") + "; arc corpus: " +
             arc.detail + "; manifest replay " + (replay_code == cli::kOk ? "matched" : "MISMATCH") +
             ", MAE weights " + (weights_identical ? "bit-identical" : "differ"));
  fs::remove_all(dir);
}

}  // namespace

int main() {
  const CheckResult grad = check_gradients(100, kSeed + 1);
  report(1, grad.pass && grad.seconds < 5.0, grad.name,
         grad.detail + fmt(", %.2f s (bound 5 s)", grad.seconds));
  report(2, check_line_optimum(1000, kSeed + 1));
  report(3, check_encodability(10000, kSeed + 1));

  const LinePipeline line = run_line_pipeline();
  criterion_4_5(line);
  criterion_6();

  report(7, check_normalization(50, kSeed + 1));
  report(8, check_exec_oracle());
  criterion_9(line);

  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
