#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <sstream>

#include "metaenc/errors.hpp"
#include "metaenc/evalrep.hpp"
#include "metaenc/rng.hpp"

using namespace metaenc;

namespace {

AeRecord line_record(int theta, std::uint64_t seed) {
  AeRecord rec;
  rec.arch = AeArchId::Line212;
  rec.class_spec = LineClass{theta};
  rec.model = analytic_line_model(std::get<LineClass>(rec.class_spec).slope());
  rec.train_stats.seed = seed;
  return rec;
}

// A line MAE whose output is the constant slope-0.5 AE, whatever the input.
MaeModel constant_line_mae() {
  MaeModel mae = make_mae(MaeSpec::line818(), 0);
  for (double& p : mae.net.params()) p = 0.0;
  mae.output_shift = {1, 0, 1, 0.5, 0, 0, 0, 0.5};
  mae.output_scale.assign(8, 1.0);
  return mae;
}

std::size_t csv_rows(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n - 1;
}

}  // namespace

TEST_CASE("report aggregates equal recomputation from rows") {
  std::vector<AeRecord> recs;
  for (int t : {-60, -20, 10, 40, 70}) recs.push_back(line_record(t, static_cast<std::uint64_t>(t + 100)));
  recs.push_back(line_record(10, 7));
  const MaeModel mae = constant_line_mae();
  const ExecLossConfig cfg = ExecLossConfig::for_kind(MaeKind::Line818);
  const EvalReport rep = eval_mae(mae, recs, cfg);
  REQUIRE(rep.records.size() == recs.size());
  std::vector<double> v;
  for (const RecordEval& r : rep.records) v.push_back(r.exec_rmse);
  double sum = 0.0;
  for (double x : v) sum += x;
  CHECK(rep.mean_exec_rmse == sum / static_cast<double>(v.size()));
  CHECK(rep.max_exec_rmse == *std::max_element(v.begin(), v.end()));
  std::sort(v.begin(), v.end());
  CHECK(rep.median_exec_rmse == 0.5 * (v[2] + v[3]));
  CHECK(rep.classes.size() == 5);
  // Row against a direct exec-loss call.
  const double direct = std::sqrt(exec_loss(recs[0], reconstruct(mae, recs[0]), cfg).loss);
  CHECK(rep.records[0].exec_rmse == direct);
  const Json j = report_to_json(rep);
  CHECK(j["records"].size() == recs.size());
}

TEST_CASE("perfect reconstruction scores zero everywhere") {
  // The constant MAE reproduces the slope-0 AE exactly.
  MaeModel mae = constant_line_mae();
  mae.output_shift = {1, 0, 1, 0, 0, 0, 0, 0};
  std::vector<AeRecord> recs;
  for (std::uint64_t k = 0; k < 3; ++k) recs.push_back(line_record(0, k));
  const EvalReport rep = eval_mae(mae, recs, ExecLossConfig::for_kind(MaeKind::Line818));
  for (const RecordEval& r : rep.records) CHECK(r.exec_rmse == 0.0);
  CHECK(rep.mean_exec_rmse == 0.0);
  CHECK(rep.max_exec_rmse == 0.0);
}

TEST_CASE("figures write n rows per CSV and an SVG") {
  const auto dir = std::filesystem::temp_directory_path() / "metaenc_test_figs";
  std::filesystem::remove_all(dir);
  const AeRecord rec = line_record(30, 1);
  const NetModel out = analytic_line_model(0.5);
  emit_points_figure(rec, out, 37, dir, "fig", true, 3);
  CHECK(csv_rows((dir / "fig_original.csv").string()) == 37);
  CHECK(csv_rows((dir / "fig_input_ae.csv").string()) == 37);
  CHECK(csv_rows((dir / "fig_output_ae.csv").string()) == 37);
  const std::string svg = read_text_file(dir / "fig.svg");
  CHECK(svg.find("width=\"900\"") != std::string::npos);
  CHECK(svg.find("height=\"300\"") != std::string::npos);
  CHECK(read_text_file(dir / "fig_original.csv").rfind("x,y\n", 0) == 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("figure points: originals on the class, input AE within its error band") {
  AeRecord rec = line_record(-35, 2);
  rec.train_stats.final_test_rmse = 0.0;
  const PointsFigure fig = points_figure(rec, analytic_line_model(0.0), 50, 4);
  const double a = std::get<LineClass>(rec.class_spec).slope();
  for (std::size_t i = 0; i < fig.original.size(); ++i) {
    CHECK(fig.original[i].y == doctest::Approx(a * fig.original[i].x));
    CHECK(distance(fig.original[i], fig.input_ae[i]) <= 3 * rec.train_stats.final_test_rmse + 1e-9);
    CHECK(fig.output_ae[i].y == doctest::Approx(0.0));
  }
}

TEST_CASE("line fit recovers the slope") {
  std::vector<Point2> pts;
  for (double x = -5.0; x <= 5.0; x += 0.5) pts.push_back({x, 2.0 * x});
  CHECK(std::abs(fit_line_slope(pts) - 2.0) < 1e-9);
  CHECK_THROWS_AS(fit_line_slope(std::vector<Point2>{{0.0, 1.0}}), ContractError);
}

TEST_CASE("circle fit recovers centre and radius") {
  std::vector<Point2> pts;
  for (int i = 0; i < 40; ++i) {
    const double t = std::numbers::pi / 6 + i * (std::numbers::pi / 6) / 39;
    pts.push_back({1.5 + 3.0 * std::cos(t), -2.0 + 3.0 * std::sin(t)});
  }
  const CircleFit fit = fit_circle_kasa(pts);
  CHECK(std::abs(fit.r - 3.0) < 1e-9);
  CHECK(std::abs(fit.cx - 1.5) < 1e-9);
  CHECK(std::abs(fit.cy + 2.0) < 1e-9);
  CHECK_THROWS_AS(fit_circle_kasa(std::vector<Point2>{{0, 0}, {1, 1}, {2, 2}}), ContractError);
}

TEST_CASE("circle fit under noise stays within 0.01 of the radius") {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Point2> pts;
    for (int i = 0; i < 200; ++i) {
      const double t = rng.uniform(-std::numbers::pi, std::numbers::pi);
      // Box-Muller normal noise with sigma 0.01.
      const double u1 = 1.0 - rng.uniform01(), u2 = rng.uniform01();
      const double mag = 0.01 * std::sqrt(-2.0 * std::log(u1));
      pts.push_back({3.0 * std::cos(t) + mag * std::cos(2 * std::numbers::pi * u2),
                     3.0 * std::sin(t) + mag * std::sin(2 * std::numbers::pi * u2)});
    }
    CHECK(std::abs(fit_circle_kasa(pts).r - 3.0) <= 0.01);
  }
}

TEST_CASE("spearman correlation") {
  const std::vector<double> a{1, 2, 3, 4, 5};
  CHECK(spearman(a, std::vector<double>{2, 4, 6, 8, 10}) == doctest::Approx(1.0));
  CHECK(spearman(a, std::vector<double>{5, 4, 3, 2, 1}) == doctest::Approx(-1.0));
  CHECK(spearman(a, std::vector<double>{1, 8, 27, 64, 125}) == doctest::Approx(1.0));
  // Ties take average ranks: ranks (1.5,1.5,3.5,3.5) vs (1,2,3,4).
  CHECK(spearman(std::vector<double>{1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4}) ==
        doctest::Approx(0.894427190999916));
  CHECK_THROWS_AS(spearman(a, std::vector<double>{1, 2}), ContractError);
}

TEST_CASE("line verdict uses the 0.2 exec-RMSE bound") {
  std::vector<AeRecord> recs{line_record(0, 1)};
  MaeModel mae = constant_line_mae();
  mae.output_shift = {1, 0, 1, 0.01, 0, 0, 0, 0};
  const ExecLossConfig cfg = ExecLossConfig::for_kind(MaeKind::Line818);
  MaeVerdict v = judge_mae(mae, recs, cfg);
  CHECK(v.success);
  CHECK(v.summary.find("The learning converged well") == 0);
  mae.output_shift[3] = 0.1;
  v = judge_mae(mae, recs, cfg);
  CHECK_FALSE(v.success);
}
