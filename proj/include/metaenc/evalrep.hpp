#pragma once

// MAE evaluation reports, point-set figures and least-squares fit oracles.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "metaenc/mae.hpp"
#include "metaenc/serialize.hpp"

namespace metaenc {

struct RecordEval {
  std::string label;
  double family_parameter = 0.0;
  std::uint64_t seed = 0;
  double code = 0.0;
  double exec_rmse = 0.0;  // sqrt of the mean squared probe distance
};

struct ClassEval {
  std::string label;
  double family_parameter = 0.0;
  std::size_t count = 0;
  double mean_exec_rmse = 0.0;
  double max_exec_rmse = 0.0;
};

struct EvalReport {
  std::vector<RecordEval> records;  // corpus order
  double mean_exec_rmse = 0.0;
  double median_exec_rmse = 0.0;
  double max_exec_rmse = 0.0;
  std::vector<ClassEval> classes;   // order of first appearance
};

EvalReport eval_mae(const MaeModel& mae, std::span<const AeRecord> records,
                    const ExecLossConfig& cfg, std::size_t jobs = 1);

Json report_to_json(const EvalReport& report);

struct PointsFigure {
  std::vector<Point2> original;   // sampled from the class
  std::vector<Point2> input_ae;   // the record's AE applied to them
  std::vector<Point2> output_ae;  // the reconstructed AE applied to them
};

PointsFigure points_figure(const AeRecord& rec, const NetModel& output_model, std::size_t n,
                           std::uint64_t seed = 0);

/// Writes <dir>/<stem>_original.csv, _input_ae.csv, _output_ae.csv (header
/// "x,y") and, when `svg`, a 900x300 scatter triptych <dir>/<stem>.svg.
void emit_points_figure(const AeRecord& rec, const NetModel& output_model, std::size_t n,
                        const std::filesystem::path& dir, const std::string& stem,
                        bool svg = true, std::uint64_t seed = 0);

std::string points_csv(std::span<const Point2> points);
std::string triptych_svg(const PointsFigure& fig, const std::string& title);

/// Slope of the least-squares line through the origin: sum(xy) / sum(x^2).
double fit_line_slope(std::span<const Point2> points);

struct CircleFit {
  double cx = 0.0;
  double cy = 0.0;
  double r = 0.0;
};

/// Algebraic (Kasa) fit: least squares over x^2 + y^2 + D x + E y + F = 0,
/// giving centre (-D/2, -E/2) and radius sqrt(cx^2 + cy^2 - F). Needs at
/// least three non-collinear points.
CircleFit fit_circle_kasa(std::span<const Point2> points);

struct RadiusCheck {
  std::vector<double> true_r;
  std::vector<double> fitted_r;
  std::size_t within = 0;  // |fitted - r| <= tolerance * r
};

/// Runs each record's reconstruction on `n` evenly spaced points of its arc
/// (or circle) and fits a circle to the outputs.
RadiusCheck radius_check(const MaeModel& mae, std::span<const AeRecord> records,
                         double tolerance = 0.15, std::size_t n = 64);

struct MaeVerdict {
  bool success = false;
  std::string summary;
  double test_loss_reduction = 0.0;  // 1 - final / initial test exec-loss
  double max_exec_rmse = 0.0;        // over the held-out records
  double radius_fraction = 0.0;      // arcs only
};

/// Line818: every held-out exec-RMSE <= 0.2. Arc9Layer: test exec-loss
/// down by >= 90% and >= 80% of held-out radii within 15%.
MaeVerdict judge_mae(const MaeModel& mae, std::span<const AeRecord> test,
                     const ExecLossConfig& cfg);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> a, std::span<const double> b);

}  // namespace metaenc
