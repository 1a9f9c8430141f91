#include "metaenc/evalrep.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <sstream>
#include <thread>

#include "metaenc/errors.hpp"

namespace metaenc {

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

EvalReport eval_mae(const MaeModel& mae, std::span<const AeRecord> records,
                    const ExecLossConfig& cfg, std::size_t jobs) {
  if (records.empty()) throw ContractError("nothing to evaluate");
  EvalReport report;
  report.records.resize(records.size());
  auto one = [&](std::size_t i) {
    const AeRecord& rec = records[i];
    RecordEval& e = report.records[i];
    e.label = label(rec.class_spec);
    e.family_parameter = family_parameter(rec.class_spec);
    e.seed = rec.train_stats.seed;
    e.code = encode_ae(mae, rec);
    e.exec_rmse = std::sqrt(exec_loss(rec, decode_code(mae, e.code), cfg).loss);
  };
  jobs = std::clamp<std::size_t>(jobs, 1, records.size());
  if (jobs == 1) {
    for (std::size_t i = 0; i < records.size(); ++i) one(i);
  } else {
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < jobs; ++w) {
      workers.emplace_back([&, w] {
        for (std::size_t i = w; i < records.size(); i += jobs) one(i);
      });
    }
    for (auto& t : workers) t.join();
  }

  std::vector<double> values;
  for (const RecordEval& e : report.records) values.push_back(e.exec_rmse);
  report.mean_exec_rmse =
      std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  report.median_exec_rmse = median_of(values);
  report.max_exec_rmse = *std::max_element(values.begin(), values.end());

  for (const RecordEval& e : report.records) {
    auto it = std::find_if(report.classes.begin(), report.classes.end(),
                           [&](const ClassEval& c) { return c.label == e.label; });
    if (it == report.classes.end()) {
      report.classes.push_back(ClassEval{e.label, e.family_parameter, 0, 0.0, 0.0});
      it = report.classes.end() - 1;
    }
    ++it->count;
    it->mean_exec_rmse += e.exec_rmse;
    it->max_exec_rmse = std::max(it->max_exec_rmse, e.exec_rmse);
  }
  for (ClassEval& c : report.classes) c.mean_exec_rmse /= static_cast<double>(c.count);
  return report;
}

Json report_to_json(const EvalReport& report) {
  Json records = Json::array();
  for (const RecordEval& e : report.records) {
    records.push_back(Json{{"class", e.label},
                           {"family_parameter", e.family_parameter},
                           {"seed", e.seed},
                           {"code", e.code},
                           {"exec_rmse", e.exec_rmse}});
  }
  Json classes = Json::array();
  for (const ClassEval& c : report.classes) {
    classes.push_back(Json{{"class", c.label},
                           {"family_parameter", c.family_parameter},
                           {"count", c.count},
                           {"mean_exec_rmse", c.mean_exec_rmse},
                           {"max_exec_rmse", c.max_exec_rmse}});
  }
  return Json{{"mean_exec_rmse", report.mean_exec_rmse},
              {"median_exec_rmse", report.median_exec_rmse},
              {"max_exec_rmse", report.max_exec_rmse},
              {"classes", classes},
              {"records", records}};
}

PointsFigure points_figure(const AeRecord& rec, const NetModel& output_model, std::size_t n,
                           std::uint64_t seed) {
  PointsFigure fig;
  fig.original = sample_points(rec.class_spec, n, seed);
  for (const Point2& p : fig.original) {
    fig.input_ae.push_back(run_ae(rec.model, p));
    fig.output_ae.push_back(run_ae(output_model, p));
  }
  return fig;
}

std::string points_csv(std::span<const Point2> points) {
  std::string out = "x,y\n";
  char buf[64];
  for (const Point2& p : points) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", p.x, p.y);
    out += buf;
  }
  return out;
}

std::string triptych_svg(const PointsFigure& fig, const std::string& title) {
  double lo_x = 0.0, hi_x = 0.0, lo_y = 0.0, hi_y = 0.0;
  bool first = true;
  for (const auto* set : {&fig.original, &fig.input_ae, &fig.output_ae}) {
    for (const Point2& p : *set) {
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) continue;
      if (first) {
        lo_x = hi_x = p.x;
        lo_y = hi_y = p.y;
        first = false;
      }
      lo_x = std::min(lo_x, p.x);
      hi_x = std::max(hi_x, p.x);
      lo_y = std::min(lo_y, p.y);
      hi_y = std::max(hi_y, p.y);
    }
  }
  // Square data window so circles stay round.
  const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-9}) * 1.1;
  const double cx = 0.5 * (lo_x + hi_x);
  const double cy = 0.5 * (lo_y + hi_y);
  constexpr double kPanel = 300.0;
  constexpr double kMargin = 24.0;
  const double scale = (kPanel - 2 * kMargin) / span;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"900\" height=\"300\" "
         "viewBox=\"0 0 900 300\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<title>" << title << "</title>\n";
  svg << "<rect width=\"900\" height=\"300\" fill=\"white\"/>\n";
  const std::array<const std::vector<Point2>*, 3> sets{&fig.input_ae, &fig.output_ae,
                                                       &fig.original};
  const std::array<const char*, 3> names{"input AE", "output AE", "original"};
  const std::array<const char*, 3> colors{"#1f77b4", "#d62728", "#2ca02c"};
  char buf[128];
  for (std::size_t k = 0; k < 3; ++k) {
    const double ox = kPanel * static_cast<double>(k);
    svg << "<g>\n<rect x=\"" << ox + 4 << "\" y=\"4\" width=\"" << kPanel - 8 << "\" height=\""
        << kPanel - 8 << "\" fill=\"none\" stroke=\"#ccc\"/>\n";
    svg << "<text x=\"" << ox + kPanel / 2 << "\" y=\"18\" text-anchor=\"middle\">" << names[k]
        << "</text>\n";
    for (const Point2& p : *sets[k]) {
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) continue;
      const double px = ox + kPanel / 2 + (p.x - cx) * scale;
      const double py = kPanel / 2 - (p.y - cy) * scale;
      std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"2\" fill=\"%s\"/>\n", px,
                    py, colors[k]);
      svg << buf;
    }
    svg << "</g>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void emit_points_figure(const AeRecord& rec, const NetModel& output_model, std::size_t n,
                        const std::filesystem::path& dir, const std::string& stem, bool svg,
                        std::uint64_t seed) {
  const PointsFigure fig = points_figure(rec, output_model, n, seed);
  write_text_file(dir / (stem + "_original.csv"), points_csv(fig.original));
  write_text_file(dir / (stem + "_input_ae.csv"), points_csv(fig.input_ae));
  write_text_file(dir / (stem + "_output_ae.csv"), points_csv(fig.output_ae));
  if (svg) write_text_file(dir / (stem + ".svg"), triptych_svg(fig, label(rec.class_spec)));
}

double fit_line_slope(std::span<const Point2> points) {
  double sxy = 0.0, sxx = 0.0;
  for (const Point2& p : points) {
    sxy += p.x * p.y;
    sxx += p.x * p.x;
  }
  if (sxx == 0.0) throw ContractError("line fit needs a point with x != 0");
  return sxy / sxx;
}

CircleFit fit_circle_kasa(std::span<const Point2> points) {
  if (points.size() < 3) throw ContractError("circle fit needs at least three points");
  // Work relative to the centroid for conditioning.
  double mx = 0.0, my = 0.0;
  for (const Point2& p : points) {
    mx += p.x;
    my += p.y;
  }
  mx /= static_cast<double>(points.size());
  my /= static_cast<double>(points.size());

  // Normal equations of [u v 1] (D E F)^T = -(u^2 + v^2).
  double a[3][4] = {};
  for (const Point2& p : points) {
    const double u = p.x - mx;
    const double v = p.y - my;
    const double row[3] = {u, v, 1.0};
    const double rhs = -(u * u + v * v);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) a[i][j] += row[i] * row[j];
      a[i][3] += row[i] * rhs;
    }
  }
  for (int c = 0; c < 3; ++c) {
    int piv = c;
    for (int r = c + 1; r < 3; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    }
    if (std::abs(a[piv][c]) < 1e-300) throw ContractError("circle fit on collinear points");
    for (int j = 0; j < 4; ++j) std::swap(a[c][j], a[piv][j]);
    for (int r = 0; r < 3; ++r) {
      if (r == c) continue;
      const double f = a[r][c] / a[c][c];
      for (int j = c; j < 4; ++j) a[r][j] -= f * a[c][j];
    }
  }
  const double d = a[0][3] / a[0][0];
  const double e = a[1][3] / a[1][1];
  const double f = a[2][3] / a[2][2];
  const double ux = -d / 2.0;
  const double uy = -e / 2.0;
  const double r2 = ux * ux + uy * uy - f;
  if (!(r2 > 0.0)) throw NumericError("circle fit produced a non-positive squared radius");
  return CircleFit{ux + mx, uy + my, std::sqrt(r2)};
}

RadiusCheck radius_check(const MaeModel& mae, std::span<const AeRecord> records, double tolerance,
                         std::size_t n) {
  if (n < 3) throw ContractError("radius check needs at least three points");
  RadiusCheck out;
  for (const AeRecord& rec : records) {
    double r = 0.0, lo = -std::numbers::pi, hi = std::numbers::pi;
    bool closed = true;
    if (const auto* arc = std::get_if<ArcClass>(&rec.class_spec)) {
      r = arc->r;
      lo = arc->angle_lo;
      hi = arc->angle_hi;
      closed = false;
    } else if (const auto* circle = std::get_if<CircleClass>(&rec.class_spec)) {
      r = circle->r;
    } else {
      throw ContractError("radius check needs circle or arc records");
    }
    const NetModel model = reconstruct(mae, rec);
    std::vector<Point2> outputs;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = closed ? lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n)
                              : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
      outputs.push_back(run_ae(model, {r * std::cos(t), r * std::sin(t)}));
    }
    double fitted = 0.0;
    try {
      fitted = fit_circle_kasa(outputs).r;
    } catch (const std::exception&) {
      fitted = 0.0;  // degenerate output counts as a miss
    }
    out.true_r.push_back(r);
    out.fitted_r.push_back(fitted);
    if (std::abs(fitted - r) <= tolerance * r) ++out.within;
  }
  return out;
}

MaeVerdict judge_mae(const MaeModel& mae, std::span<const AeRecord> test,
                     const ExecLossConfig& cfg) {
  MaeVerdict v;
  const EvalReport report = eval_mae(mae, test, cfg);
  v.max_exec_rmse = report.max_exec_rmse;
  const MaeTrainStats& s = mae.train_stats;
  v.test_loss_reduction =
      s.initial_test_loss > 0.0 ? 1.0 - s.final_test_loss / s.initial_test_loss : 0.0;
  char buf[256];
  if (mae.spec.kind == MaeKind::Line818) {
    v.success = v.max_exec_rmse <= 0.2;
    std::snprintf(buf, sizeof buf, "held-out max exec-RMSE %.4g (bound 0.2)", v.max_exec_rmse);
    v.summary = v.success ? std::string("The learning converged well: ") + buf
                          : std::string("MAE did not converge: ") + buf;
  } else {
    const RadiusCheck rc = radius_check(mae, test);
    v.radius_fraction = static_cast<double>(rc.within) / static_cast<double>(test.size());
    v.success = v.test_loss_reduction >= 0.9 && v.radius_fraction >= 0.8;
    std::snprintf(buf, sizeof buf,
                  "test exec-loss reduced by %.1f%% (bound 90%%), %zu/%zu held-out radii within "
                  "15%% (bound 80%%)",
                  100.0 * v.test_loss_reduction, rc.within, test.size());
    v.summary = v.success ? std::string("The MAE training was successful: ") + buf
                          : std::string("MAE training did not meet its target: ") + buf;
  }
  return v;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw ContractError("spearman needs two equally long samples of size >= 2");
  }
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double mean = (n + 1.0) / 2.0;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - mean) * (rb[i] - mean);
    saa += (ra[i] - mean) * (ra[i] - mean);
    sbb += (rb[i] - mean) * (rb[i] - mean);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace metaenc
