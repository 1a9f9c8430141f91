#include "metaenc/classes.hpp"

#include <cmath>
#include <sstream>

#include "metaenc/errors.hpp"
#include "metaenc/rng.hpp"

namespace metaenc {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

constexpr double kOnCurveTolerance = 1e-6;

}  // namespace

double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

double LineClass::slope() const {
  return std::tan(static_cast<double>(theta_deg) * std::numbers::pi / 180.0);
}

void validate(const ClassSpec& spec) {
  std::visit(overloaded{
                 [](const LineClass& c) {
                   if (c.theta_deg < kLineThetaMin || c.theta_deg >= kLineThetaMax) {
                     throw ContractError("line angle " + std::to_string(c.theta_deg) +
                                         " outside [-80, 80)");
                   }
                 },
                 [](const CircleClass& c) {
                   if (!(c.r > 0.0) || !std::isfinite(c.r)) {
                     throw ContractError("circle radius must be positive");
                   }
                 },
                 [](const ArcClass& c) {
                   if (!(c.r > 0.0) || !std::isfinite(c.r)) {
                     throw ContractError("arc radius must be positive");
                   }
                   if (!(c.angle_lo < c.angle_hi)) {
                     throw ContractError("arc requires angle_lo < angle_hi");
                   }
                 },
             },
             spec);
}

std::string label(const ClassSpec& spec) {
  std::ostringstream os;
  std::visit(overloaded{
                 [&](const LineClass& c) { os << "line(theta=" << c.theta_deg << ")"; },
                 [&](const CircleClass& c) { os << "circle(r=" << c.r << ")"; },
                 [&](const ArcClass& c) { os << "arc(r=" << c.r << ")"; },
             },
             spec);
  return os.str();
}

double family_parameter(const ClassSpec& spec) {
  return std::visit(overloaded{
                        [](const LineClass& c) { return c.slope(); },
                        [](const CircleClass& c) { return c.r; },
                        [](const ArcClass& c) { return c.r; },
                    },
                    spec);
}

std::vector<Point2> sample_points(const ClassSpec& spec, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ContractError("sample size must be positive");
  validate(spec);
  Rng rng(seed);
  std::vector<Point2> points;
  points.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::visit(overloaded{
                   [&](const LineClass& c) {
                     const double x = rng.uniform(-kLineXRange, kLineXRange);
                     points.push_back({x, c.slope() * x});
                   },
                   [&](const CircleClass& c) {
                     const double t = rng.uniform(-std::numbers::pi, std::numbers::pi);
                     points.push_back({c.r * std::cos(t), c.r * std::sin(t)});
                   },
                   [&](const ArcClass& c) {
                     const double t = rng.uniform(c.angle_lo, c.angle_hi);
                     points.push_back({c.r * std::cos(t), c.r * std::sin(t)});
                   },
               },
               spec);
  }
  return points;
}

double analytic_encode(const ClassSpec& spec, Point2 p) {
  return std::visit(
      overloaded{
          [&](const LineClass& c) {
            const double a = c.slope();
            const double off = std::abs(p.y - a * p.x) / std::sqrt(1.0 + a * a);
            if (off > kOnCurveTolerance) throw ContractError("point is not on " + label(spec));
            return p.x;
          },
          [&](const CircleClass& c) {
            if (std::abs(std::hypot(p.x, p.y) - c.r) > kOnCurveTolerance) {
              throw ContractError("point is not on " + label(spec));
            }
            return std::atan2(p.y, p.x);
          },
          [&](const ArcClass& c) {
            const double t = std::atan2(p.y, p.x);
            if (std::abs(std::hypot(p.x, p.y) - c.r) > kOnCurveTolerance ||
                t < c.angle_lo - kOnCurveTolerance || t > c.angle_hi + kOnCurveTolerance) {
              throw ContractError("point is not on " + label(spec));
            }
            return t;
          },
      },
      spec);
}

Point2 analytic_decode(const ClassSpec& spec, double t) {
  return std::visit(overloaded{
                        [&](const LineClass& c) { return Point2{t, c.slope() * t}; },
                        [&](const CircleClass& c) {
                          return Point2{c.r * std::cos(t), c.r * std::sin(t)};
                        },
                        [&](const ArcClass& c) {
                          return Point2{c.r * std::cos(t), c.r * std::sin(t)};
                        },
                    },
                    spec);
}

bool encodable_within(const ClassSpec& spec, const std::vector<Point2>& points,
                      EncodabilityBudget budget) {
  if (budget.epsilon < 0.0) throw ContractError("epsilon must be nonnegative");
  for (const Point2& p : points) {
    if (distance(p, analytic_decode(spec, analytic_encode(spec, p))) > budget.epsilon) {
      return false;
    }
  }
  return true;
}

std::vector<ClassSpec> line_grid(int count) {
  constexpr int span = kLineThetaMax - kLineThetaMin;
  if (count <= 0 || span % count != 0) {
    throw ContractError("line count must divide 160, got " + std::to_string(count));
  }
  const int step = span / count;
  std::vector<ClassSpec> out;
  for (int k = 0; k < count; ++k) out.emplace_back(LineClass{kLineThetaMin + step / 2 + k * step});
  return out;
}

namespace {

std::vector<double> radii(int count, double r_min, double r_max) {
  if (count <= 0) throw ContractError("class count must be positive");
  if (!(r_min > 0.0) || r_max < r_min) throw ContractError("invalid radius range");
  std::vector<double> out;
  for (int k = 0; k < count; ++k) {
    out.push_back(count == 1 ? r_min : r_min + (r_max - r_min) * k / (count - 1));
  }
  return out;
}

}  // namespace

std::vector<ClassSpec> circle_grid(int count, double r_min, double r_max) {
  std::vector<ClassSpec> out;
  for (double r : radii(count, r_min, r_max)) out.emplace_back(CircleClass{r});
  return out;
}

std::vector<ClassSpec> arc_grid(int count, double r_min, double r_max, double angle_lo,
                                double angle_hi) {
  std::vector<ClassSpec> out;
  for (double r : radii(count, r_min, r_max)) {
    ArcClass arc{r, angle_lo, angle_hi};
    validate(arc);
    out.emplace_back(arc);
  }
  return out;
}

}  // namespace metaenc
