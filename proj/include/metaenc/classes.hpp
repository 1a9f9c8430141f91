#pragma once

// Families of planar point classes (lines through the origin, circles and
// arcs centred at the origin) with samplers and analytic encode/decode pairs.

#include <cstdint>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

namespace metaenc {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Point2&) const = default;
};

double distance(Point2 a, Point2 b);

/// Line y = a x with a = tan(theta_deg in radians). -80 <= theta_deg < 80.
struct LineClass {
  int theta_deg = 0;

  double slope() const;
  bool operator==(const LineClass&) const = default;
};

struct CircleClass {
  double r = 1.0;

  bool operator==(const CircleClass&) const = default;
};

struct ArcClass {
  double r = 1.0;
  double angle_lo = std::numbers::pi / 6.0;
  double angle_hi = std::numbers::pi / 3.0;

  bool operator==(const ArcClass&) const = default;
};

using ClassSpec = std::variant<LineClass, CircleClass, ArcClass>;

/// Throws ContractError when the class violates its invariants.
void validate(const ClassSpec& spec);

/// Short human-readable label, e.g. "line(theta=45)" or "arc(r=3)".
std::string label(const ClassSpec& spec);

/// The scalar that distinguishes members of a family: slope for lines,
/// radius for circles and arcs.
double family_parameter(const ClassSpec& spec);

/// Max reconstruction distance allowed for a class to count as encodable.
struct EncodabilityBudget {
  double epsilon = 0.0;
};

/// Line: x uniform in [-10, 10]. Circle: angle uniform in [-pi, pi).
/// Arc: angle uniform in [angle_lo, angle_hi].
std::vector<Point2> sample_points(const ClassSpec& spec, std::size_t n, std::uint64_t seed);

/// Line: x. Circle/arc: atan2(y, x). Throws ContractError for off-curve points
/// (distance to the curve above 1e-6).
double analytic_encode(const ClassSpec& spec, Point2 p);

/// Line: (t, a t). Circle/arc: (r cos t, r sin t).
Point2 analytic_decode(const ClassSpec& spec, double t);

/// True when every point satisfies |p - decode(encode(p))| <= budget.epsilon.
bool encodable_within(const ClassSpec& spec, const std::vector<Point2>& points,
                      EncodabilityBudget budget);

inline constexpr double kLineXRange = 10.0;
inline constexpr int kLineThetaMin = -80;
inline constexpr int kLineThetaMax = 80;  // exclusive

/// `count` integer-degree lines evenly spread over [-80, 80). 160 must be
/// divisible by count; 160 gives every integer angle, 16 gives -75..75 step 10.
std::vector<ClassSpec> line_grid(int count);

/// `count` radii evenly spaced over [r_min, r_max] (inclusive).
std::vector<ClassSpec> circle_grid(int count, double r_min = 1.0, double r_max = 10.0);
std::vector<ClassSpec> arc_grid(int count, double r_min = 1.0, double r_max = 10.0,
                                double angle_lo = std::numbers::pi / 6.0,
                                double angle_hi = std::numbers::pi / 3.0);

}  // namespace metaenc
