#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scansum/corpus_io.hpp"

namespace scansum {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Point2&) const = default;
};

struct EllipseParams {
  double cx = 0.0;
  double cy = 0.0;
  double a = 0.0;      // semi-major, px
  double b = 0.0;      // semi-minor, px
  double theta = 0.0;  // major-axis direction in [0, pi)
};

struct RectParams {
  std::array<Point2, 4> corners{};
  double long_side = 0.0;
  double short_side = 0.0;

  double area() const { return long_side * short_side; }
};

struct BiometrySet {
  std::optional<double> hc_mm;
  std::optional<double> ac_mm;
  std::optional<double> bpd_mm;
  std::optional<double> cereb_mm;
  std::optional<double> fl_mm;
  std::optional<double> ga_weeks;
  std::optional<double> efw_grams;

  bool has_any_measurement() const { return hc_mm || ac_mm || bpd_mm || cereb_mm || fl_mm; }
  /// Fills measurements missing here from `other`; derived values untouched.
  void merge_missing(const BiometrySet& other);

  bool operator==(const BiometrySet&) const = default;
};

/// Foreground pixels with a 4-neighbour in the background or off-image, as
/// pixel centres in raster order (row-major, top to bottom).
std::vector<Point2> boundary_points(const BinaryMask& mask);

/// Midpoints of every pixel edge separating foreground from background or
/// the image border: the region outline at sub-pixel precision.
std::vector<Point2> boundary_edge_points(const BinaryMask& mask);

/// Direct least-squares ellipse fit with the 4ac - b^2 = 1 constraint, in the
/// partitioned form that reduces to a 3x3 eigenproblem (solved through its
/// characteristic cubic). Points are centred and scaled before fitting.
EllipseParams fit_ellipse(std::span<const Point2> points);

/// Ramanujan's second approximation.
double ellipse_perimeter(const EllipseParams& e);

std::vector<Point2> convex_hull(std::span<const Point2> points);

/// Minimum-area enclosing rectangle: monotone-chain hull, then rotating
/// calipers over the hull edges.
RectParams fit_min_rect(std::span<const Point2> points);

/// Bright band in the leftmost `band_width` columns marks a tick. Returns
/// tick_spacing_mm over the median gap between consecutive tick centres.
inline constexpr std::size_t kCaliperBandWidth = 4;
inline constexpr double kCaliperBrightness = 128.0;
double caliper_scale(const GrayImage& strip, double tick_spacing_mm,
                     std::size_t band_width = kCaliperBandWidth);
/// Tick centre rows, exposed for diagnostics.
std::vector<double> caliper_ticks(const GrayImage& strip, std::size_t band_width = kCaliperBandWidth);

/// HC/AC: fitted-ellipse perimeter (HC also yields BPD = 2b).
/// Cereb/FL: long side of the minimum rectangle. All in mm.
BiometrySet measure(const BinaryMask& mask, BiometryClass cls);

// Clinical equations --------------------------------------------------------

enum class EquationKind { GestationalAge, FetalWeight };
enum class OutputTransform { Identity, Exp10 };

struct EquationTerm {
  double coefficient = 0.0;
  std::map<std::string, int> powers;  // measurement name -> exponent
};

/// out = transform(sum_k coef_k * prod_m x_m^p_km), with inputs converted to
/// `units` first and checked against `domain`.
struct Equation {
  std::string name;
  EquationKind kind = EquationKind::GestationalAge;
  std::vector<std::string> inputs;  // "HC", "AC", "BPD", "Cereb", "FL"
  std::string units = "mm";         // "mm" or "cm"
  OutputTransform transform = OutputTransform::Identity;
  std::vector<EquationTerm> terms;
  std::map<std::string, std::pair<double, double>> domain;  // in `units`
  std::string source;

  double evaluate(const BiometrySet& m) const;
};

struct EquationTable {
  std::vector<Equation> equations;

  const Equation& find(EquationKind kind) const;
  static EquationTable defaults();
  static EquationTable from_json(std::string_view text);
  std::string to_json() const;
};

EquationTable load_equation_table(const fs::path& path);

double gestational_age(const BiometrySet& m, const EquationTable& table);
double estimated_fetal_weight(const BiometrySet& m,
                              const EquationTable& table = EquationTable::defaults());

/// Fills ga_weeks / efw_grams where the configured equations' inputs exist.
/// Out-of-domain inputs leave the value empty rather than throwing.
void derive_clinical(BiometrySet& m, const EquationTable& table);

}  // namespace scansum
