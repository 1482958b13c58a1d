#include "scansum/biometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <json.hpp>

#include "scansum/error.hpp"

namespace scansum {

namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;
using Vec3 = std::array<double, 3>;

double det3(const Mat3& m) {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
         m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

Mat3 inverse3(const Mat3& m, double det) {
  Mat3 inv{};
  inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
  inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
  inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
  inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
  inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
  inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
  inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
  inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
  inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
  return inv;
}

Mat3 mul(const Mat3& a, const Mat3& b) {
  Mat3 out{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) out[i][j] += a[i][k] * b[k][j];
  return out;
}

Mat3 transpose(const Mat3& a) {
  Mat3 out{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out[i][j] = a[j][i];
  return out;
}

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

double norm(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

// Real roots of x^3 + b x^2 + c x + d, each polished by Newton steps.
std::vector<double> cubic_real_roots(double b, double c, double d) {
  const double p = c - b * b / 3.0;
  const double q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
  const double shift = -b / 3.0;
  std::vector<double> roots;
  const double disc = q * q / 4.0 + p * p * p / 27.0;
  if (p < 0.0 && disc <= 0.0) {
    const double r = 2.0 * std::sqrt(-p / 3.0);
    const double arg = std::clamp(3.0 * q / (p * r), -1.0, 1.0);
    const double phi = std::acos(arg) / 3.0;
    for (int k = 0; k < 3; ++k) {
      roots.push_back(r * std::cos(phi - 2.0 * std::numbers::pi * k / 3.0) + shift);
    }
  } else {
    const double s = std::sqrt(std::max(disc, 0.0));
    roots.push_back(std::cbrt(-q / 2.0 + s) + std::cbrt(-q / 2.0 - s) + shift);
  }
  for (double& x : roots) {
    for (int it = 0; it < 3; ++it) {
      const double f = ((x + b) * x + c) * x + d;
      const double df = (3.0 * x + 2.0 * b) * x + c;
      if (df == 0.0) break;
      const double step = f / df;
      if (!std::isfinite(step)) break;
      x -= step;
    }
  }
  return roots;
}

struct Conic {
  double A, B, C, D, E, F;
};

EllipseParams conic_to_params(const Conic& k) {
  const double den = k.B * k.B - 4.0 * k.A * k.C;
  if (!(den < 0.0)) throw Error(ErrorCode::NoEllipseSolution, "conic is not an ellipse");
  const double cx = (2.0 * k.C * k.D - k.B * k.E) / den;
  const double cy = (2.0 * k.A * k.E - k.B * k.D) / den;
  const double f0 = k.F + 0.5 * (k.D * cx + k.E * cy);
  const double mid = 0.5 * (k.A + k.C);
  const double rad = std::hypot(0.5 * (k.A - k.C), 0.5 * k.B);
  const double lam_plus = mid + rad;
  const double lam_minus = mid - rad;
  const double sq_plus = -f0 / lam_plus;
  const double sq_minus = -f0 / lam_minus;
  if (!(sq_plus > 0.0) || !(sq_minus > 0.0)) {
    throw Error(ErrorCode::NoEllipseSolution, "imaginary ellipse");
  }
  double phi = 0.5 * std::atan2(k.B, k.A - k.C);  // eigenvector of lam_plus
  EllipseParams e;
  e.cx = cx;
  e.cy = cy;
  if (sq_plus >= sq_minus) {
    e.a = std::sqrt(sq_plus);
    e.b = std::sqrt(sq_minus);
  } else {
    e.a = std::sqrt(sq_minus);
    e.b = std::sqrt(sq_plus);
    phi += 0.5 * std::numbers::pi;
  }
  phi = std::fmod(phi, std::numbers::pi);
  if (phi < 0.0) phi += std::numbers::pi;
  if (phi >= std::numbers::pi) phi -= std::numbers::pi;
  e.theta = phi;
  return e;
}

double cross2(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

double dot2(const Point2& p, double ux, double uy) { return p.x * ux + p.y * uy; }

std::string_view kind_name(EquationKind k) {
  return k == EquationKind::GestationalAge ? "gestational_age" : "fetal_weight";
}

std::optional<double> lookup(const BiometrySet& m, std::string_view name) {
  if (name == "HC") return m.hc_mm;
  if (name == "AC") return m.ac_mm;
  if (name == "BPD") return m.bpd_mm;
  if (name == "Cereb") return m.cereb_mm;
  if (name == "FL") return m.fl_mm;
  throw Error(ErrorCode::InvalidArgument, "unknown measurement '" + std::string(name) + "'");
}

}  // namespace

void BiometrySet::merge_missing(const BiometrySet& other) {
  if (!hc_mm) hc_mm = other.hc_mm;
  if (!ac_mm) ac_mm = other.ac_mm;
  if (!bpd_mm) bpd_mm = other.bpd_mm;
  if (!cereb_mm) cereb_mm = other.cereb_mm;
  if (!fl_mm) fl_mm = other.fl_mm;
}

// Boundary ------------------------------------------------------------------

std::vector<Point2> boundary_points(const BinaryMask& mask) {
  if (mask.foreground_count() == 0) throw Error(ErrorCode::EmptyMask, "mask has no foreground");
  std::vector<Point2> out;
  const std::size_t w = mask.width, h = mask.height;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (!mask.at(x, y)) continue;
      const bool edge = x == 0 || y == 0 || x + 1 == w || y + 1 == h || !mask.at(x - 1, y) ||
                        !mask.at(x + 1, y) || !mask.at(x, y - 1) || !mask.at(x, y + 1);
      if (edge) out.push_back({static_cast<double>(x), static_cast<double>(y)});
    }
  }
  return out;
}

std::vector<Point2> boundary_edge_points(const BinaryMask& mask) {
  if (mask.foreground_count() == 0) throw Error(ErrorCode::EmptyMask, "mask has no foreground");
  std::vector<Point2> out;
  const std::size_t w = mask.width, h = mask.height;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (!mask.at(x, y)) continue;
      const double fx = static_cast<double>(x), fy = static_cast<double>(y);
      if (y == 0 || !mask.at(x, y - 1)) out.push_back({fx, fy - 0.5});
      if (x == 0 || !mask.at(x - 1, y)) out.push_back({fx - 0.5, fy});
      if (x + 1 == w || !mask.at(x + 1, y)) out.push_back({fx + 0.5, fy});
      if (y + 1 == h || !mask.at(x, y + 1)) out.push_back({fx, fy + 0.5});
    }
  }
  return out;
}

// Ellipse -------------------------------------------------------------------

EllipseParams fit_ellipse(std::span<const Point2> points) {
  if (points.size() < 6) {
    throw Error(ErrorCode::DegenerateInput, "ellipse fit needs at least 6 points");
  }
  double mx = 0.0, my = 0.0;
  for (const auto& p : points) {
    mx += p.x;
    my += p.y;
  }
  const auto n = static_cast<double>(points.size());
  mx /= n;
  my /= n;
  double spread = 0.0;
  for (const auto& p : points) spread += (p.x - mx) * (p.x - mx) + (p.y - my) * (p.y - my);
  const double scale = std::sqrt(spread / n);
  if (!(scale > 0.0)) throw Error(ErrorCode::DegenerateInput, "all points coincide");

  // Scatter blocks: quadratic terms (x^2, xy, y^2) against linear (x, y, 1).
  Mat3 s1{}, s2{}, s3{};
  for (const auto& p : points) {
    const double x = (p.x - mx) / scale, y = (p.y - my) / scale;
    const Vec3 quad{x * x, x * y, y * y};
    const Vec3 lin{x, y, 1.0};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        s1[i][j] += quad[i] * quad[j];
        s2[i][j] += quad[i] * lin[j];
        s3[i][j] += lin[i] * lin[j];
      }
    }
  }
  const double det_s3 = det3(s3);
  // s3 is singular exactly when the points are collinear.
  if (!(std::abs(det_s3) > 1e-12 * n * n * n)) {
    throw Error(ErrorCode::DegenerateInput, "points are collinear");
  }
  const Mat3 s3_inv = inverse3(s3, det_s3);
  Mat3 t = mul(s3_inv, transpose(s2));
  for (auto& row : t)
    for (double& v : row) v = -v;
  Mat3 reduced = mul(s2, t);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) reduced[i][j] += s1[i][j];
  // Premultiply by the inverse of the constraint block [[0,0,2],[0,-1,0],[2,0,0]].
  Mat3 m{};
  for (int j = 0; j < 3; ++j) {
    m[0][j] = reduced[2][j] / 2.0;
    m[1][j] = -reduced[1][j];
    m[2][j] = reduced[0][j] / 2.0;
  }

  const double trace = m[0][0] + m[1][1] + m[2][2];
  const double minors = m[0][0] * m[1][1] - m[0][1] * m[1][0] + m[0][0] * m[2][2] -
                        m[0][2] * m[2][0] + m[1][1] * m[2][2] - m[1][2] * m[2][1];
  const double det_m = det3(m);
  const std::vector<double> eigenvalues = cubic_real_roots(-trace, minors, -det_m);

  std::optional<Vec3> best;
  double best_lambda = std::numeric_limits<double>::infinity();
  for (double lambda : eigenvalues) {
    Vec3 r0{m[0][0] - lambda, m[0][1], m[0][2]};
    Vec3 r1{m[1][0], m[1][1] - lambda, m[1][2]};
    Vec3 r2{m[2][0], m[2][1], m[2][2] - lambda};
    Vec3 cands[3] = {cross(r0, r1), cross(r0, r2), cross(r1, r2)};
    Vec3 v = *std::max_element(std::begin(cands), std::end(cands),
                               [](const Vec3& a, const Vec3& b) { return norm(a) < norm(b); });
    const double len = norm(v);
    if (!(len > 0.0) || !std::isfinite(len)) continue;
    for (double& c : v) c /= len;
    const double cond = 4.0 * v[0] * v[2] - v[1] * v[1];
    if (cond > 0.0 && std::abs(lambda) < best_lambda) {
      best_lambda = std::abs(lambda);
      best = v;
    }
  }
  if (!best) throw Error(ErrorCode::NoEllipseSolution, "no eigenvector satisfies 4ac - b^2 > 0");

  const Vec3& q = *best;
  Vec3 lin{};
  for (int i = 0; i < 3; ++i) lin[i] = t[i][0] * q[0] + t[i][1] * q[1] + t[i][2] * q[2];
  EllipseParams e = conic_to_params({q[0], q[1], q[2], lin[0], lin[1], lin[2]});
  e.cx = mx + scale * e.cx;
  e.cy = my + scale * e.cy;
  e.a *= scale;
  e.b *= scale;
  return e;
}

double ellipse_perimeter(const EllipseParams& e) {
  const double a = std::max(e.a, e.b), b = std::min(e.a, e.b);
  if (a + b == 0.0) return 0.0;
  const double h = ((a - b) / (a + b)) * ((a - b) / (a + b));
  return std::numbers::pi * (a + b) * (1.0 + 3.0 * h / (10.0 + std::sqrt(4.0 - 3.0 * h)));
}

// Rectangle -----------------------------------------------------------------

std::vector<Point2> convex_hull(std::span<const Point2> points) {
  std::vector<Point2> pts(points.begin(), points.end());
  std::sort(pts.begin(), pts.end(),
            [](const Point2& a, const Point2& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Point2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross2(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

RectParams fit_min_rect(std::span<const Point2> points) {
  if (points.empty()) throw Error(ErrorCode::DegenerateInput, "rectangle of no points");
  const std::vector<Point2> hull = convex_hull(points);
  RectParams rect;
  if (hull.size() == 1) {
    rect.corners.fill(hull[0]);
    return rect;
  }
  if (hull.size() == 2) {
    rect.corners = {hull[0], hull[1], hull[1], hull[0]};
    rect.long_side = std::hypot(hull[1].x - hull[0].x, hull[1].y - hull[0].y);
    return rect;
  }

  const std::size_t h = hull.size();
  auto next = [h](std::size_t i) { return (i + 1) % h; };
  double best_area = std::numeric_limits<double>::infinity();
  std::size_t right = 0, top = 0, left = 0;
  for (std::size_t i = 0; i < h; ++i) {
    const Point2& p0 = hull[i];
    const Point2& p1 = hull[next(i)];
    const double len = std::hypot(p1.x - p0.x, p1.y - p0.y);
    const double ux = (p1.x - p0.x) / len, uy = (p1.y - p0.y) / len;
    const double nx = -uy, ny = ux;  // inward for a counter-clockwise hull
    if (i == 0) {
      for (std::size_t k = 0; k < h; ++k) {
        if (dot2(hull[k], ux, uy) > dot2(hull[right], ux, uy)) right = k;
        if (dot2(hull[k], nx, ny) > dot2(hull[top], nx, ny)) top = k;
        if (dot2(hull[k], ux, uy) < dot2(hull[left], ux, uy)) left = k;
      }
    } else {
      for (std::size_t s = 0; s < h && dot2(hull[next(right)], ux, uy) > dot2(hull[right], ux, uy); ++s)
        right = next(right);
      for (std::size_t s = 0; s < h && dot2(hull[next(top)], nx, ny) > dot2(hull[top], nx, ny); ++s)
        top = next(top);
      for (std::size_t s = 0; s < h && dot2(hull[next(left)], ux, uy) < dot2(hull[left], ux, uy); ++s)
        left = next(left);
    }
    const double base = dot2(p0, ux, uy);
    const double lo = dot2(hull[left], ux, uy) - base;
    const double hi = dot2(hull[right], ux, uy) - base;
    const double height = dot2(hull[top], nx, ny) - dot2(p0, nx, ny);
    const double width = hi - lo;
    const double area = width * height;
    // Equal-area candidates are common (every side of a triangle gives the
    // same rectangle area); take the shortest long side so the result does
    // not depend on where the hull starts.
    const double tie = std::isfinite(best_area) ? 1e-10 * best_area : 0.0;
    const bool better = area < best_area - tie ||
                        (area <= best_area + tie && std::max(width, height) < rect.long_side);
    if (better) {
      best_area = area;
      const Point2 c0{p0.x + ux * lo, p0.y + uy * lo};
      const Point2 c1{p0.x + ux * hi, p0.y + uy * hi};
      rect.corners = {c0, c1, Point2{c1.x + nx * height, c1.y + ny * height},
                      Point2{c0.x + nx * height, c0.y + ny * height}};
      rect.long_side = std::max(width, height);
      rect.short_side = std::min(width, height);
    }
  }
  return rect;
}

// Caliper -------------------------------------------------------------------

std::vector<double> caliper_ticks(const GrayImage& strip, std::size_t band_width) {
  const std::size_t band = std::min(band_width, strip.width);
  std::vector<double> ticks;
  if (band == 0) return ticks;
  std::optional<std::size_t> run_start;
  for (std::size_t y = 0; y <= strip.height; ++y) {
    bool bright = false;
    if (y < strip.height) {
      double sum = 0.0;
      for (std::size_t x = 0; x < band; ++x) sum += strip.at(x, y);
      bright = sum / static_cast<double>(band) > kCaliperBrightness;
    }
    if (bright && !run_start) run_start = y;
    if (!bright && run_start) {
      ticks.push_back(0.5 * static_cast<double>(*run_start + y - 1));
      run_start.reset();
    }
  }
  return ticks;
}

double caliper_scale(const GrayImage& strip, double tick_spacing_mm, std::size_t band_width) {
  if (!(tick_spacing_mm > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "tick spacing must be positive");
  }
  const std::vector<double> ticks = caliper_ticks(strip, band_width);
  if (ticks.size() < 2) {
    throw Error(ErrorCode::InsufficientTicks,
                "found " + std::to_string(ticks.size()) + " caliper tick(s), need 2");
  }
  std::vector<double> gaps;
  for (std::size_t k = 1; k < ticks.size(); ++k) gaps.push_back(ticks[k] - ticks[k - 1]);
  std::sort(gaps.begin(), gaps.end());
  const std::size_t mid = gaps.size() / 2;
  const double median = gaps.size() % 2 ? gaps[mid] : 0.5 * (gaps[mid - 1] + gaps[mid]);
  return tick_spacing_mm / median;
}

// Measurement ---------------------------------------------------------------

BiometrySet measure(const BinaryMask& mask, BiometryClass cls) {
  if (!(mask.mm_per_px > 0.0)) throw Error(ErrorCode::InvalidArgument, "mask scale unknown");
  const std::vector<Point2> outline = boundary_edge_points(mask);
  BiometrySet out;
  switch (cls) {
    case BiometryClass::HC:
    case BiometryClass::AC: {
      const EllipseParams e = fit_ellipse(outline);
      const double perimeter = ellipse_perimeter(e) * mask.mm_per_px;
      if (cls == BiometryClass::HC) {
        out.hc_mm = perimeter;
        out.bpd_mm = 2.0 * e.b * mask.mm_per_px;
      } else {
        out.ac_mm = perimeter;
      }
      break;
    }
    case BiometryClass::FL:
    case BiometryClass::Cereb: {
      const double length = fit_min_rect(outline).long_side * mask.mm_per_px;
      if (cls == BiometryClass::FL) {
        out.fl_mm = length;
      } else {
        out.cereb_mm = length;
      }
      break;
    }
  }
  return out;
}

// Equations -----------------------------------------------------------------

double Equation::evaluate(const BiometrySet& m) const {
  const double unit = units == "cm" ? 0.1 : 1.0;
  std::map<std::string, double> values;
  for (const auto& name : inputs) {
    const std::optional<double> v = lookup(m, name);
    if (!v) throw Error(ErrorCode::MissingMeasurement, this->name + " needs " + name);
    const double x = *v * unit;
    const auto dom = domain.find(name);
    if (dom != domain.end() && (x < dom->second.first || x > dom->second.second)) {
      throw Error(ErrorCode::OutOfValidRange,
                  this->name + ": " + name + "=" + std::to_string(x) + " " + units +
                      " outside [" + std::to_string(dom->second.first) + ", " +
                      std::to_string(dom->second.second) + "]");
    }
    values.emplace(name, x);
  }
  double sum = 0.0;
  for (const auto& term : terms) {
    double prod = term.coefficient;
    for (const auto& [name, power] : term.powers) {
      const double x = values.at(name);
      for (int k = 0; k < power; ++k) prod *= x;
      for (int k = 0; k > power; --k) prod /= x;
    }
    sum += prod;
  }
  return transform == OutputTransform::Exp10 ? std::pow(10.0, sum) : sum;
}

const Equation& EquationTable::find(EquationKind kind) const {
  for (const auto& eq : equations) {
    if (eq.kind == kind) return eq;
  }
  throw Error(ErrorCode::InvalidArgument,
              "equation table has no " + std::string(kind_name(kind)) + " equation");
}

EquationTable EquationTable::defaults() {
  EquationTable table;
  Equation ga;
  ga.name = "hadlock_1984_hc";
  ga.kind = EquationKind::GestationalAge;
  ga.inputs = {"HC"};
  ga.units = "cm";
  ga.terms = {{8.96, {}}, {0.540, {{"HC", 1}}}, {0.0003, {{"HC", 3}}}};
  ga.domain = {{"HC", {8.0, 36.0}}};
  ga.source = "Hadlock et al. 1984, GA(weeks) = 8.96 + 0.540 HC + 0.0003 HC^3, HC in cm";
  table.equations.push_back(ga);

  Equation efw;
  efw.name = "hadlock_1985_hc_ac_fl";
  efw.kind = EquationKind::FetalWeight;
  efw.inputs = {"HC", "AC", "FL"};
  efw.units = "cm";
  efw.transform = OutputTransform::Exp10;
  efw.terms = {{1.326, {}},
               {-0.00326, {{"AC", 1}, {"FL", 1}}},
               {0.0107, {{"HC", 1}}},
               {0.0438, {{"AC", 1}}},
               {0.158, {{"FL", 1}}}};
  efw.domain = {{"HC", {8.0, 40.0}}, {"AC", {8.0, 45.0}}, {"FL", {1.0, 9.0}}};
  efw.source = "Hadlock et al. 1985 (HC/AC/FL), log10 EFW(g), inputs in cm";
  table.equations.push_back(efw);
  return table;
}

EquationTable EquationTable::from_json(std::string_view text) {
  using nlohmann::json;
  auto bad = [](const std::string& what) -> Error {
    return Error(ErrorCode::InvalidArgument, "equation table: " + what);
  };
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw bad(e.what());
  }
  if (!doc.is_object() || !doc.contains("equations") || !doc["equations"].is_array()) {
    throw bad("expected {\"equations\": [...]}");
  }
  EquationTable table;
  try {
    for (const auto& e : doc["equations"]) {
      Equation eq;
      eq.name = e.at("name").get<std::string>();
      const auto kind = e.at("kind").get<std::string>();
      if (kind == "gestational_age") {
        eq.kind = EquationKind::GestationalAge;
      } else if (kind == "fetal_weight") {
        eq.kind = EquationKind::FetalWeight;
      } else {
        throw bad("unknown kind '" + kind + "'");
      }
      eq.inputs = e.at("inputs").get<std::vector<std::string>>();
      for (const auto& in : eq.inputs) lookup(BiometrySet{}, in);
      eq.units = e.value("units", std::string("mm"));
      if (eq.units != "mm" && eq.units != "cm") throw bad("units must be mm or cm");
      const auto tr = e.value("transform", std::string("identity"));
      if (tr == "identity") {
        eq.transform = OutputTransform::Identity;
      } else if (tr == "exp10") {
        eq.transform = OutputTransform::Exp10;
      } else {
        throw bad("unknown transform '" + tr + "'");
      }
      for (const auto& t : e.at("terms")) {
        EquationTerm term;
        term.coefficient = t.at("coefficient").get<double>();
        if (t.contains("powers")) term.powers = t["powers"].get<std::map<std::string, int>>();
        for (const auto& [name, p] : term.powers) {
          if (std::find(eq.inputs.begin(), eq.inputs.end(), name) == eq.inputs.end()) {
            throw bad(eq.name + ": term uses '" + name + "' which is not an input");
          }
        }
        eq.terms.push_back(std::move(term));
      }
      if (e.contains("domain")) {
        for (const auto& [name, range] : e["domain"].items()) {
          const auto r = range.get<std::vector<double>>();
          if (r.size() != 2 || r[0] > r[1]) throw bad(eq.name + ": bad domain for " + name);
          eq.domain[name] = {r[0], r[1]};
        }
      }
      eq.source = e.value("source", std::string());
      table.equations.push_back(std::move(eq));
    }
  } catch (const json::exception& ex) {
    throw bad(ex.what());
  }
  return table;
}

std::string EquationTable::to_json() const {
  using nlohmann::json;
  json list = json::array();
  for (const auto& eq : equations) {
    json terms = json::array();
    for (const auto& t : eq.terms) {
      terms.push_back({{"coefficient", t.coefficient}, {"powers", t.powers}});
    }
    json domain = json::object();
    for (const auto& [name, r] : eq.domain) domain[name] = {r.first, r.second};
    list.push_back({{"name", eq.name},
                    {"kind", std::string(kind_name(eq.kind))},
                    {"inputs", eq.inputs},
                    {"units", eq.units},
                    {"transform", eq.transform == OutputTransform::Exp10 ? "exp10" : "identity"},
                    {"terms", terms},
                    {"domain", domain},
                    {"source", eq.source}});
  }
  return json{{"equations", list}}.dump(2) + "\n";
}

EquationTable load_equation_table(const fs::path& path) {
  return EquationTable::from_json(read_text_file(path));
}

double gestational_age(const BiometrySet& m, const EquationTable& table) {
  return table.find(EquationKind::GestationalAge).evaluate(m);
}

double estimated_fetal_weight(const BiometrySet& m, const EquationTable& table) {
  return table.find(EquationKind::FetalWeight).evaluate(m);
}

void derive_clinical(BiometrySet& m, const EquationTable& table) {
  for (const auto kind : {EquationKind::GestationalAge, EquationKind::FetalWeight}) {
    std::optional<double>& slot = kind == EquationKind::GestationalAge ? m.ga_weeks : m.efw_grams;
    slot.reset();
    const Equation* eq = nullptr;
    for (const auto& e : table.equations) {
      if (e.kind == kind) {
        eq = &e;
        break;
      }
    }
    if (!eq) continue;
    try {
      slot = eq->evaluate(m);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::MissingMeasurement && e.code() != ErrorCode::OutOfValidRange) throw;
    }
  }
}

}  // namespace scansum
