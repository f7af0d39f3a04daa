#include "ecgpred/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "ecgpred/errors.hpp"

namespace ecgpred {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

}  // namespace

SphericalVector to_spherical(const Vec& x) {
  const std::size_t d = x.size();
  if (d < 2) throw UsageError("to_spherical: dimension must be >= 2");
  SphericalVector s;
  s.theta.assign(d - 1, 0.0);
  s.r = norm(x);
  if (s.r == 0.0) return s;

  Vec suffix_norm(d);
  double acc = 0.0;
  for (std::size_t j = d; j-- > 0;) {
    acc += x[j] * x[j];
    suffix_norm[j] = std::sqrt(acc);
  }
  for (std::size_t i = 0; i + 2 < d; ++i) {
    s.theta[i] = suffix_norm[i] > 0.0
                     ? std::acos(std::clamp(x[i] / suffix_norm[i], -1.0, 1.0))
                     : 0.0;
  }
  const double hyp = std::hypot(x[d - 2], x[d - 1]);
  if (hyp > 0.0) {
    const double base = std::acos(std::clamp(x[d - 2] / hyp, -1.0, 1.0));
    s.theta[d - 2] = x[d - 1] >= 0.0 ? base : -base;
  }
  return s;
}

Vec to_cartesian(const SphericalVector& s) {
  const std::size_t d = s.theta.size() + 1;
  if (d < 2) throw UsageError("to_cartesian: dimension must be >= 2");
  Vec x(d, 0.0);
  double sin_prod = 1.0;
  for (std::size_t i = 0; i + 1 < d; ++i) {
    x[i] = s.r * std::cos(s.theta[i]) * sin_prod;
    sin_prod *= std::sin(s.theta[i]);
  }
  x[d - 1] = s.r * sin_prod;
  return x;
}

std::vector<Vec> gram_schmidt(const std::vector<Vec>& columns) {
  if (columns.empty()) return {};
  const std::size_t d = columns.front().size();
  if (columns.size() > d) {
    throw NumericError("gram_schmidt: more columns than dimensions");
  }
  std::vector<Vec> out;
  out.reserve(columns.size());
  for (const Vec& c : columns) {
    const double input_norm = norm(c);
    Vec u = c;
    for (const Vec& prev : out) {
      const double coeff = dot(c, prev) / dot(prev, prev);
      for (std::size_t i = 0; i < d; ++i) u[i] -= coeff * prev[i];
    }
    if (norm(u) < 1e-10 * input_norm) {
      throw NumericError(
          "gram_schmidt: degenerate geometry, column " +
          std::to_string(out.size()) + " is dependent on earlier columns");
    }
    out.push_back(std::move(u));
  }
  return out;
}

CentroidFrame make_frame(
    Vec normal_centroid,
    const std::vector<std::pair<wfdb::AamiClass, Vec>>& abnormal_centroids) {
  CentroidFrame frame;
  frame.normal_centroid = std::move(normal_centroid);
  const std::size_t d = frame.normal_centroid.size();
  if (d < 2) throw NumericError("make_frame: dimension must be >= 2");
  if (abnormal_centroids.empty()) {
    throw NumericError("make_frame: no abnormal centroids");
  }
  for (const auto& [cls, centroid] : abnormal_centroids) {
    if (centroid.size() != d) {
      throw NumericError("make_frame: centroid dimension mismatch");
    }
    Vec column = centroid - frame.normal_centroid;
    if (norm(column) < 1e-12) {
      throw NumericError(
          std::string("make_frame: abnormal centroid '") +
          wfdb::to_char(cls) + "' coincides with the normal centroid");
    }
    frame.classes.push_back(cls);
    frame.columns.push_back(std::move(column));
  }
  frame.ortho_columns = gram_schmidt(frame.columns);
  return frame;
}

namespace {

// Angle of v in dimension `i`, shifted to [0, 2*pi) for the final angle so
// targets live on a single increasing axis.
double target_angle(const Vec& v, int i) {
  const SphericalVector s = to_spherical(v);
  double a = s.theta[static_cast<std::size_t>(i)];
  const bool last = static_cast<std::size_t>(i) + 1 == s.theta.size();
  if (last && a < 0.0) a += kTwoPi;
  return a;
}

}  // namespace

AngularTargets build_targets(const CentroidFrame& frame, int angular_dim,
                             TargetAnchor anchor) {
  const int d = frame.dim();
  if (angular_dim < 0 || angular_dim >= d - 1) {
    throw UsageError("build_targets: angular dimension out of range");
  }
  AngularTargets out;
  out.domain_end = (angular_dim == d - 2) ? kTwoPi : kPi;

  std::vector<TargetPoint> pts;
  pts.push_back({0.0, 0.0});
  pts.push_back({out.domain_end, out.domain_end});

  if (anchor == TargetAnchor::Centroids) {
    for (std::size_t j = 0; j < frame.columns.size(); ++j) {
      pts.push_back({target_angle(frame.columns[j], angular_dim),
                     target_angle(frame.ortho_columns[j], angular_dim)});
    }
  } else {
    for (std::size_t j = 1; j < frame.columns.size(); ++j) {
      const Vec diff = frame.columns[j] - frame.columns[0];
      const Vec diff_perp = frame.ortho_columns[j] - frame.ortho_columns[0];
      if (norm(diff) < 1e-12 || norm(diff_perp) < 1e-12) {
        out.identity_fallback = true;
        continue;
      }
      pts.push_back({target_angle(diff, angular_dim),
                     target_angle(diff_perp, angular_dim)});
    }
  }

  std::sort(pts.begin(), pts.end(),
            [](const TargetPoint& a, const TargetPoint& b) {
              return a.x < b.x || (a.x == b.x && a.y < b.y);
            });

  constexpr double kEps = 1e-12;
  std::vector<TargetPoint> dedup;
  for (const TargetPoint& p : pts) {
    if (!dedup.empty() && std::fabs(p.x - dedup.back().x) <= kEps &&
        std::fabs(p.y - dedup.back().y) <= kEps) {
      continue;  // same point twice (e.g. the unchanged first column)
    }
    dedup.push_back(p);
  }
  for (std::size_t i = 1; i < dedup.size(); ++i) {
    if (dedup[i].x - dedup[i - 1].x <= kEps ||
        dedup[i].y - dedup[i - 1].y <= kEps) {
      out.identity_fallback = true;
      break;
    }
  }
  if (out.identity_fallback) {
    out.points = {{0.0, 0.0}, {out.domain_end, out.domain_end}};
  } else {
    out.points = std::move(dedup);
  }
  return out;
}

double eval_piecewise_linear(const AngularTargets& targets, double x) {
  const auto& pts = targets.points;
  if (x <= pts.front().x) return pts.front().y;
  if (x >= pts.back().x) return pts.back().y;
  auto it = std::upper_bound(
      pts.begin(), pts.end(), x,
      [](double v, const TargetPoint& p) { return v < p.x; });
  const TargetPoint& hi = *it;
  const TargetPoint& lo = *(it - 1);
  if (x == lo.x) return lo.y;
  const double t = (x - lo.x) / (hi.x - lo.x);
  return lo.y + t * (hi.y - lo.y);
}

namespace {

// Right-derivative at delta of the h half as a function of alpha:
//   phi(alpha) = alpha * du / (e^{alpha*L} - 1)
// Strictly decreasing in alpha, phi(0) = du/L (the secant slope).
double logit_derivative_at_delta(double alpha, double du, double len) {
  const double al = alpha * len;
  if (al > 700.0) return 0.0;
  if (al < -700.0) return -alpha * du;
  if (std::fabs(al) < 1e-12) return du / len;
  return alpha * du / std::expm1(al);
}

// Solve phi(alpha) = target by bisection. The positive branch covers the
// usual concentration case; flat-left/steep-right target layouts need the
// negative branch to keep the derivative match.
double solve_alpha_h(double target, double du, double len) {
  const double secant = du / len;
  if (std::fabs(target - secant) < 1e-14 * std::max(1.0, secant)) return 0.0;

  double lo, hi;  // phi(lo) > target > phi(hi)
  if (target < secant) {
    lo = 1e-6;
    hi = 1e3;
    while (logit_derivative_at_delta(hi, du, len) > target && hi < 1e9) {
      hi *= 10.0;
    }
  } else {
    lo = -1e3;
    hi = -1e-6;
    while (logit_derivative_at_delta(lo, du, len) < target && lo > -1e9) {
      lo *= 10.0;
    }
  }
  for (int it = 0; it < 300; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (logit_derivative_at_delta(mid, du, len) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-10) break;
  }
  return 0.5 * (lo + hi);
}

double safe_expm1(double v) {
  if (v > 700.0) throw NumericError("logit map: exponent overflow");
  return std::expm1(v);
}

double eval_g(const LogitSegment& s, double x) {
  if (s.alpha_g == 0.0) {
    const double slope = (s.delta_y - s.gamma_y) / (s.delta_x - s.gamma_x);
    return s.delta_y + slope * (x - s.delta_x);
  }
  return s.k_g * safe_expm1(s.alpha_g * (s.delta_x - x)) + s.delta_y;
}

double eval_h(const LogitSegment& s, double x) {
  if (s.alpha_h == 0.0) {
    const double slope = (s.eps_y - s.delta_y) / (s.eps_x - s.delta_x);
    return s.delta_y + slope * (x - s.delta_x);
  }
  return s.k_h * safe_expm1(s.alpha_h * (x - s.delta_x)) + s.delta_y;
}

}  // namespace

double LogitSegment::derivative_mismatch() const {
  if (!has_g || !has_h) return 0.0;
  const double dg = alpha_g == 0.0
                        ? (delta_y - gamma_y) / (delta_x - gamma_x)
                        : -alpha_g * k_g;
  const double dh = alpha_h == 0.0
                        ? (eps_y - delta_y) / (eps_x - delta_x)
                        : alpha_h * k_h;
  return std::fabs(dg - dh);
}

LogitMap build_logit_map(const AngularTargets& targets, double alpha_g) {
  if (alpha_g <= 0.0) {
    throw UsageError("build_logit_map: alpha_g must be positive");
  }
  LogitMap map;
  map.targets = targets;
  map.alpha_g = alpha_g;
  const auto& pts = targets.points;
  map.segments.resize(pts.size());

  for (std::size_t j = 0; j < pts.size(); ++j) {
    LogitSegment& seg = map.segments[j];
    seg.delta_x = pts[j].x;
    seg.delta_y = pts[j].y;
    if (j > 0) {
      seg.has_g = true;
      seg.gamma_x = 0.5 * (pts[j - 1].x + pts[j].x);
      seg.gamma_y = 0.5 * (pts[j - 1].y + pts[j].y);
    }
    if (j + 1 < pts.size()) {
      seg.has_h = true;
      seg.eps_x = 0.5 * (pts[j].x + pts[j + 1].x);
      seg.eps_y = 0.5 * (pts[j].y + pts[j + 1].y);
    }

    if (seg.has_g) {
      seg.alpha_g = alpha_g;
      seg.k_g = (seg.gamma_y - seg.delta_y) /
                safe_expm1(alpha_g * (seg.delta_x - seg.gamma_x));
    }
    if (seg.has_h) {
      const double du = seg.eps_y - seg.delta_y;
      const double len = seg.eps_x - seg.delta_x;
      if (seg.has_g) {
        // Match h'(delta+) to g'(delta-).
        const double g_slope = -seg.alpha_g * seg.k_g;
        seg.alpha_h = solve_alpha_h(g_slope, du, len);
      } else {
        seg.alpha_h = alpha_g;  // lone half at the lower domain anchor
      }
      if (seg.alpha_h != 0.0) {
        seg.k_h = du / safe_expm1(seg.alpha_h * len);
      }
    }
  }
  return map;
}

double eval_logit_map(const LogitMap& map, double x) {
  const auto& pts = map.targets.points;
  x = std::clamp(x, pts.front().x, pts.back().x);

  // Segment regions tile the domain at the inter-target midpoints.
  std::size_t j = 0;
  while (j + 1 < pts.size() &&
         x > 0.5 * (pts[j].x + pts[j + 1].x)) {
    ++j;
  }
  const LogitSegment& seg = map.segments[j];
  if (x == seg.delta_x) return seg.delta_y;
  if (x < seg.delta_x) {
    return seg.has_g ? eval_g(seg, x) : seg.delta_y;
  }
  return seg.has_h ? eval_h(seg, x) : seg.delta_y;
}

double map_radius(const RadiusMap& map, double r, const Vec& direction) {
  if (r < 0.0) throw NumericError("map_radius: negative radius");
  if (r == 0.0) return 0.0;
  if (map.directions.empty()) return r;

  double weight_sum = 0.0;
  double rho = 0.0;
  for (std::size_t i = 0; i < map.directions.size(); ++i) {
    const double cd = cosine_distance(direction, map.directions[i]);
    if (cd < 1e-12) {
      rho = map.radii[i];
      weight_sum = 1.0;
      break;
    }
    const double w = 1.0 / cd;
    weight_sum += w;
    rho += w * map.radii[i];
  }
  rho /= weight_sum;
  return r <= rho ? r / rho : 1.0 + (r - rho);
}

SpatialTransform build_transform(const CentroidFrame& frame, AngleMapKind kind,
                                 double alpha_g, TargetAnchor anchor) {
  SpatialTransform t;
  t.frame = frame;
  t.kind = kind;
  t.alpha_g = alpha_g;
  t.anchor = anchor;

  t.radius.radii.reserve(frame.columns.size());
  t.radius.directions.reserve(frame.columns.size());
  for (std::size_t j = 0; j < frame.columns.size(); ++j) {
    const double rad = norm(frame.columns[j]);
    const double ortho_norm = norm(frame.ortho_columns[j]);
    t.radius.radii.push_back(rad);
    t.radius.directions.push_back((1.0 / ortho_norm) * frame.ortho_columns[j]);
  }

  if (kind == AngleMapKind::Identity) return t;

  const int d = frame.dim();
  for (int i = 0; i < d - 1; ++i) {
    t.targets.push_back(build_targets(frame, i, anchor));
  }
  if (kind == AngleMapKind::Logit) {
    for (const auto& targets : t.targets) {
      t.logit_maps.push_back(build_logit_map(targets, alpha_g));
    }
  }
  return t;
}

Vec apply_transform(const SpatialTransform& transform, const Vec& x) {
  Vec v = x - transform.frame.normal_centroid;
  if (transform.kind == AngleMapKind::Identity) return v;

  SphericalVector s = to_spherical(v);
  if (s.r == 0.0) return Vec(v.size(), 0.0);

  const std::size_t last = s.theta.size() - 1;
  for (std::size_t i = 0; i < s.theta.size(); ++i) {
    double a = s.theta[i];
    if (i == last && a < 0.0) a += kTwoPi;
    a = transform.kind == AngleMapKind::Logit
            ? eval_logit_map(transform.logit_maps[i], a)
            : eval_piecewise_linear(transform.targets[i], a);
    s.theta[i] = a;
  }

  SphericalVector unit_s;
  unit_s.r = 1.0;
  unit_s.theta = s.theta;
  const Vec unit = to_cartesian(unit_s);
  const double r_new = map_radius(transform.radius, s.r, unit);
  return r_new * unit;
}

TransformFn transform_fn(const SpatialTransform& transform) {
  return [transform](const Vec& x) { return apply_transform(transform, x); };
}

namespace {

nlohmann::ordered_json frame_to_json(const CentroidFrame& frame) {
  nlohmann::ordered_json j;
  j["normal_centroid"] = frame.normal_centroid;
  std::string classes;
  for (auto c : frame.classes) classes += wfdb::to_char(c);
  j["classes"] = classes;
  j["columns"] = frame.columns;
  j["ortho_columns"] = frame.ortho_columns;
  return j;
}

CentroidFrame frame_from_json(const nlohmann::json& j) {
  CentroidFrame frame;
  frame.normal_centroid = j.at("normal_centroid").get<Vec>();
  for (char c : j.at("classes").get<std::string>()) {
    frame.classes.push_back(wfdb::aami_from_char(c));
  }
  frame.columns = j.at("columns").get<std::vector<Vec>>();
  frame.ortho_columns = j.at("ortho_columns").get<std::vector<Vec>>();
  return frame;
}

}  // namespace

void save_transform(const SpatialTransform& transform,
                    const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["schema"] = "ecgpred.transform/1";
  switch (transform.kind) {
    case AngleMapKind::Identity: j["kind"] = "identity"; break;
    case AngleMapKind::PiecewiseLinear: j["kind"] = "piecewise_linear"; break;
    case AngleMapKind::Logit: j["kind"] = "logit"; break;
  }
  j["alpha_g"] = transform.alpha_g;
  j["anchor"] = transform.anchor == TargetAnchor::Centroids ? "centroids"
                                                            : "differences";
  j["frame"] = frame_to_json(transform.frame);
  auto targets = nlohmann::ordered_json::array();
  for (const auto& t : transform.targets) {
    nlohmann::ordered_json tj;
    tj["domain_end"] = t.domain_end;
    tj["identity_fallback"] = t.identity_fallback;
    auto pts = nlohmann::ordered_json::array();
    for (const auto& p : t.points) pts.push_back({p.x, p.y});
    tj["points"] = pts;
    targets.push_back(tj);
  }
  j["targets"] = targets;
  j["radius"] = {{"radii", transform.radius.radii},
                 {"directions", transform.radius.directions}};
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path.string());
  f << j.dump(2) << '\n';
}

SpatialTransform load_transform(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open " + path.string());
  nlohmann::json j;
  f >> j;

  SpatialTransform t;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "identity") {
    t.kind = AngleMapKind::Identity;
  } else if (kind == "piecewise_linear") {
    t.kind = AngleMapKind::PiecewiseLinear;
  } else if (kind == "logit") {
    t.kind = AngleMapKind::Logit;
  } else {
    throw DataError("unknown transform kind: " + kind);
  }
  t.alpha_g = j.at("alpha_g").get<double>();
  t.anchor = j.at("anchor").get<std::string>() == "differences"
                 ? TargetAnchor::Differences
                 : TargetAnchor::Centroids;
  t.frame = frame_from_json(j.at("frame"));
  for (const auto& tj : j.at("targets")) {
    AngularTargets targets;
    targets.domain_end = tj.at("domain_end").get<double>();
    targets.identity_fallback = tj.at("identity_fallback").get<bool>();
    for (const auto& p : tj.at("points")) {
      targets.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    }
    t.targets.push_back(std::move(targets));
  }
  t.radius.radii = j.at("radius").at("radii").get<Vec>();
  t.radius.directions = j.at("radius").at("directions").get<std::vector<Vec>>();
  if (t.kind == AngleMapKind::Logit) {
    for (const auto& targets : t.targets) {
      t.logit_maps.push_back(build_logit_map(targets, t.alpha_g));
    }
  }
  return t;
}

}  // namespace ecgpred
