#pragma once

#include <filesystem>
#include <functional>
#include <utility>
#include <vector>

#include "ecgpred/vecmath.hpp"
#include "ecgpred/wfdb.hpp"

namespace ecgpred {

// r >= 0 plus d-1 angles: theta[0..d-3] in [0,pi], theta[d-2] in (-pi,pi].
// The zero vector canonicalizes to all-zero angles.
struct SphericalVector {
  double r = 0.0;
  Vec theta;
};

SphericalVector to_spherical(const Vec& x);
Vec to_cartesian(const SphericalVector& s);

// Classical Gram-Schmidt without normalization: first column unchanged,
// later columns lose their projections onto earlier outputs. Throws
// NumericError when a column collapses (near-dependent input).
std::vector<Vec> gram_schmidt(const std::vector<Vec>& columns);

// Cluster geometry around the normal centroid: columns are the vectors from
// the normal centroid to each abnormal centroid, plus their orthogonalized
// images.
struct CentroidFrame {
  Vec normal_centroid;
  std::vector<wfdb::AamiClass> classes;
  std::vector<Vec> columns;
  std::vector<Vec> ortho_columns;
  int dim() const { return static_cast<int>(normal_centroid.size()); }
};

CentroidFrame make_frame(
    Vec normal_centroid,
    const std::vector<std::pair<wfdb::AamiClass, Vec>>& abnormal_centroids);

struct TargetPoint {
  double x = 0.0;
  double y = 0.0;
};

// Per-angle mapping targets, sorted and strictly increasing in both
// coordinates. Always contains the domain anchors (0,0) and (D,D); a
// crossing/duplicate pair sets identity_fallback and drops the interior.
struct AngularTargets {
  std::vector<TargetPoint> points;
  double domain_end = 0.0;  // pi, or 2*pi for the final angle
  bool identity_fallback = false;
};

// Which vectors pin the targets. Centroids maps each centroid column onto
// its orthogonalized image (the transformed centroids come out exactly
// orthogonal); Differences uses the pairwise difference vectors relative to
// the first column.
enum class TargetAnchor { Centroids, Differences };

AngularTargets build_targets(const CentroidFrame& frame, int angular_dim,
                             TargetAnchor anchor = TargetAnchor::Centroids);

// Linear interpolation through the target points; exact at targets, clamped
// outside the domain.
double eval_piecewise_linear(const AngularTargets& targets, double x);

// One target point's inverse-logit halves:
//   g(x) = k_g * (e^{alpha_g * (delta_x - x)} - 1) + delta_y   on [gamma, delta]
//   h(x) = k_h * (e^{alpha_h * (x - delta_x)} - 1) + delta_y   on [delta, eps]
// alpha_h is solved so the two one-sided derivatives at delta agree.
struct LogitSegment {
  double gamma_x = 0.0, gamma_y = 0.0;
  double delta_x = 0.0, delta_y = 0.0;
  double eps_x = 0.0, eps_y = 0.0;
  double alpha_g = 0.0, k_g = 0.0;  // zero alpha = linear half
  double alpha_h = 0.0, k_h = 0.0;
  bool has_g = false, has_h = false;
  // |g'(delta-) - h'(delta+)|; zero when a side is missing.
  double derivative_mismatch() const;
};

struct LogitMap {
  AngularTargets targets;
  double alpha_g = 1.0;
  std::vector<LogitSegment> segments;  // one per target point
};

LogitMap build_logit_map(const AngularTargets& targets, double alpha_g);
double eval_logit_map(const LogitMap& map, double x);

// Piecewise-linear radius rescale: r' = r/rho below rho, 1 + (r - rho)
// beyond, where rho blends the centroid radii by angular proximity of the
// query direction to the orthogonalized centroid directions. Every centroid
// lands exactly on radius 1.
struct RadiusMap {
  std::vector<Vec> directions;  // unit orthogonalized centroid directions
  Vec radii;                    // original centroid radii
};

double map_radius(const RadiusMap& map, double r, const Vec& direction);

enum class AngleMapKind { Identity, PiecewiseLinear, Logit };

struct SpatialTransform {
  CentroidFrame frame;
  AngleMapKind kind = AngleMapKind::Identity;
  double alpha_g = 1.0;
  TargetAnchor anchor = TargetAnchor::Centroids;
  std::vector<AngularTargets> targets;  // one per angular dimension
  std::vector<LogitMap> logit_maps;     // populated for Logit
  RadiusMap radius;
};

SpatialTransform build_transform(const CentroidFrame& frame, AngleMapKind kind,
                                 double alpha_g = 1.0,
                                 TargetAnchor anchor = TargetAnchor::Centroids);

// z = to_cartesian(radius_map(angle_maps(to_spherical(x - c_N)))).
Vec apply_transform(const SpatialTransform& transform, const Vec& x);

using TransformFn = std::function<Vec(const Vec&)>;
TransformFn transform_fn(const SpatialTransform& transform);

void save_transform(const SpatialTransform& transform,
                    const std::filesystem::path& path);
SpatialTransform load_transform(const std::filesystem::path& path);

}  // namespace ecgpred
