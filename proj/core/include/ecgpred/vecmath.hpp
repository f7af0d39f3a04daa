#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "ecgpred/errors.hpp"

namespace ecgpred {

using Vec = std::vector<double>;

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

inline double squared_distance(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline double distance(const Vec& a, const Vec& b) {
  return std::sqrt(squared_distance(a, b));
}

// 1 - cos(angle between v and w). Range [0, 2]; 0 = aligned, 1 = orthogonal.
inline double cosine_distance(const Vec& v, const Vec& w) {
  const double nv = norm(v);
  const double nw = norm(w);
  if (nv == 0.0 || nw == 0.0) {
    throw NumericError("cosine_distance: zero-length vector");
  }
  return 1.0 - dot(v, w) / (nv * nw);
}

inline Vec operator+(const Vec& a, const Vec& b) {
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

inline Vec operator-(const Vec& a, const Vec& b) {
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

inline Vec operator*(double s, const Vec& a) {
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = s * a[i];
  return r;
}

inline Vec mean_point(const std::vector<Vec>& points) {
  if (points.empty()) throw NumericError("mean_point: empty point set");
  Vec m(points.front().size(), 0.0);
  for (const Vec& p : points)
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += p[i];
  for (double& v : m) v /= static_cast<double>(points.size());
  return m;
}

// Even count -> mean of the two middle order statistics.
inline double median(std::vector<double> xs) {
  if (xs.empty()) throw NumericError("median: empty input");
  const std::size_t n = xs.size();
  const std::size_t mid = n / 2;
  std::nth_element(xs.begin(), xs.begin() + mid, xs.end());
  double hi = xs[mid];
  if (n % 2 == 1) return hi;
  const double lo = *std::max_element(xs.begin(), xs.begin() + mid);
  return 0.5 * (lo + hi);
}

// Linear-interpolation quantile over the order statistics (index p*(n-1)).
inline double quantile(std::vector<double> xs, double p) {
  if (xs.empty()) throw NumericError("quantile: empty input");
  std::sort(xs.begin(), xs.end());
  const double pos = p * static_cast<double>(xs.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
  const double frac = pos - static_cast<double>(lo);
  return xs[lo] + frac * (xs[hi] - xs[lo]);
}

}  // namespace ecgpred
