#include "ecgpred/swarm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "ecgpred/errors.hpp"

namespace ecgpred {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Cluster Cluster::from_points(wfdb::AamiClass label, std::vector<Vec> points) {
  Cluster c;
  c.label = label;
  c.centroid = mean_point(points);
  c.points = std::move(points);
  return c;
}

BasisSet BasisSet::linear(int dim) { return BasisSet(Kind::Linear, dim, dim); }

BasisSet BasisSet::polynomial2(int dim) {
  const int size = 1 + dim + dim * (dim - 1) / 2 + dim;
  return BasisSet(Kind::Polynomial2, dim, size);
}

Vec BasisSet::psi(const Vec& x) const {
  if (static_cast<int>(x.size()) != dim_) {
    throw UsageError("BasisSet: input dimension mismatch");
  }
  if (kind_ == Kind::Linear) return x;

  Vec out;
  out.reserve(static_cast<std::size_t>(size_));
  out.push_back(1.0);
  for (double v : x) out.push_back(v);
  for (int i = 0; i < dim_; ++i) {
    for (int j = i + 1; j < dim_; ++j) {
      out.push_back(x[static_cast<std::size_t>(i)] *
                    x[static_cast<std::size_t>(j)]);
    }
  }
  for (double v : x) out.push_back(v * v);
  return out;
}

Vec BasisSet::expand(const Vec& w, const Vec& x) const {
  if (static_cast<int>(w.size()) != size_) {
    throw UsageError("BasisSet: coefficient dimension mismatch");
  }
  Vec z = psi(x);
  for (std::size_t l = 0; l < z.size(); ++l) z[l] *= w[l];
  return z;
}

Vec BasisSet::uniform_linear_coefficients() const {
  Vec w(static_cast<std::size_t>(size_), 0.0);
  const int offset = kind_ == Kind::Linear ? 0 : 1;
  const double value = 1.0 / std::sqrt(static_cast<double>(dim_));
  for (int i = 0; i < dim_; ++i) {
    w[static_cast<std::size_t>(offset + i)] = value;
  }
  return w;
}

double objective_symmetry(const Vec& normal_centroid,
                          const std::vector<Vec>& abnormal_centroids) {
  if (abnormal_centroids.size() < 2) {
    throw UsageError("objective_symmetry: need at least two abnormal clusters");
  }
  std::vector<Vec> vs;
  vs.reserve(abnormal_centroids.size());
  for (const Vec& c : abnormal_centroids) {
    Vec v = normal_centroid - c;
    if (norm(v) < 1e-15) return kInf;
    vs.push_back(std::move(v));
  }
  double min_cd = kInf;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    for (std::size_t j = i + 1; j < vs.size(); ++j) {
      min_cd = std::min(min_cd, cosine_distance(vs[i], vs[j]));
    }
  }
  if (min_cd <= 1e-15) return kInf;
  return 1.0 / min_cd;
}

double objective_separability(const std::vector<Cluster>& clusters) {
  for (const Cluster& c : clusters) {
    if (c.points.empty()) {
      throw UsageError("objective_separability: empty cluster");
    }
  }
  double sw = 0.0;
  for (const Cluster& c : clusters) {
    for (const Vec& p : c.points) sw += squared_distance(p, c.centroid);
  }
  double sb = 0.0;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    for (std::size_t j = 0; j < clusters.size(); ++j) {
      if (i == j) continue;
      sb += squared_distance(clusters[i].centroid, clusters[j].centroid);
    }
  }
  if (sb < 1e-30) return kInf;
  return sw / sb;
}

bool dominates(const ObjectivePair& a, const ObjectivePair& b) {
  return a.o1 <= b.o1 && a.o2 <= b.o2 && (a.o1 < b.o1 || a.o2 < b.o2);
}

ParetoArchive::ParetoArchive(int capacity) : capacity_(capacity) {
  if (capacity_ < 1) throw UsageError("ParetoArchive: capacity must be >= 1");
}

bool ParetoArchive::insert(ArchiveEntry entry) {
  if (!std::isfinite(entry.o1) || !std::isfinite(entry.o2)) return false;
  const ObjectivePair cand{entry.o1, entry.o2};
  for (const ArchiveEntry& e : entries_) {
    if (dominates({e.o1, e.o2}, cand)) return false;
    if (e.o1 == entry.o1 && e.o2 == entry.o2 && e.w == entry.w) return false;
  }
  std::erase_if(entries_, [&](const ArchiveEntry& e) {
    return dominates(cand, {e.o1, e.o2});
  });
  auto pos = std::lower_bound(
      entries_.begin(), entries_.end(), entry,
      [](const ArchiveEntry& a, const ArchiveEntry& b) {
        return a.o1 < b.o1 || (a.o1 == b.o1 && a.o2 < b.o2);
      });
  entries_.insert(pos, std::move(entry));
  prune();
  return true;
}

bool ParetoArchive::mutually_non_dominated() const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    for (std::size_t j = 0; j < entries_.size(); ++j) {
      if (i != j && dominates({entries_[i].o1, entries_[i].o2},
                              {entries_[j].o1, entries_[j].o2})) {
        return false;
      }
    }
  }
  return true;
}

std::vector<double> ParetoArchive::crowding_distances() const {
  const std::size_t n = entries_.size();
  std::vector<double> cd(n, 0.0);
  if (n <= 2) {
    std::fill(cd.begin(), cd.end(), kInf);
    return cd;
  }
  // entries_ are sorted by o1 ascending (o2 descending on a front)
  cd.front() = cd.back() = kInf;
  const double r1 = entries_.back().o1 - entries_.front().o1;
  const double r2 = entries_.front().o2 - entries_.back().o2;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (r1 > 0) cd[i] += (entries_[i + 1].o1 - entries_[i - 1].o1) / r1;
    if (r2 > 0) cd[i] += (entries_[i - 1].o2 - entries_[i + 1].o2) / r2;
  }
  return cd;
}

void ParetoArchive::prune() {
  while (entries_.size() > static_cast<std::size_t>(capacity_)) {
    const auto cd = crowding_distances();
    std::size_t victim = 0;
    double best = kInf;
    for (std::size_t i = 0; i < cd.size(); ++i) {
      if (cd[i] <= best) {  // ties resolve to the last index
        best = cd[i];
        victim = i;
      }
    }
    entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(victim));
  }
}

ObjectivePair evaluate_candidate(const Vec& w, const Cluster& normal,
                                 const std::vector<Cluster>& abnormal,
                                 const BasisSet& basis) {
  std::vector<Cluster> transformed;
  transformed.reserve(abnormal.size() + 1);

  auto transform_cluster = [&](const Cluster& c) {
    Cluster t;
    t.label = c.label;
    t.points.reserve(c.points.size());
    for (const Vec& p : c.points) t.points.push_back(basis.expand(w, p));
    t.centroid = mean_point(t.points);
    return t;
  };

  transformed.push_back(transform_cluster(normal));
  std::vector<Vec> abnormal_centroids;
  for (const Cluster& c : abnormal) {
    transformed.push_back(transform_cluster(c));
    abnormal_centroids.push_back(transformed.back().centroid);
  }

  ObjectivePair obj;
  obj.o1 = objective_symmetry(transformed.front().centroid, abnormal_centroids);
  obj.o2 = objective_separability(transformed);
  return obj;
}

namespace {

Cluster subsample(const Cluster& c, int limit, std::mt19937_64& rng) {
  if (static_cast<int>(c.points.size()) <= limit) return c;
  Cluster out;
  out.label = c.label;
  std::vector<std::size_t> idx(c.points.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(static_cast<std::size_t>(limit));
  std::sort(idx.begin(), idx.end());
  for (std::size_t i : idx) out.points.push_back(c.points[i]);
  out.centroid = mean_point(out.points);
  return out;
}

}  // namespace

ParetoArchive mopso(const Cluster& normal, const std::vector<Cluster>& abnormal,
                    const BasisSet& basis, const MopsoConfig& config,
                    const IterationObserver& observer) {
  if (config.swarm_size < 1) throw UsageError("mopso: swarm_size must be >= 1");
  if (abnormal.size() < 2) {
    throw UsageError("mopso: need at least two abnormal clusters");
  }

  std::mt19937_64 subsample_rng(config.seed ^ 0x5bf0'3635'd1a4'9104ULL);
  const Cluster normal_s = subsample(normal, config.subsample_limit, subsample_rng);
  std::vector<Cluster> abnormal_s;
  for (const Cluster& c : abnormal) {
    abnormal_s.push_back(subsample(c, config.subsample_limit, subsample_rng));
  }

  const int dim = basis.size();
  const int n = config.swarm_size;

  struct Particle {
    Vec w, velocity, pbest_w;
    ObjectivePair obj, pbest_obj;
    std::mt19937_64 rng;
  };
  std::vector<Particle> swarm(static_cast<std::size_t>(n));
  std::mt19937_64 guide_rng(config.seed ^ 0xd1b5'4a32'd192'ed03ULL);

  auto normalize = [&](Vec& w, std::mt19937_64& rng) {
    double nw = norm(w);
    while (nw < 1e-12) {
      std::normal_distribution<double> gauss;
      for (double& v : w) v = gauss(rng);
      nw = norm(w);
    }
    for (double& v : w) v /= nw;
  };

  for (int i = 0; i < n; ++i) {
    Particle& p = swarm[static_cast<std::size_t>(i)];
    p.rng.seed(config.seed + 0x9e37'79b9'7f4a'7c15ULL *
                                 static_cast<std::uint64_t>(i + 1));
    p.velocity.assign(static_cast<std::size_t>(dim), 0.0);
    if (i == 0) {
      p.w = basis.uniform_linear_coefficients();
    } else {
      p.w.assign(static_cast<std::size_t>(dim), 0.0);
      std::normal_distribution<double> gauss;
      for (double& v : p.w) v = gauss(p.rng);
    }
    normalize(p.w, p.rng);
    p.obj = evaluate_candidate(p.w, normal_s, abnormal_s, basis);
    p.pbest_w = p.w;
    p.pbest_obj = p.obj;
  }

  ParetoArchive archive(config.archive_capacity);
  for (const Particle& p : swarm) archive.insert({p.w, p.obj.o1, p.obj.o2});
  if (archive.empty()) {
    throw NumericError(
        "mopso: every initial particle evaluated to sentinel objectives; "
        "check the input clusters");
  }
  if (observer) observer(0, archive);

  for (int iter = 1; iter <= config.iterations; ++iter) {
    // Guides come from the least-crowded half of the frozen archive.
    const auto cd = archive.crowding_distances();
    std::vector<std::size_t> order(cd.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return cd[a] > cd[b];
    });
    const std::size_t half = (order.size() + 1) / 2;

    for (Particle& p : swarm) {
      std::uniform_int_distribution<std::size_t> pick(0, half - 1);
      const Vec& guide = archive.entries()[order[pick(guide_rng)]].w;

      std::uniform_real_distribution<double> uni(0.0, 1.0);
      for (std::size_t k = 0; k < p.w.size(); ++k) {
        const double r1 = uni(p.rng);
        const double r2 = uni(p.rng);
        p.velocity[k] = config.inertia * p.velocity[k] +
                        config.cognitive * r1 * (p.pbest_w[k] - p.w[k]) +
                        config.social * r2 * (guide[k] - p.w[k]);
        p.w[k] += p.velocity[k];
      }
      normalize(p.w, p.rng);
      p.obj = evaluate_candidate(p.w, normal_s, abnormal_s, basis);

      if (dominates(p.obj, p.pbest_obj)) {
        p.pbest_w = p.w;
        p.pbest_obj = p.obj;
      } else if (!dominates(p.pbest_obj, p.obj)) {
        std::uniform_int_distribution<int> coin(0, 1);
        if (coin(p.rng) == 1) {
          p.pbest_w = p.w;
          p.pbest_obj = p.obj;
        }
      }
    }

    for (const Particle& p : swarm) archive.insert({p.w, p.obj.o1, p.obj.o2});
    if (observer) observer(iter, archive);
  }
  return archive;
}

std::size_t knee_point(const ParetoArchive& archive) {
  const auto& e = archive.entries();
  if (e.empty()) throw UsageError("knee_point: empty archive");
  if (e.size() <= 2) return 0;
  const double r1 = e.back().o1 - e.front().o1;
  const double r2 = e.front().o2 - e.back().o2;
  if (r1 <= 0 || r2 <= 0) return 0;

  // Normalized chord endpoints: (0,1) -> (1,0).
  std::size_t best = 0;
  double best_dist = -1.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double x = (e[i].o1 - e.front().o1) / r1;
    const double y = (e[i].o2 - e.back().o2) / r2;
    const double dist = std::fabs(x + y - 1.0) / std::sqrt(2.0);
    if (dist > best_dist) {
      best_dist = dist;
      best = i;
    }
  }
  return best;
}

std::size_t pick_operating_point(const ParetoArchive& archive,
                                 std::optional<double> beta) {
  const auto& e = archive.entries();
  if (e.empty()) throw UsageError("pick_operating_point: empty archive");
  if (!beta) return knee_point(archive);
  if (*beta < 0.0 || *beta > 1.0) {
    throw UsageError("pick_operating_point: beta must be in [0, 1]");
  }
  std::size_t best = 0;
  double best_val = kInf;
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double val = *beta * e[i].o1 + (1.0 - *beta) * e[i].o2;
    if (val < best_val) {
      best_val = val;
      best = i;
    }
  }
  return best;
}

void write_archive_csv(const ParetoArchive& archive,
                       const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path.string());
  f << "o1,o2";
  if (!archive.entries().empty()) {
    for (std::size_t i = 1; i <= archive.entries().front().w.size(); ++i) {
      f << ",w_" << i;
    }
  }
  f << '\n';
  f.precision(17);
  for (const auto& e : archive.entries()) {
    f << e.o1 << ',' << e.o2;
    for (double v : e.w) f << ',' << v;
    f << '\n';
  }
}

void write_pareto_svg(const ParetoArchive& primary,
                      const ParetoArchive* reference,
                      const std::filesystem::path& path) {
  constexpr double kW = 640, kH = 480, kMargin = 60;
  double min1 = kInf, max1 = -kInf, min2 = kInf, max2 = -kInf;
  auto scan = [&](const ParetoArchive& a) {
    for (const auto& e : a.entries()) {
      min1 = std::min(min1, e.o1);
      max1 = std::max(max1, e.o1);
      min2 = std::min(min2, e.o2);
      max2 = std::max(max2, e.o2);
    }
  };
  scan(primary);
  if (reference) scan(*reference);
  if (!std::isfinite(min1)) {
    min1 = 0; max1 = 1; min2 = 0; max2 = 1;
  }
  if (max1 - min1 < 1e-12) max1 = min1 + 1.0;
  if (max2 - min2 < 1e-12) max2 = min2 + 1.0;

  auto sx = [&](double o1) {
    return kMargin + (o1 - min1) / (max1 - min1) * (kW - 2 * kMargin);
  };
  auto sy = [&](double o2) {
    return kH - kMargin - (o2 - min2) / (max2 - min2) * (kH - 2 * kMargin);
  };

  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path.string());
  f << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kW << "' height='"
    << kH << "'>\n";
  f << "<rect width='100%' height='100%' fill='white'/>\n";
  f << "<line x1='" << kMargin << "' y1='" << kH - kMargin << "' x2='"
    << kW - kMargin << "' y2='" << kH - kMargin << "' stroke='black'/>\n";
  f << "<line x1='" << kMargin << "' y1='" << kMargin << "' x2='" << kMargin
    << "' y2='" << kH - kMargin << "' stroke='black'/>\n";
  f << "<text x='" << kW / 2 << "' y='" << kH - 20
    << "' text-anchor='middle'>o1 (symmetry)</text>\n";
  f << "<text x='20' y='" << kH / 2
    << "' text-anchor='middle' transform='rotate(-90 20 " << kH / 2
    << ")'>o2 (separability)</text>\n";

  auto draw = [&](const ParetoArchive& a, const char* color) {
    for (const auto& e : a.entries()) {
      f << "<circle cx='" << sx(e.o1) << "' cy='" << sy(e.o2)
        << "' r='4' fill='" << color << "'/>\n";
    }
  };
  draw(primary, "#1f77b4");
  if (reference) draw(*reference, "#d62728");
  f << "<circle cx='" << kW - kMargin - 120 << "' cy='" << kMargin
    << "' r='4' fill='#1f77b4'/>"
    << "<text x='" << kW - kMargin - 110 << "' y='" << kMargin + 4
    << "'>nonlinear</text>\n";
  if (reference) {
    f << "<circle cx='" << kW - kMargin - 120 << "' cy='" << kMargin + 20
      << "' r='4' fill='#d62728'/>"
      << "<text x='" << kW - kMargin - 110 << "' y='" << kMargin + 24
      << "'>linear</text>\n";
  }
  f << "</svg>\n";
}

}  // namespace ecgpred
