#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "ecgpred/vecmath.hpp"
#include "ecgpred/wfdb.hpp"

namespace ecgpred {

// A labeled point cloud with its centroid. The centroid is stored rather
// than implied so callers may pin it independently of the members.
struct Cluster {
  wfdb::AamiClass label = wfdb::AamiClass::N;
  Vec centroid;
  std::vector<Vec> points;

  static Cluster from_points(wfdb::AamiClass label, std::vector<Vec> points);
};

// Basis functions psi_l for the coefficient-weighted feature expansion
// z_l = w_l * psi_l(x).
class BasisSet {
 public:
  enum class Kind { Linear, Polynomial2 };

  static BasisSet linear(int dim);       // {x_1..x_d}
  static BasisSet polynomial2(int dim);  // {1, x_i, x_i x_j (i<j), x_i^2}

  Kind kind() const { return kind_; }
  int input_dim() const { return dim_; }
  int size() const { return size_; }

  Vec psi(const Vec& x) const;
  Vec expand(const Vec& w, const Vec& x) const;

  // Equal weight on the linear terms, zero elsewhere, unit norm. Serves as
  // the identity-like reference candidate.
  Vec uniform_linear_coefficients() const;

 private:
  BasisSet(Kind kind, int dim, int size) : kind_(kind), dim_(dim), size_(size) {}
  Kind kind_;
  int dim_;
  int size_;
};

// o1: reciprocal of the minimum pairwise cosine distance between the
// centroid-connecting vectors c_N - c_X. +inf when two directions coincide.
double objective_symmetry(const Vec& normal_centroid,
                          const std::vector<Vec>& abnormal_centroids);

// o2: within-cluster scatter over summed pairwise between-centroid scatter
// (inverse Fisher ratio). +inf when all centroids coincide.
double objective_separability(const std::vector<Cluster>& clusters);

struct ObjectivePair {
  double o1 = 0.0;
  double o2 = 0.0;
};

bool dominates(const ObjectivePair& a, const ObjectivePair& b);

struct ArchiveEntry {
  Vec w;
  double o1 = 0.0;
  double o2 = 0.0;
};

class ParetoArchive {
 public:
  explicit ParetoArchive(int capacity = 100);

  // Rejects non-finite or dominated candidates, drops entries the candidate
  // dominates, prunes by crowding distance at capacity.
  bool insert(ArchiveEntry entry);

  const std::vector<ArchiveEntry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  bool mutually_non_dominated() const;
  std::vector<double> crowding_distances() const;

 private:
  void prune();
  int capacity_;
  std::vector<ArchiveEntry> entries_;  // sorted by (o1, o2)
};

struct MopsoConfig {
  int swarm_size = 50;
  int iterations = 100;
  double inertia = 0.7;
  double cognitive = 1.5;
  double social = 1.5;
  int archive_capacity = 100;
  std::uint64_t seed = 1;  // reproducibility is part of the contract
  int subsample_limit = 2000;
};

using IterationObserver = std::function<void(int iteration, const ParetoArchive&)>;

// Multi-objective PSO over unit-norm coefficient vectors. Particle 0 starts
// at the uniform-linear reference, the rest at seeded random positions; the
// random stream is partitioned per particle.
ParetoArchive mopso(const Cluster& normal,
                    const std::vector<Cluster>& abnormal,
                    const BasisSet& basis, const MopsoConfig& config,
                    const IterationObserver& observer = {});

ObjectivePair evaluate_candidate(const Vec& w, const Cluster& normal,
                                 const std::vector<Cluster>& abnormal,
                                 const BasisSet& basis);

// Knee of the front: the member farthest from the chord through the two
// endpoint members (objectives normalized to their ranges).
std::size_t knee_point(const ParetoArchive& archive);
std::size_t pick_operating_point(const ParetoArchive& archive,
                                 std::optional<double> beta);

void write_archive_csv(const ParetoArchive& archive,
                       const std::filesystem::path& path);
void write_pareto_svg(const ParetoArchive& primary,
                      const ParetoArchive* reference,
                      const std::filesystem::path& path);

}  // namespace ecgpred
