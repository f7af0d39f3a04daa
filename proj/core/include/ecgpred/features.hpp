#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ecgpred/signal_prep.hpp"
#include "ecgpred/vecmath.hpp"
#include "ecgpred/wfdb.hpp"

namespace ecgpred {

inline constexpr int kRawFeatureCount = 22;

// Canonical column order for CSV export/import.
extern const std::array<std::string_view, kRawFeatureCount> kFeatureNames;

using RawFeatureVector = std::array<double, kRawFeatureCount>;

enum class Split : std::uint8_t { Untagged = 0, DS1, DS2 };

struct FeatureRow {
  RawFeatureVector features{};
  wfdb::AamiClass label = wfdb::AamiClass::N;
  std::string patient_id;
  int segment_index = 0;
  double timestamp_s = 0.0;
  Split split = Split::Untagged;
};

struct FeatureTable {
  std::vector<FeatureRow> rows;
};

// Cycle-level entries (durations, peak ratio, band powers) are the mean and
// standard deviation over the segment's cycles; a fiducial missing in one
// cycle is imputed from the other cycles, missing in all cycles is an error.
RawFeatureVector extract_features(const Segment& segment, const Vec& denoised,
                                  double sampling_rate,
                                  double record_mean_r_amplitude);

// Mean amplitude at the R peaks of all cycles (the record-wide reference for
// the per-segment amplitude-drift feature).
double record_mean_r_amplitude(const Vec& denoised,
                               const std::vector<CardiacCycle>& cycles);

void write_feature_csv(const FeatureTable& table,
                       const std::filesystem::path& path);
FeatureTable read_feature_csv(const std::filesystem::path& path,
                              Split split = Split::Untagged);

struct PcaModel {
  Vec feature_mean;                 // 22
  Vec feature_scale;                // 22; 1.0 for constant features
  std::vector<Vec> components;      // output_dim rows of 22, orthonormal
  Vec explained_variance;           // non-increasing
  int input_dim() const { return static_cast<int>(feature_mean.size()); }
  int output_dim() const { return static_cast<int>(components.size()); }
};

// Top-eigenvector PCA of the z-scored training matrix. Refuses mixed DS1/DS2
// input so the test split can never leak into the model.
PcaModel fit_pca(const FeatureTable& training, int target_dim = 8);

Vec apply_pca(const PcaModel& model, const RawFeatureVector& raw);

void save_pca(const PcaModel& model, const std::filesystem::path& path);
PcaModel load_pca(const std::filesystem::path& path);

// One classified unit flowing through the alarm pipeline.
struct FeatureSample {
  Vec x;  // reduced-space vector
  wfdb::AamiClass true_label = wfdb::AamiClass::N;
  std::string patient_id;
  int time_index = 0;
  double timestamp_s = 0.0;
};

}  // namespace ecgpred
