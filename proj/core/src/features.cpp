#include "ecgpred/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ecgpred/errors.hpp"

namespace ecgpred {

const std::array<std::string_view, kRawFeatureCount> kFeatureNames = {
    "qrs_duration_mean",  "qrs_duration_std",
    "qt_duration_mean",   "qt_duration_std",
    "pr_duration_mean",   "pr_duration_std",
    "peak_ratio_mean",    "peak_ratio_std",
    "power_7p5hz_mean",   "power_7p5hz_std",
    "power_10hz_mean",    "power_10hz_std",
    "power_12p5hz_mean",  "power_12p5hz_std",
    "power_15hz_mean",    "power_15hz_std",
    "rr_interval_mean",   "r_amplitude_drift",
    "average_energy",     "max_positive_peak",
    "max_negative_peak",  "peak_to_energy_ratio",
};

namespace {

constexpr std::array<double, 4> kBandHz = {7.5, 10.0, 12.5, 15.0};

// In-place iterative radix-2 FFT.
void fft(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const auto u = a[i + k];
        const auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

// Periodogram powers at the four band frequencies, nearest zero-padded bin.
std::array<double, 4> band_powers(const Vec& x, long begin, long end,
                                  double fs) {
  const std::size_t len = static_cast<std::size_t>(end - begin);
  std::size_t nfft = 1024;
  while (nfft < len) nfft <<= 1;
  std::vector<std::complex<double>> buf(nfft, 0.0);
  for (std::size_t i = 0; i < len; ++i) {
    buf[i] = x[static_cast<std::size_t>(begin) + i];
  }
  fft(buf);
  std::array<double, 4> out{};
  for (std::size_t b = 0; b < kBandHz.size(); ++b) {
    const auto k = static_cast<std::size_t>(
        std::lround(kBandHz[b] * static_cast<double>(nfft) / fs));
    const double mag = std::abs(buf[std::min(k, nfft / 2)]);
    out[b] = mag * mag / static_cast<double>(len);
  }
  return out;
}

// Values of the local maxima in [begin, end), largest first.
std::vector<double> local_maxima(const Vec& x, long begin, long end) {
  std::vector<double> peaks;
  for (long i = begin + 1; i + 1 < end; ++i) {
    const double v = x[static_cast<std::size_t>(i)];
    if (v > x[static_cast<std::size_t>(i - 1)] &&
        v >= x[static_cast<std::size_t>(i + 1)]) {
      peaks.push_back(v);
    }
  }
  std::sort(peaks.rbegin(), peaks.rend());
  return peaks;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

double record_mean_r_amplitude(const Vec& denoised,
                               const std::vector<CardiacCycle>& cycles) {
  if (cycles.empty()) return 0.0;
  double s = 0.0;
  for (const auto& c : cycles) s += denoised[static_cast<std::size_t>(c.fid.r)];
  return s / static_cast<double>(cycles.size());
}

RawFeatureVector extract_features(const Segment& segment, const Vec& denoised,
                                  double sampling_rate,
                                  double record_mean_r_amplitude) {
  const auto& cycles = segment.cycles;
  if (cycles.empty()) throw DataError("extract_features: empty segment");

  // Cycle-level features; nullopt where a fiducial is missing.
  constexpr int kCycleFeatures = 8;
  std::array<std::vector<double>, kCycleFeatures> values;
  std::array<long, kCycleFeatures> missing{};

  for (const auto& c : cycles) {
    auto dur = [&](long a, long b) -> std::optional<double> {
      if (a == kAbsent || b == kAbsent) return std::nullopt;
      return static_cast<double>(b - a) / sampling_rate;
    };
    const std::optional<double> qrs = dur(c.fid.q, c.fid.s);
    const std::optional<double> qt = dur(c.fid.q, c.fid.t);
    const std::optional<double> pr = dur(c.fid.p, c.fid.r);

    std::optional<double> ratio;
    const auto peaks = local_maxima(denoised, c.window_begin, c.window_end);
    if (peaks.size() >= 2 && peaks[1] > 1e-12) ratio = peaks[0] / peaks[1];

    const auto powers =
        band_powers(denoised, c.window_begin, c.window_end, sampling_rate);

    const std::array<std::optional<double>, kCycleFeatures> row = {
        qrs, qt, pr, ratio, powers[0], powers[1], powers[2], powers[3]};
    for (int f = 0; f < kCycleFeatures; ++f) {
      if (row[f]) {
        values[f].push_back(*row[f]);
      } else {
        ++missing[f];
      }
    }
  }

  RawFeatureVector out{};
  for (int f = 0; f < kCycleFeatures; ++f) {
    if (values[f].empty()) {
      throw DataError(std::string("extract_features: feature '") +
                      std::string(kFeatureNames[2 * f]) +
                      "' missing in every cycle of segment " +
                      std::to_string(segment.segment_index));
    }
    // Impute missing cycles with the mean of the present ones; the imputed
    // entries then contribute nothing to the spread.
    const double m = mean_of(values[f]);
    std::vector<double> filled = values[f];
    filled.resize(cycles.size(), m);
    out[static_cast<std::size_t>(2 * f)] = m;
    out[static_cast<std::size_t>(2 * f + 1)] = std_of(filled, mean_of(filled));
  }

  // Segment-level features.
  std::vector<double> rr;
  for (std::size_t i = 1; i < cycles.size(); ++i) {
    rr.push_back(static_cast<double>(cycles[i].fid.r - cycles[i - 1].fid.r) /
                 sampling_rate);
  }
  out[16] = rr.empty() ? 0.0 : mean_of(rr);

  double r_amp = 0.0;
  for (const auto& c : cycles) {
    r_amp += denoised[static_cast<std::size_t>(c.fid.r)];
  }
  r_amp /= static_cast<double>(cycles.size());
  out[17] = r_amp - record_mean_r_amplitude;

  const long begin = cycles.front().window_begin;
  const long end = cycles.back().window_end;
  double energy = 0.0;
  double max_pos = -std::numeric_limits<double>::infinity();
  double max_neg = std::numeric_limits<double>::infinity();
  for (long i = begin; i < end; ++i) {
    const double v = denoised[static_cast<std::size_t>(i)];
    energy += v * v;
    max_pos = std::max(max_pos, v);
    max_neg = std::min(max_neg, v);
  }
  energy /= static_cast<double>(end - begin);
  out[18] = energy;
  out[19] = max_pos;
  out[20] = max_neg;
  out[21] = energy > 1e-15 ? max_pos / energy : 0.0;

  for (double v : out) {
    if (!std::isfinite(v)) {
      throw NumericError("extract_features: non-finite feature value");
    }
  }
  return out;
}

void write_feature_csv(const FeatureTable& table,
                       const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path.string());
  f << "patient,segment_index,timestamp_s,label";
  for (const auto& name : kFeatureNames) f << ',' << name;
  f << '\n';
  f.precision(17);
  for (const auto& row : table.rows) {
    f << row.patient_id << ',' << row.segment_index << ',' << row.timestamp_s
      << ',' << wfdb::to_char(row.label);
    for (double v : row.features) f << ',' << v;
    f << '\n';
  }
  if (!f) throw DataError("write failed for " + path.string());
}

FeatureTable read_feature_csv(const std::filesystem::path& path, Split split) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(f, line)) {
    throw DataError("empty feature CSV: " + path.string());
  }
  {
    std::ostringstream expected;
    expected << "patient,segment_index,timestamp_s,label";
    for (const auto& name : kFeatureNames) expected << ',' << name;
    if (line != expected.str()) {
      throw DataError("feature CSV header mismatch in " + path.string());
    }
  }
  FeatureTable table;
  int line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string tok;
    FeatureRow row;
    row.split = split;
    try {
      std::getline(is, row.patient_id, ',');
      std::getline(is, tok, ',');
      row.segment_index = std::stoi(tok);
      std::getline(is, tok, ',');
      row.timestamp_s = std::stod(tok);
      std::getline(is, tok, ',');
      row.label = wfdb::aami_from_char(tok.at(0));
      for (int i = 0; i < kRawFeatureCount; ++i) {
        std::getline(is, tok, ',');
        row.features[static_cast<std::size_t>(i)] = std::stod(tok);
      }
    } catch (const std::exception&) {
      throw DataError(path.string() + " line " + std::to_string(line_no) +
                      ": malformed feature row");
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

namespace {

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
// eigenvalues descending with matching eigenvectors as rows.
void jacobi_eigen(std::vector<Vec> a, Vec& eigenvalues,
                  std::vector<Vec>& eigenvectors) {
  const std::size_t n = a.size();
  std::vector<Vec> v(n, Vec(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-28) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::fabs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return a[x][x] > a[y][y];
  });

  eigenvalues.resize(n);
  eigenvectors.assign(n, Vec(n));
  for (std::size_t r = 0; r < n; ++r) {
    eigenvalues[r] = a[order[r]][order[r]];
    for (std::size_t k = 0; k < n; ++k) eigenvectors[r][k] = v[k][order[r]];
  }
}

}  // namespace

PcaModel fit_pca(const FeatureTable& training, int target_dim) {
  const std::size_t n = training.rows.size();
  const std::size_t d = kRawFeatureCount;
  if (static_cast<int>(n) < target_dim + 1) {
    throw DataError("fit_pca: need at least " + std::to_string(target_dim + 1) +
                    " rows, got " + std::to_string(n));
  }
  bool has_ds1 = false, has_ds2 = false;
  for (const auto& row : training.rows) {
    has_ds1 |= row.split == Split::DS1;
    has_ds2 |= row.split == Split::DS2;
  }
  if (has_ds1 && has_ds2) {
    throw UsageError("fit_pca: refusing mixed DS1/DS2 training input");
  }

  PcaModel model;
  model.feature_mean.assign(d, 0.0);
  model.feature_scale.assign(d, 1.0);
  for (const auto& row : training.rows) {
    for (std::size_t i = 0; i < d; ++i) model.feature_mean[i] += row.features[i];
  }
  for (double& m : model.feature_mean) m /= static_cast<double>(n);
  Vec var(d, 0.0);
  for (const auto& row : training.rows) {
    for (std::size_t i = 0; i < d; ++i) {
      const double c = row.features[i] - model.feature_mean[i];
      var[i] += c * c;
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    const double sd = std::sqrt(var[i] / static_cast<double>(n - 1));
    model.feature_scale[i] = sd > 1e-12 ? sd : 1.0;
  }

  std::vector<Vec> cov(d, Vec(d, 0.0));
  for (const auto& row : training.rows) {
    Vec z(d);
    for (std::size_t i = 0; i < d; ++i) {
      z[i] = (row.features[i] - model.feature_mean[i]) / model.feature_scale[i];
    }
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j) cov[i][j] += z[i] * z[j];
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      cov[i][j] /= static_cast<double>(n - 1);
      cov[j][i] = cov[i][j];
    }

  Vec eigenvalues;
  std::vector<Vec> eigenvectors;
  jacobi_eigen(cov, eigenvalues, eigenvectors);

  const double lambda_max = std::max(eigenvalues.front(), 0.0);
  int rank = 0;
  for (double l : eigenvalues) {
    if (l > 1e-10 * std::max(lambda_max, 1e-30)) ++rank;
  }
  if (rank < target_dim) {
    throw NumericError("fit_pca: input rank " + std::to_string(rank) +
                       " below target dimension " + std::to_string(target_dim));
  }

  model.components.assign(eigenvectors.begin(),
                          eigenvectors.begin() + target_dim);
  model.explained_variance.assign(eigenvalues.begin(),
                                  eigenvalues.begin() + target_dim);
  // Deterministic sign: largest-magnitude loading is positive.
  for (Vec& comp : model.components) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < comp.size(); ++i) {
      if (std::fabs(comp[i]) > std::fabs(comp[arg])) arg = i;
    }
    if (comp[arg] < 0.0) {
      for (double& c : comp) c = -c;
    }
  }
  return model;
}

Vec apply_pca(const PcaModel& model, const RawFeatureVector& raw) {
  const std::size_t d = model.feature_mean.size();
  Vec z(d);
  for (std::size_t i = 0; i < d; ++i) {
    z[i] = (raw[i] - model.feature_mean[i]) / model.feature_scale[i];
  }
  Vec out(model.components.size());
  for (std::size_t r = 0; r < model.components.size(); ++r) {
    out[r] = dot(model.components[r], z);
  }
  return out;
}

void save_pca(const PcaModel& model, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["schema"] = "ecgpred.pca/1";
  j["feature_mean"] = model.feature_mean;
  j["feature_scale"] = model.feature_scale;
  j["components"] = model.components;
  j["explained_variance"] = model.explained_variance;
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path.string());
  f << j.dump(2) << '\n';
}

PcaModel load_pca(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open " + path.string());
  nlohmann::json j;
  f >> j;
  PcaModel model;
  model.feature_mean = j.at("feature_mean").get<Vec>();
  model.feature_scale = j.at("feature_scale").get<Vec>();
  model.components = j.at("components").get<std::vector<Vec>>();
  model.explained_variance = j.at("explained_variance").get<Vec>();
  return model;
}

}  // namespace ecgpred
