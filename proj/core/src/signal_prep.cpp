#include "ecgpred/signal_prep.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ecgpred/errors.hpp"

namespace ecgpred {

namespace {

constexpr double kLowCutHz = 0.7;
constexpr double kHighCutHz = 45.0;

// Windowed-sinc low-pass, Blackman window, normalized to unit DC gain.
Vec lowpass_kernel(double cutoff_hz, double fs, std::size_t taps) {
  const std::size_t m = (taps - 1) / 2;
  Vec h(taps);
  const double fc = cutoff_hz / fs;
  for (std::size_t n = 0; n < taps; ++n) {
    const double k = static_cast<double>(n) - static_cast<double>(m);
    double v;
    if (k == 0.0) {
      v = 2.0 * fc;
    } else {
      v = std::sin(2.0 * std::numbers::pi * fc * k) / (std::numbers::pi * k);
    }
    const double w =
        0.42 -
        0.5 * std::cos(2.0 * std::numbers::pi * n / (taps - 1)) +
        0.08 * std::cos(4.0 * std::numbers::pi * n / (taps - 1));
    h[n] = v * w;
  }
  double sum = 0.0;
  for (double v : h) sum += v;
  for (double& v : h) v /= sum;
  return h;
}

std::size_t kernel_taps(double fs) {
  // Transition width ~0.85 Hz so the band edges separate 0.2 Hz drift from
  // the 0.7 Hz corner. Scales with the sampling rate.
  auto taps = static_cast<std::size_t>(std::lround(fs * 20.0 / 3.0));
  if (taps % 2 == 0) ++taps;
  return taps;
}

// Mirror extension: index -1 maps to 1, index n maps to n-2, etc.
inline double mirrored(const Vec& x, long i) {
  const long n = static_cast<long>(x.size());
  if (i < 0) i = -i;
  if (i >= n) i = 2 * n - 2 - i;
  return x[static_cast<std::size_t>(i)];
}

}  // namespace

std::size_t denoise_min_length(double sampling_rate) {
  return kernel_taps(sampling_rate);
}

Vec denoise(const Vec& signal, double sampling_rate) {
  if (sampling_rate <= 0.0) throw NumericError("denoise: sampling rate <= 0");
  const std::size_t taps = kernel_taps(sampling_rate);
  if (signal.size() < taps) {
    throw DataError("denoise: signal length " + std::to_string(signal.size()) +
                    " below filter support " + std::to_string(taps));
  }

  // Band-pass as difference of two unit-gain low-passes; DC gain is exactly
  // zero so constant offsets and slow wander are annihilated.
  Vec h = lowpass_kernel(kHighCutHz, sampling_rate, taps);
  const Vec hl = lowpass_kernel(kLowCutHz, sampling_rate, taps);
  for (std::size_t i = 0; i < taps; ++i) h[i] -= hl[i];

  const long m = static_cast<long>((taps - 1) / 2);
  const long n = static_cast<long>(signal.size());
  Vec out(signal.size());
  for (long i = 0; i < n; ++i) {
    double acc = 0.0;
    const long lo = i - m;
    if (lo >= 0 && i + m < n) {
      const double* x = signal.data() + lo;
      for (std::size_t k = 0; k < taps; ++k) acc += h[k] * x[k];
    } else {
      for (std::size_t k = 0; k < taps; ++k) {
        acc += h[k] * mirrored(signal, lo + static_cast<long>(k));
      }
    }
    out[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

SegmentClass segment_class_of(wfdb::AamiClass c) {
  switch (c) {
    case wfdb::AamiClass::N: return SegmentClass::N;
    case wfdb::AamiClass::V: return SegmentClass::V;
    case wfdb::AamiClass::S: return SegmentClass::S;
    case wfdb::AamiClass::F: return SegmentClass::F;
    case wfdb::AamiClass::Q: return SegmentClass::Discard;
  }
  return SegmentClass::Discard;
}

char to_char(SegmentClass c) {
  switch (c) {
    case SegmentClass::N: return 'N';
    case SegmentClass::V: return 'V';
    case SegmentClass::S: return 'S';
    case SegmentClass::F: return 'F';
    case SegmentClass::Discard: return 'D';
  }
  return '?';
}

namespace {

// Extremum index in [lo, hi] (inclusive, already clipped); kAbsent if empty.
template <typename Better>
long extremum(const Vec& x, long lo, long hi, Better better) {
  if (lo > hi) return kAbsent;
  long best = lo;
  for (long i = lo + 1; i <= hi; ++i) {
    if (better(x[static_cast<std::size_t>(i)],
               x[static_cast<std::size_t>(best)])) {
      best = i;
    }
  }
  return best;
}

}  // namespace

DelineationResult delineate(const Vec& denoised, double sampling_rate,
                            const std::vector<wfdb::BeatAnnotation>& beats,
                            const DelineationConfig& cfg) {
  if (sampling_rate <= 0.0) {
    throw NumericError("delineate: sampling rate <= 0");
  }
  const long n = static_cast<long>(denoised.size());
  auto ms_to_samples = [&](double ms) {
    return static_cast<long>(std::lround(ms * sampling_rate / 1000.0));
  };
  const long qs_w = ms_to_samples(cfg.qs_window_ms);
  const long p_lo = ms_to_samples(cfg.p_lo_ms);
  const long p_hi = ms_to_samples(cfg.p_hi_ms);
  const long t_lo = ms_to_samples(cfg.t_lo_ms);
  const long t_hi = ms_to_samples(cfg.t_hi_ms);
  const long min_gap = ms_to_samples(cfg.min_beat_gap_ms);

  DelineationResult res;
  res.cycles.reserve(beats.size());

  auto is_min = [](double a, double b) { return a < b; };
  auto is_max = [](double a, double b) { return a > b; };
  auto abs_max = [](double a, double b) { return std::fabs(a) > std::fabs(b); };

  long prev_r = -1;
  for (std::size_t bi = 0; bi < beats.size(); ++bi) {
    const long r = beats[bi].sample_index;
    if (r < 0 || r >= n) continue;
    if (prev_r >= 0 && r - prev_r < min_gap) {
      ++res.skipped_close_beats;
      continue;
    }
    const long next_r = (bi + 1 < beats.size() && beats[bi + 1].sample_index < n)
                            ? beats[bi + 1].sample_index
                            : -1;

    CardiacCycle cyc;
    cyc.beat_label = beats[bi].aami_class;
    cyc.fid.r = r;

    const long left_fence = (prev_r >= 0) ? prev_r + 1 : 0;
    const long right_fence = (next_r >= 0) ? next_r - 1 : n - 1;

    cyc.fid.q = extremum(denoised, std::max(left_fence, r - qs_w), r - 1, is_min);
    cyc.fid.s = extremum(denoised, r + 1, std::min(right_fence, r + qs_w), is_min);
    cyc.fid.p = extremum(denoised, std::max(left_fence, r - p_lo),
                         std::min(r - 1, r - p_hi), is_max);
    cyc.fid.t = extremum(denoised, std::max(r + 1, r + t_lo),
                         std::min(right_fence, r + t_hi), abs_max);

    // Half-second default half-window when there is no neighbouring beat.
    const long half = static_cast<long>(std::lround(0.5 * sampling_rate));
    cyc.window_begin = (prev_r >= 0) ? (prev_r + r) / 2 : std::max<long>(0, r - half);
    cyc.window_end = (next_r >= 0) ? (r + next_r) / 2 : std::min(n, r + half);
    if (cyc.window_end <= cyc.window_begin) cyc.window_end = cyc.window_begin + 1;

    res.cycles.push_back(cyc);
    prev_r = r;
  }
  return res;
}

std::vector<Segment> segment_cycles(const std::vector<CardiacCycle>& cycles,
                                    const SegmentationConfig& cfg,
                                    const std::string& patient_id) {
  if (cfg.s_w < 1 || cfg.n_s < 1 || cfg.n_s > cfg.s_w) {
    throw UsageError("segmentation: need 1 <= n_s <= s_w");
  }
  std::vector<Segment> out;
  const long n = static_cast<long>(cycles.size());
  int index = 0;
  for (long start = 0; start + cfg.s_w <= n; start += cfg.n_s) {
    Segment seg;
    seg.patient_id = patient_id;
    seg.segment_index = index++;
    seg.cycles.assign(cycles.begin() + start, cycles.begin() + start + cfg.s_w);

    bool has_q = false;
    bool has_n = false;
    SegmentClass abnormal = SegmentClass::Discard;
    bool mixed = false;
    for (const auto& c : seg.cycles) {
      if (c.beat_label == wfdb::AamiClass::Q) {
        has_q = true;
        break;
      }
      if (c.beat_label == wfdb::AamiClass::N) {
        has_n = true;
        continue;
      }
      const SegmentClass sc = segment_class_of(c.beat_label);
      if (abnormal == SegmentClass::Discard) {
        abnormal = sc;
      } else if (abnormal != sc) {
        mixed = true;
      }
    }
    if (has_q || mixed) {
      seg.label = SegmentClass::Discard;
    } else if (abnormal != SegmentClass::Discard) {
      seg.label = abnormal;
    } else if (has_n) {
      seg.label = SegmentClass::N;
    } else {
      seg.label = SegmentClass::Discard;  // empty window, unreachable
    }
    out.push_back(std::move(seg));
  }
  return out;
}

}  // namespace ecgpred
