#pragma once

#include <string>
#include <vector>

#include "ecgpred/vecmath.hpp"
#include "ecgpred/wfdb.hpp"

namespace ecgpred {

// Sample indices of the five fiducial peaks; kAbsent where undetected.
inline constexpr long kAbsent = -1;

struct Fiducials {
  long p = kAbsent;
  long q = kAbsent;
  long r = kAbsent;
  long s = kAbsent;
  long t = kAbsent;
};

struct CardiacCycle {
  Fiducials fid;
  long window_begin = 0;  // [begin, end)
  long window_end = 0;
  wfdb::AamiClass beat_label = wfdb::AamiClass::Q;
};

enum class SegmentClass : std::uint8_t { N = 0, V, S, F, Discard };

SegmentClass segment_class_of(wfdb::AamiClass c);
char to_char(SegmentClass c);

struct Segment {
  std::vector<CardiacCycle> cycles;  // exactly s_w entries
  SegmentClass label = SegmentClass::Discard;
  std::string patient_id;
  int segment_index = 0;
};

struct SegmentationConfig {
  int s_w = 3;  // cycles per segment
  int n_s = 3;  // slide step, 1 <= n_s <= s_w
};

// Zero-phase band-pass FIR (~0.7-45 Hz at the given rate): kills baseline
// wander and DC, keeps the 5-15 Hz band that carries the QRS energy.
// Output length equals input length; edges use mirrored extension.
Vec denoise(const Vec& signal, double sampling_rate);

// Minimum input length accepted by denoise() for this rate.
std::size_t denoise_min_length(double sampling_rate);

struct DelineationConfig {
  double qs_window_ms = 60.0;    // Q/S search half-window around R
  double p_lo_ms = 200.0;        // P window: [R - p_lo, R - p_hi]
  double p_hi_ms = 60.0;
  double t_lo_ms = 80.0;         // T window: [R + t_lo, R + t_hi]
  double t_hi_ms = 400.0;
  double min_beat_gap_ms = 120.0;
};

struct DelineationResult {
  std::vector<CardiacCycle> cycles;
  long skipped_close_beats = 0;
};

// Anchored on annotation R peaks; P/Q/S/T located as windowed extrema,
// windows clipped at record edges and neighbouring beats.
DelineationResult delineate(const Vec& denoised, double sampling_rate,
                            const std::vector<wfdb::BeatAnnotation>& beats,
                            const DelineationConfig& cfg = {});

// Non-overlapping/sliding segmentation with integrated labels:
// all-N -> N, abnormal beats of one type -> that type, mixed abnormal
// types or any Q beat -> Discard. Short tail dropped.
std::vector<Segment> segment_cycles(const std::vector<CardiacCycle>& cycles,
                                    const SegmentationConfig& cfg,
                                    const std::string& patient_id);

}  // namespace ecgpred
