#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ecgpred::wfdb {

// AAMI beat classes. Q collects unclassified and paced beats and is
// discarded downstream.
enum class AamiClass : std::uint8_t { N = 0, V, S, F, Q };

char to_char(AamiClass c);
AamiClass aami_from_char(char c);

struct SignalSpec {
  std::string file_name;
  int format = 212;
  double gain = 200.0;     // ADC units per mV
  double baseline = 0.0;   // ADC units at 0 mV
  std::string channel_name;
};

struct RecordHeader {
  std::string record_name;
  int num_signals = 0;
  double sampling_rate = 0.0;  // Hz
  long num_samples = 0;        // per channel
  std::vector<SignalSpec> signals;
};

struct BeatAnnotation {
  long sample_index = 0;
  char symbol = '?';
  AamiClass aami_class = AamiClass::Q;
};

struct Record {
  RecordHeader header;
  // Per-channel amplitudes in mV: (adc - baseline) / gain.
  std::vector<std::vector<double>> signals;
  std::vector<BeatAnnotation> annotations;
  long q_discards = 0;        // beats mapped to class Q
  long unknown_symbols = 0;   // beat symbols missing from the map
  long non_beat_skipped = 0;  // rhythm changes, comments, noise markers
};

// Beat symbol -> AAMI class. Data-driven so corrections are a config edit,
// not a code change.
class SymbolMap {
 public:
  static SymbolMap standard();
  AamiClass classify(char symbol) const;  // unknown symbols -> Q
  bool known(char symbol) const;
  void set(char symbol, AamiClass cls);

 private:
  std::unordered_map<char, AamiClass> map_;
};

// Standard grouping: {N,L,R,e,j}->N  {V,E}->V  {A,a,J,S}->S  {F}->F
// {/,f,Q}->Q. Anything else -> Q.
AamiClass map_symbol_to_aami(char symbol);

RecordHeader parse_header(const std::string& text);

// WFDB format 212: two 12-bit two's-complement samples packed in 3 bytes.
//   byte0            = low 8 bits of s1
//   byte1 low nibble = high 4 bits of s1
//   byte1 high nibble= high 4 bits of s2
//   byte2            = low 8 bits of s2
std::pair<std::vector<int>, std::vector<int>> decode_format212(
    std::span<const std::uint8_t> bytes, std::size_t samples_per_channel);

struct AnnotationStream {
  std::vector<BeatAnnotation> beats;
  long non_beat_skipped = 0;
  long unknown_codes = 0;
};

// MIT annotation format: 16-bit little-endian words, 6-bit type code plus
// 10-bit sample interval, with SKIP/NUM/SUB/CHN/AUX pseudo-annotations.
AnnotationStream parse_annotations(std::span<const std::uint8_t> bytes,
                                   const SymbolMap& symbols);

// Loads <name>.hea/.dat/.atr from dir, or falls back to the CSV pair
// <name>.signal.csv + <name>.annot.csv (columns: sample_index,amplitude_mV
// and sample_index,symbol) for synthetic fixtures.
Record load_record(const std::filesystem::path& dir, const std::string& name,
                   const SymbolMap& symbols, double csv_sampling_rate = 360.0);

// Index of the preferred channel; falls back to channel 0. *used_fallback is
// set when the preferred name is absent.
int select_channel(const RecordHeader& header, const std::string& preferred,
                   bool* used_fallback = nullptr);

}  // namespace ecgpred::wfdb
