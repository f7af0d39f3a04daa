#include "ecgpred/wfdb.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ecgpred/errors.hpp"

namespace ecgpred::wfdb {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw DataError("cannot open file: " + p.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(f),
                                   std::istreambuf_iterator<char>());
}

[[noreturn]] void header_error(int line_no, const std::string& msg) {
  throw DataError("header parse error at line " + std::to_string(line_no) +
                  ": " + msg);
}

// MIT annotation type codes that are beat annotations, with their symbols.
const std::unordered_map<int, char>& beat_code_symbols() {
  static const std::unordered_map<int, char> table = {
      {1, 'N'},  {2, 'L'},  {3, 'R'},  {4, 'a'}, {5, 'V'},  {6, 'F'},
      {7, 'J'},  {8, 'A'},  {9, 'S'},  {10, 'E'}, {11, 'j'}, {12, '/'},
      {13, 'Q'}, {25, 'B'}, {34, 'e'}, {35, 'n'}, {38, 'f'}, {41, 'r'},
  };
  return table;
}

// Non-beat annotation codes (rhythm changes, comments, noise, waveform
// boundary markers). Skipped while still advancing the sample clock.
bool is_non_beat_code(int code) {
  switch (code) {
    case 14: case 15: case 16: case 17: case 18: case 19: case 20:
    case 21: case 22: case 23: case 24: case 26: case 27: case 28:
    case 29: case 30: case 31: case 32: case 33: case 36: case 37:
    case 39: case 40:
      return true;
    default:
      return false;
  }
}

}  // namespace

char to_char(AamiClass c) {
  switch (c) {
    case AamiClass::N: return 'N';
    case AamiClass::V: return 'V';
    case AamiClass::S: return 'S';
    case AamiClass::F: return 'F';
    case AamiClass::Q: return 'Q';
  }
  return '?';
}

AamiClass aami_from_char(char c) {
  switch (c) {
    case 'N': return AamiClass::N;
    case 'V': return AamiClass::V;
    case 'S': return AamiClass::S;
    case 'F': return AamiClass::F;
    case 'Q': return AamiClass::Q;
  }
  throw DataError(std::string("unknown AAMI class character: ") + c);
}

SymbolMap SymbolMap::standard() {
  SymbolMap m;
  for (char c : {'N', 'L', 'R', 'e', 'j'}) m.map_[c] = AamiClass::N;
  for (char c : {'V', 'E'}) m.map_[c] = AamiClass::V;
  for (char c : {'A', 'a', 'J', 'S'}) m.map_[c] = AamiClass::S;
  m.map_['F'] = AamiClass::F;
  for (char c : {'/', 'f', 'Q'}) m.map_[c] = AamiClass::Q;
  return m;
}

AamiClass SymbolMap::classify(char symbol) const {
  auto it = map_.find(symbol);
  return it == map_.end() ? AamiClass::Q : it->second;
}

bool SymbolMap::known(char symbol) const { return map_.count(symbol) > 0; }

void SymbolMap::set(char symbol, AamiClass cls) { map_[symbol] = cls; }

AamiClass map_symbol_to_aami(char symbol) {
  static const SymbolMap std_map = SymbolMap::standard();
  return std_map.classify(symbol);
}

RecordHeader parse_header(const std::string& text) {
  RecordHeader h;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  bool record_line_seen = false;
  while (std::getline(is, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;

    auto tok = split_ws(line);
    if (!record_line_seen) {
      // record line: name num_signals sampling_rate [counter] num_samples ...
      if (tok.size() < 2) header_error(line_no, "record line too short");
      if (tok[0].find('/') != std::string::npos) {
        header_error(line_no, "multi-segment records are not supported");
      }
      h.record_name = tok[0];
      try {
        h.num_signals = std::stoi(tok[1]);
        if (tok.size() > 2) h.sampling_rate = std::stod(tok[2]);
        if (tok.size() > 3) h.num_samples = std::stol(tok[3]);
      } catch (const std::exception&) {
        header_error(line_no, "malformed numeric field in record line");
      }
      if (h.num_signals < 1) header_error(line_no, "num_signals must be >= 1");
      if (h.sampling_rate <= 0.0) {
        header_error(line_no, "sampling rate must be positive");
      }
      record_line_seen = true;
      continue;
    }

    if (static_cast<int>(h.signals.size()) == h.num_signals) break;

    // signal line: file format gain[(baseline)][/units] adc_res adc_zero ...
    if (tok.size() < 2) header_error(line_no, "signal line too short");
    SignalSpec spec;
    spec.file_name = tok[0];

    const std::string& fmt = tok[1];
    std::size_t pos = 0;
    int fmt_code = 0;
    try {
      fmt_code = std::stoi(fmt, &pos);
    } catch (const std::exception&) {
      header_error(line_no, "malformed format code '" + fmt + "'");
    }
    if (pos != fmt.size() && fmt[pos] != 'x' && fmt[pos] != ':' &&
        fmt[pos] != '+') {
      header_error(line_no, "malformed format code '" + fmt + "'");
    }
    if (fmt_code != 212) {
      throw DataError("unsupported WFDB signal format " +
                      std::to_string(fmt_code) + " at line " +
                      std::to_string(line_no) + " (only format 212)");
    }
    spec.format = fmt_code;

    double adc_zero = 0.0;
    bool have_explicit_baseline = false;
    if (tok.size() > 2) {
      std::string g = tok[2];
      if (auto slash = g.find('/'); slash != std::string::npos) {
        g = g.substr(0, slash);
      }
      if (auto paren = g.find('('); paren != std::string::npos) {
        auto close = g.find(')', paren);
        if (close == std::string::npos) {
          header_error(line_no, "unterminated baseline field");
        }
        try {
          spec.baseline = std::stod(g.substr(paren + 1, close - paren - 1));
        } catch (const std::exception&) {
          header_error(line_no, "malformed baseline field");
        }
        have_explicit_baseline = true;
        g = g.substr(0, paren);
      }
      try {
        spec.gain = std::stod(g);
      } catch (const std::exception&) {
        header_error(line_no, "malformed gain field '" + tok[2] + "'");
      }
      if (spec.gain == 0.0) spec.gain = 200.0;  // WFDB convention for "0"
    }
    if (tok.size() > 4) {
      try {
        adc_zero = std::stod(tok[4]);
      } catch (const std::exception&) {
        header_error(line_no, "malformed adc_zero field");
      }
    }
    if (!have_explicit_baseline) spec.baseline = adc_zero;
    if (tok.size() > 8) {
      std::string desc = tok[8];
      for (std::size_t i = 9; i < tok.size(); ++i) desc += " " + tok[i];
      spec.channel_name = desc;
    }
    h.signals.push_back(std::move(spec));
  }

  if (!record_line_seen) throw DataError("header parse error: empty header");
  if (static_cast<int>(h.signals.size()) != h.num_signals) {
    throw DataError("header declares " + std::to_string(h.num_signals) +
                    " signals but " + std::to_string(h.signals.size()) +
                    " signal lines present");
  }
  return h;
}

std::pair<std::vector<int>, std::vector<int>> decode_format212(
    std::span<const std::uint8_t> bytes, std::size_t samples_per_channel) {
  const std::size_t total = 2 * samples_per_channel;
  const std::size_t needed = (3 * total + 1) / 2;
  if (bytes.size() < needed) {
    throw DataError("format-212 data truncated: need " +
                    std::to_string(needed) + " bytes, have " +
                    std::to_string(bytes.size()) + " (offset " +
                    std::to_string(bytes.size()) + ")");
  }
  std::vector<int> a(samples_per_channel), b(samples_per_channel);
  for (std::size_t i = 0; i < samples_per_channel; ++i) {
    const std::size_t o = 3 * i;
    int s1 = bytes[o] | ((bytes[o + 1] & 0x0F) << 8);
    int s2 = bytes[o + 2] | ((bytes[o + 1] & 0xF0) << 4);
    if (s1 & 0x800) s1 -= 4096;
    if (s2 & 0x800) s2 -= 4096;
    a[i] = s1;
    b[i] = s2;
  }
  return {std::move(a), std::move(b)};
}

AnnotationStream parse_annotations(std::span<const std::uint8_t> bytes,
                                   const SymbolMap& symbols) {
  AnnotationStream out;
  const auto& beat_syms = beat_code_symbols();
  long time = 0;
  long last_beat_time = -1;
  std::size_t i = 0;
  while (i + 2 <= bytes.size()) {
    const int word = bytes[i] | (bytes[i + 1] << 8);
    i += 2;
    const int code = word >> 10;
    const long interval = word & 0x3FF;

    if (code == 0) {
      if (interval == 0) break;  // end of stream
      ++out.unknown_codes;
      time += interval;
      continue;
    }
    if (code == 59) {  // SKIP: 4-byte interval, high word first
      if (interval == 0) {
        if (i + 4 > bytes.size()) {
          throw DataError("annotation stream truncated inside SKIP at byte " +
                          std::to_string(i));
        }
        const long hi = bytes[i] | (bytes[i + 1] << 8);
        const long lo = bytes[i + 2] | (bytes[i + 3] << 8);
        i += 4;
        long skip = (hi << 16) | lo;
        if (skip & 0x80000000L) skip -= (1L << 32);
        time += skip;
        if (time < 0) {
          throw DataError("annotation offset overflow (negative time after "
                          "SKIP) at byte " + std::to_string(i));
        }
      } else {
        time += interval;
      }
      continue;
    }
    if (code == 60 || code == 61 || code == 62) continue;  // NUM/SUB/CHN
    if (code == 63) {  // AUX: interval counts payload bytes, padded to even
      std::size_t len = static_cast<std::size_t>(interval);
      len += len & 1;
      if (i + len > bytes.size()) {
        throw DataError("annotation stream truncated inside AUX at byte " +
                        std::to_string(i));
      }
      i += len;
      continue;
    }

    time += interval;
    if (auto it = beat_syms.find(code); it != beat_syms.end()) {
      if (time <= last_beat_time) {
        throw DataError("beat annotation indices not strictly increasing at "
                        "sample " + std::to_string(time));
      }
      last_beat_time = time;
      BeatAnnotation ann;
      ann.sample_index = time;
      ann.symbol = it->second;
      ann.aami_class = symbols.classify(ann.symbol);
      if (!symbols.known(ann.symbol)) ++out.unknown_symbols;
      out.beats.push_back(ann);
    } else if (is_non_beat_code(code)) {
      ++out.non_beat_skipped;
    } else {
      ++out.unknown_codes;
    }
  }
  return out;
}

int select_channel(const RecordHeader& header, const std::string& preferred,
                   bool* used_fallback) {
  for (int i = 0; i < static_cast<int>(header.signals.size()); ++i) {
    if (header.signals[i].channel_name == preferred) {
      if (used_fallback) *used_fallback = false;
      return i;
    }
  }
  if (used_fallback) *used_fallback = true;
  return 0;
}

namespace {

Record load_record_wfdb(const std::filesystem::path& dir,
                        const std::string& name, const SymbolMap& symbols) {
  Record rec;
  {
    std::ifstream f(dir / (name + ".hea"));
    std::stringstream ss;
    ss << f.rdbuf();
    rec.header = parse_header(ss.str());
  }
  const RecordHeader& h = rec.header;
  if (h.num_signals != 1 && h.num_signals != 2) {
    throw DataError("record " + name + ": only 1- or 2-signal records are "
                    "supported, got " + std::to_string(h.num_signals));
  }
  if (h.num_samples <= 0) {
    throw DataError("record " + name + ": header lacks a sample count");
  }

  const auto dat = read_file_bytes(dir / h.signals[0].file_name);
  const std::size_t n = static_cast<std::size_t>(h.num_samples);
  if (h.num_signals == 2) {
    auto [a, b] = decode_format212(dat, n);
    rec.signals.resize(2);
    rec.signals[0].resize(n);
    rec.signals[1].resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      rec.signals[0][i] =
          (a[i] - h.signals[0].baseline) / h.signals[0].gain;
      rec.signals[1][i] =
          (b[i] - h.signals[1].baseline) / h.signals[1].gain;
    }
  } else {
    // Single channel: successive samples share each byte triple.
    auto [a, b] = decode_format212(dat, (n + 1) / 2);
    rec.signals.resize(1);
    rec.signals[0].resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const int adc = (i % 2 == 0) ? a[i / 2] : b[i / 2];
      rec.signals[0][i] = (adc - h.signals[0].baseline) / h.signals[0].gain;
    }
  }

  const auto atr = read_file_bytes(dir / (name + ".atr"));
  AnnotationStream anns = parse_annotations(atr, symbols);
  rec.non_beat_skipped = anns.non_beat_skipped;
  rec.unknown_symbols = anns.unknown_symbols + anns.unknown_codes;
  rec.annotations = std::move(anns.beats);
  return rec;
}

Record load_record_csv(const std::filesystem::path& dir,
                       const std::string& name, const SymbolMap& symbols,
                       double sampling_rate) {
  Record rec;
  rec.header.record_name = name;
  rec.header.num_signals = 1;
  rec.header.sampling_rate = sampling_rate;
  SignalSpec spec;
  spec.file_name = name + ".signal.csv";
  spec.channel_name = "CSV";
  rec.header.signals.push_back(spec);

  {
    std::ifstream f(dir / (name + ".signal.csv"));
    if (!f) throw DataError("cannot open " + name + ".signal.csv");
    std::string line;
    std::getline(f, line);  // header row
    std::vector<double> samples;
    long expected_index = 0;
    int line_no = 1;
    while (std::getline(f, line)) {
      ++line_no;
      line = trim(line);
      if (line.empty()) continue;
      auto comma = line.find(',');
      if (comma == std::string::npos) {
        throw DataError(name + ".signal.csv line " + std::to_string(line_no) +
                        ": expected sample_index,amplitude_mV");
      }
      const long idx = std::stol(line.substr(0, comma));
      if (idx != expected_index) {
        throw DataError(name + ".signal.csv line " + std::to_string(line_no) +
                        ": non-contiguous sample index");
      }
      ++expected_index;
      samples.push_back(std::stod(line.substr(comma + 1)));
    }
    rec.header.num_samples = static_cast<long>(samples.size());
    rec.signals.push_back(std::move(samples));
  }

  {
    std::ifstream f(dir / (name + ".annot.csv"));
    if (!f) throw DataError("cannot open " + name + ".annot.csv");
    std::string line;
    std::getline(f, line);  // header row
    long last = -1;
    int line_no = 1;
    while (std::getline(f, line)) {
      ++line_no;
      line = trim(line);
      if (line.empty()) continue;
      auto comma = line.find(',');
      if (comma == std::string::npos || comma + 1 >= line.size()) {
        throw DataError(name + ".annot.csv line " + std::to_string(line_no) +
                        ": expected sample_index,symbol");
      }
      BeatAnnotation ann;
      ann.sample_index = std::stol(line.substr(0, comma));
      ann.symbol = line[comma + 1];
      ann.aami_class = symbols.classify(ann.symbol);
      if (!symbols.known(ann.symbol)) ++rec.unknown_symbols;
      if (ann.sample_index <= last) {
        throw DataError(name + ".annot.csv line " + std::to_string(line_no) +
                        ": sample indices must be strictly increasing");
      }
      last = ann.sample_index;
      rec.annotations.push_back(ann);
    }
  }
  return rec;
}

}  // namespace

Record load_record(const std::filesystem::path& dir, const std::string& name,
                   const SymbolMap& symbols, double csv_sampling_rate) {
  Record rec;
  if (std::filesystem::exists(dir / (name + ".hea"))) {
    rec = load_record_wfdb(dir, name, symbols);
  } else if (std::filesystem::exists(dir / (name + ".signal.csv"))) {
    rec = load_record_csv(dir, name, symbols, csv_sampling_rate);
  } else {
    throw DataError("record " + name + " not found in " + dir.string() +
                    " (no .hea or .signal.csv)");
  }

  for (const auto& sig : rec.signals) {
    if (static_cast<long>(sig.size()) != rec.header.num_samples) {
      throw DataError("record " + name + ": signal length " +
                      std::to_string(sig.size()) + " != header sample count " +
                      std::to_string(rec.header.num_samples));
    }
  }
  for (const auto& ann : rec.annotations) {
    if (ann.sample_index >= rec.header.num_samples || ann.sample_index < 0) {
      throw DataError("record " + name + ": annotation index " +
                      std::to_string(ann.sample_index) + " out of range");
    }
    if (ann.aami_class == AamiClass::Q) ++rec.q_discards;
  }
  return rec;
}

}  // namespace ecgpred::wfdb
