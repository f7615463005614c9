#pragma once

// CSV and JSON artifact writers. Numbers are written in the shortest form
// that parses back to the same double.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "reic/errors.hpp"
#include "reic/harness/config.hpp"
#include "reic/optctrl.hpp"
#include "reic/pulse.hpp"

namespace reic::harness {

inline std::string format_double(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
      : out_(path) {
    if (!out_) throw ConfigError("cannot write " + path.string());
    row_strings(header);
  }

  void row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i)
      out_ << (i ? "," : "") << format_double(values[i]);
    out_ << '\n';
  }

 private:
  void row_strings(const std::vector<std::string>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << values[i];
    out_ << '\n';
  }

  std::ofstream out_;
};

inline void write_spectrum_csv(const std::filesystem::path& path, const std::vector<double>& grid,
                               const std::vector<double>& alpha) {
  CsvWriter w(path, {"freq_MHz", "alphaL"});
  for (std::size_t i = 0; i < grid.size(); ++i) w.row({grid[i], alpha[i]});
}

inline void write_waveform_csv(const std::filesystem::path& path, const Waveform& wave) {
  CsvWriter w(path, {"t_us", "I_MHz", "Q_MHz"});
  for (std::size_t k = 0; k < wave.size(); ++k)
    w.row({wave.time(k), wave.samples[k].real(), wave.samples[k].imag()});
}

inline void write_beat_csv(const std::filesystem::path& path, const BeatTrace& trace) {
  CsvWriter w(path, {"t_us", "envelope", "phase_rad"});
  for (std::size_t k = 0; k < trace.time.size(); ++k)
    w.row({trace.time[k], trace.envelope[k], trace.phase[k]});
}

inline void write_study_csv(const std::filesystem::path& path,
                            const std::vector<BandwidthPoint>& pts) {
  CsvWriter w(path, {"bandwidth_MHz", "eff_two_level", "eff_multi_level"});
  for (const auto& p : pts) w.row({p.bandwidth, p.two_level, p.multi_level});
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace reic::harness
