#pragma once

// Complex baseband waveforms and the pulse families built from them.
//
// A waveform sample s = |s| e^{i phi} is a Rabi frequency in MHz. Positive
// phase slope means the light sits above the carrier: a sample sequence
// s_k = e^{2 pi i f t_k} drives transitions at carrier + f. Samples are held
// constant over [t_k, t_k + 1/sample_rate).

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "reic/errors.hpp"
#include "reic/spectral.hpp"
#include "reic/types.hpp"

namespace reic {

struct Waveform {
  std::vector<Complex> samples;
  double sample_rate = 200.0;  // MHz
  double carrier = 0.0;        // MHz relative to the lab reference
  double t_start = 0.0;        // µs, time of the first sample

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  double dt() const { return 1.0 / sample_rate; }
  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
  double t_end() const { return t_start + duration(); }
  double time(std::size_t k) const { return t_start + static_cast<double>(k) / sample_rate; }

  /// Sample holding at absolute time t; zero outside the waveform.
  Complex at(double t) const {
    if (samples.empty()) return {};
    const double x = (t - t_start) * sample_rate;
    if (x < 0.0) return {};
    const auto k = static_cast<std::size_t>(std::floor(x + 1e-9));
    return k < samples.size() ? samples[k] : Complex{};
  }

  double peak_amplitude() const {
    double m = 0.0;
    for (const auto& s : samples) m = std::max(m, std::abs(s));
    return m;
  }

  /// Integral of |s|^2 dt, MHz^2 µs.
  double energy() const {
    double e = 0.0;
    for (const auto& s : samples) e += std::norm(s);
    return e * dt();
  }

  Waveform scaled(Complex factor) const {
    Waveform w = *this;
    for (auto& s : w.samples) s *= factor;
    return w;
  }
};

/// Pointwise sum on a shared time grid. Both waveforms must have the same
/// rate, carrier and start time.
inline Waveform operator+(const Waveform& a, const Waveform& b) {
  if (a.sample_rate != b.sample_rate || a.carrier != b.carrier || a.t_start != b.t_start ||
      a.size() != b.size())
    throw ConfigError("waveforms differ in grid or carrier");
  Waveform out = a;
  for (std::size_t k = 0; k < out.size(); ++k) out.samples[k] += b.samples[k];
  return out;
}

/// Appends b after a; b is re-timed to start where a ends.
inline Waveform concatenate(const Waveform& a, const Waveform& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (a.sample_rate != b.sample_rate || a.carrier != b.carrier)
    throw ConfigError("cannot concatenate waveforms with different rate or carrier");
  Waveform out = a;
  out.samples.insert(out.samples.end(), b.samples.begin(), b.samples.end());
  return out;
}

/// Shifts the reference carrier without changing the physical field: the
/// samples pick up the compensating phase ramp.
inline Waveform with_carrier(const Waveform& w, double carrier) {
  Waveform out = w;
  out.carrier = carrier;
  const double shift = w.carrier - carrier;
  for (std::size_t k = 0; k < out.size(); ++k)
    out.samples[k] *= std::polar(1.0, kTwoPi * shift * w.time(k));
  return out;
}

// ---------------------------------------------------------------------------
// Spectra

struct Spectrum {
  std::vector<double> frequency;  // MHz offset from the carrier, ascending
  std::vector<double> power;      // |S(f)|^2, arbitrary units
};

/// Power spectrum via zero-padded FFT, `oversample` times the waveform length.
inline Spectrum power_spectrum(const Waveform& w, std::size_t oversample = 8) {
  Spectrum out;
  if (w.empty()) return out;
  const std::size_t n = w.size() * std::max<std::size_t>(oversample, 1);
  std::vector<Complex> padded(n);
  std::copy(w.samples.begin(), w.samples.end(), padded.begin());
  const auto f = spectral::fft(padded);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return spectral::bin_frequency(a, n, w.sample_rate) < spectral::bin_frequency(b, n, w.sample_rate);
  });
  out.frequency.reserve(n);
  out.power.reserve(n);
  for (auto k : order) {
    out.frequency.push_back(spectral::bin_frequency(k, n, w.sample_rate));
    out.power.push_back(std::norm(f[k]));
  }
  return out;
}

/// Full width at half maximum of the power spectrum around its highest bin.
inline double spectral_fwhm(const Waveform& w, std::size_t oversample = 16) {
  const auto s = power_spectrum(w, oversample);
  if (s.power.empty()) return 0.0;
  const auto peak = static_cast<std::size_t>(
      std::max_element(s.power.begin(), s.power.end()) - s.power.begin());
  const double half = 0.5 * s.power[peak];
  std::size_t l = peak;
  while (l > 0 && s.power[l] > half) --l;
  std::size_t r = peak;
  while (r + 1 < s.power.size() && s.power[r] > half) ++r;
  auto cross = [&](std::size_t a, std::size_t b) {
    return s.frequency[a] +
           (half - s.power[a]) * (s.frequency[b] - s.frequency[a]) / (s.power[b] - s.power[a]);
  };
  return cross(r - 1, r) - cross(l, l + 1);
}

/// Band [lo, hi] (MHz from the carrier) holding all but `tail` of the
/// spectral energy, split equally between the two sides. `oversample` = 1
/// treats the record as periodic, which is what a transform of exactly the
/// record sees.
inline Interval occupied_band(const Waveform& w, double tail = 1e-4, std::size_t oversample = 4) {
  const auto s = power_spectrum(w, oversample);
  if (s.power.empty()) return {0.0, 0.0};
  const double total = std::accumulate(s.power.begin(), s.power.end(), 0.0);
  if (total <= 0.0) return {0.0, 0.0};
  double acc = 0.0;
  double lo = s.frequency.front();
  for (std::size_t k = 0; k < s.power.size(); ++k) {
    acc += s.power[k];
    if (acc > 0.5 * tail * total) {
      lo = s.frequency[k];
      break;
    }
  }
  acc = 0.0;
  double hi = s.frequency.back();
  for (std::size_t k = s.power.size(); k-- > 0;) {
    acc += s.power[k];
    if (acc > 0.5 * tail * total) {
      hi = s.frequency[k];
      break;
    }
  }
  return {lo, hi};
}

/// Full width of the occupied band measured symmetrically about the carrier.
inline double bandwidth(const Waveform& w, double tail = 1e-4, std::size_t oversample = 4) {
  const auto band = occupied_band(w, tail, oversample);
  return 2.0 * std::max(std::abs(band.lo), std::abs(band.hi));
}

// ---------------------------------------------------------------------------
// Hyperbolic-secant chirped pulse

struct SechypParams {
  double peak_rabi = 1.0;        // MHz
  double width = 1.22;           // 1/µs
  double chirp_factor = 4.5;     // dimensionless
  double center_time = 8.2;      // µs
  double center_frequency = 0.0; // MHz, lab frame
  double duration = 16.4;        // µs
  double sample_rate = 200.0;    // MHz
  /// Carrier of the produced waveform; NaN selects center_frequency.
  double carrier = std::numeric_limits<double>::quiet_NaN();
  double t_start = 0.0;          // µs

  void validate() const {
    if (!(peak_rabi > 0.0)) throw ConfigError("sechyp peak_rabi must be positive");
    if (!(width > 0.0)) throw ConfigError("sechyp width must be positive");
    if (!(duration > 0.0)) throw ConfigError("sechyp duration must be positive");
    if (chirp_factor < 0.0) throw ConfigError("sechyp chirp_factor must be non-negative");
    if (!(sample_rate > 0.0)) throw ConfigError("sample_rate must be positive");
  }
  double resolved_carrier() const { return std::isnan(carrier) ? center_frequency : carrier; }
  /// Full frequency sweep, MHz.
  double chirp_span() const { return chirp_factor * width / kPi; }
};

inline double sechyp_envelope(const SechypParams& p, double t) {
  return p.peak_rabi / std::cosh(p.width * (t - p.center_time));
}

/// Instantaneous frequency, lab frame.
inline double sechyp_frequency(const SechypParams& p, double t) {
  return p.center_frequency + p.chirp_factor * p.width / kTwoPi * std::tanh(p.width * (t - p.center_time));
}

/// Phase relative to the carrier; its slope over 2 pi is the frequency
/// offset from the carrier.
inline double sechyp_phase(const SechypParams& p, double t) {
  const double x = p.width * (t - p.center_time);
  // log cosh without overflow
  const double ax = std::abs(x);
  const double log_cosh = ax + std::log1p(std::exp(-2.0 * ax)) - std::log(2.0);
  return kTwoPi * (p.center_frequency - p.resolved_carrier()) * (t - p.center_time) +
         p.chirp_factor * log_cosh;
}

inline Waveform sechyp(const SechypParams& p) {
  p.validate();
  const double lead = p.center_time - p.t_start;
  const double tail = p.t_start + p.duration - p.center_time;
  const double need = 10.0 / p.width;
  if (lead < need * (1.0 - 1e-3) || tail < need * (1.0 - 1e-3))
    throw TruncationError("sechyp window must extend 10/width = " + std::to_string(need) +
                          " µs on each side of the centre");
  const double max_offset = std::abs(p.center_frequency - p.resolved_carrier()) + 0.5 * p.chirp_span();
  if (p.sample_rate < 10.0 * max_offset)
    throw AliasingError("sample rate below 10x the largest frequency offset");

  Waveform w;
  w.sample_rate = p.sample_rate;
  w.carrier = p.resolved_carrier();
  w.t_start = p.t_start;
  const auto n = static_cast<std::size_t>(std::llround(p.duration * p.sample_rate));
  w.samples.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = w.time(k);
    w.samples[k] = std::polar(sechyp_envelope(p, t), sechyp_phase(p, t));
  }
  return w;
}

/// Two copies of `base` at carrier -/+ splitting/2. The upper component is
/// multiplied by e^{i relative_phase}. Time phases use absolute time so
/// successive pulses on the same grid stay phase-coherent.
inline Waveform two_color(const Waveform& base, double splitting = 10.2, double relative_phase = 0.0) {
  if (base.sample_rate < 10.0 * splitting)
    throw AliasingError("sample rate below 10x the two-colour splitting");
  Waveform out = base;
  const Complex rel = std::polar(1.0, relative_phase);
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double t = base.time(k);
    const Complex lower = std::polar(1.0, -kPi * splitting * t);
    const Complex upper = std::polar(1.0, kPi * splitting * t) * rel;
    out.samples[k] = base.samples[k] * (lower + upper);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Acousto-optic modulator constraints

/// Monotone piecewise-linear map from requested to delivered amplitude,
/// both normalized to the full-scale Rabi frequency.
class AmplitudeCalibration {
 public:
  AmplitudeCalibration() : AmplitudeCalibration({{0.0, 0.0}, {1.0, 1.0}}) {}
  explicit AmplitudeCalibration(std::vector<std::pair<double, double>> points)
      : points_(std::move(points)) {
    if (points_.size() < 2) throw ConfigError("calibration needs at least two points");
    std::sort(points_.begin(), points_.end());
    for (std::size_t i = 1; i < points_.size(); ++i)
      if (!(points_[i].first > points_[i - 1].first) || points_[i].second < points_[i - 1].second)
        throw ConfigError("amplitude calibration must be monotone increasing");
  }

  static AmplitudeCalibration identity() { return {}; }

  /// Saturating response (1 - e^{-k x}) / k sampled on `n` points.
  static AmplitudeCalibration compressive(double k = 1.0, std::size_t n = 201) {
    if (!(k > 0.0)) throw ConfigError("compression strength must be positive");
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = static_cast<double>(i) / static_cast<double>(n - 1);
      pts.emplace_back(x, (1.0 - std::exp(-k * x)) / k);
    }
    return AmplitudeCalibration(std::move(pts));
  }

  double operator()(double x) const {
    x = std::clamp(x, points_.front().first, points_.back().first);
    auto it = std::upper_bound(points_.begin(), points_.end(), x,
                               [](double v, const auto& p) { return v < p.first; });
    if (it == points_.end()) return points_.back().second;
    if (it == points_.begin()) return it->second;
    const auto& [x1, y1] = *it;
    const auto& [x0, y0] = *(it - 1);
    return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
  }

  const std::vector<std::pair<double, double>>& points() const { return points_; }

 private:
  std::vector<std::pair<double, double>> points_;
};

struct AomModel {
  double center = 0.0;    // MHz, lab frame
  double range = 200.0;   // MHz, total deflection range
  AmplitudeCalibration amplitude_calibration;
  double dynamic_range = 6.0;  // orders of magnitude
  double full_scale_rabi = 3.0;  // MHz delivered at full drive

  void validate() const {
    if (!(range > 0.0)) throw ConfigError("AOM range must be positive");
    if (!(dynamic_range > 0.0)) throw ConfigError("AOM dynamic range must be positive");
    if (!(full_scale_rabi > 0.0)) throw ConfigError("AOM full-scale Rabi frequency must be positive");
  }
};

/// Passes the waveform through the modulator: amplitudes clipped to full
/// scale and mapped through the calibration, values below the dynamic-range
/// floor dropped. Sample phases are kept exactly.
inline Waveform aom_apply(const Waveform& wave, const AomModel& model) {
  model.validate();
  if (!wave.empty()) {
    const auto band = occupied_band(wave);
    const double lo = wave.carrier + band.lo;
    const double hi = wave.carrier + band.hi;
    const double half = 0.5 * model.range;
    if (lo < model.center - half || hi > model.center + half)
      throw OutOfBand("waveform content [" + std::to_string(lo) + ", " + std::to_string(hi) +
                      "] MHz exceeds the deflection range");
  }
  Waveform out = wave;
  const double floor = std::pow(10.0, -model.dynamic_range);
  for (auto& s : out.samples) {
    const double a = std::abs(s);
    if (a == 0.0) continue;
    const double x = std::min(a / model.full_scale_rabi, 1.0);
    const double y = model.amplitude_calibration(x);
    s = y < floor ? Complex{} : s * (y * model.full_scale_rabi / a);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Heterodyne beat analysis

struct BeatTrace {
  std::vector<double> time;      // µs
  std::vector<double> envelope;  // MHz
  /// Unwrapped phase, NaN where the envelope is below the reporting floor.
  std::vector<double> phase;
};

/// Beat note between the waveform and a reference tone at
/// carrier + reference_frequency, sampled at the waveform rate.
inline std::vector<double> heterodyne_intensity(const Waveform& wave, double reference_frequency,
                                                double reference_amplitude) {
  std::vector<double> out(wave.size());
  for (std::size_t k = 0; k < wave.size(); ++k) {
    const Complex ref = std::polar(reference_amplitude, kTwoPi * reference_frequency * wave.time(k));
    out[k] = std::norm(ref + wave.samples[k]);
  }
  return out;
}

/// Recovers envelope and phase from the beat signal alone by isolating the
/// sideband that carries the waveform and shifting it back to baseband.
inline BeatTrace beat_characterize(const Waveform& wave, double reference_frequency,
                                   double phase_floor = 0.01) {
  BeatTrace out;
  if (wave.empty()) return out;
  // The beat is analysed over exactly the record, so the record's periodic
  // spectrum is the one that has to clear the reference.
  const double bw = bandwidth(wave, 1e-4, 1);
  const double f_ref = std::abs(reference_frequency);
  if (f_ref < 3.0 * bw)
    throw SidebandOverlap("reference offset " + std::to_string(f_ref) +
                          " MHz is below 3x the waveform bandwidth " + std::to_string(bw));
  if (f_ref + 0.5 * bw > 0.5 * wave.sample_rate)
    throw SidebandOverlap("beat sideband aliases at this sample rate");

  const double amp = std::max(wave.peak_amplitude(), 1e-300);
  const auto intensity = heterodyne_intensity(wave, reference_frequency, amp);
  std::vector<Complex> signal(intensity.begin(), intensity.end());
  auto spec = spectral::fft(signal);
  // The product conj(ref) * wave sits at -reference_frequency.
  const double centre = -reference_frequency;
  const double half_window = 0.5 * f_ref;
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double f = spectral::bin_frequency(k, spec.size(), wave.sample_rate);
    if (std::abs(f - centre) > half_window) spec[k] = 0.0;
  }
  const auto side = spectral::ifft(spec);

  const std::size_t n = wave.size();
  out.time.resize(n);
  out.envelope.resize(n);
  out.phase.assign(n, std::numeric_limits<double>::quiet_NaN());
  std::vector<Complex> recovered(n);
  double peak = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    out.time[k] = wave.time(k);
    recovered[k] = side[k] * std::polar(1.0 / amp, kTwoPi * reference_frequency * wave.time(k));
    out.envelope[k] = std::abs(recovered[k]);
    peak = std::max(peak, out.envelope[k]);
  }
  // Unwrap across each contiguous run above the floor.
  bool in_run = false;
  double previous = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (out.envelope[k] <= phase_floor * peak) {
      in_run = false;
      continue;
    }
    double ph = std::arg(recovered[k]);
    if (in_run) ph = previous + std::remainder(ph - previous, kTwoPi);
    out.phase[k] = ph;
    previous = ph;
    in_run = true;
  }
  return out;
}

struct BeatError {
  double envelope_rms = 0.0;  // relative to the peak envelope
  double phase_rms = 0.0;     // rad, over samples where a phase was reported
};

/// Compares a recovered beat trace with the waveform it came from.
inline BeatError beat_round_trip_error(const Waveform& wave, const BeatTrace& trace) {
  BeatError e;
  const double peak = wave.peak_amplitude();
  if (wave.empty() || peak == 0.0) return e;
  double env = 0.0;
  double ph = 0.0;
  std::size_t counted = 0;
  for (std::size_t k = 0; k < wave.size(); ++k) {
    const double d = (trace.envelope[k] - std::abs(wave.samples[k])) / peak;
    env += d * d;
    if (std::isnan(trace.phase[k])) continue;
    const double dp = std::remainder(trace.phase[k] - std::arg(wave.samples[k]), kTwoPi);
    ph += dp * dp;
    ++counted;
  }
  e.envelope_rms = std::sqrt(env / static_cast<double>(wave.size()));
  e.phase_rms = counted ? std::sqrt(ph / static_cast<double>(counted)) : 0.0;
  return e;
}

}  // namespace reic
