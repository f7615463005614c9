#pragma once

// Dark-state single-qubit gates on the ensemble qubit and state tomography.
//
// A gate is two consecutive two-colour sechyp transfers |B> -> |e> -> |B>
// through one excited level. The second transfer carries an extra global
// phase, which sets the phase the bright state picks up relative to the
// dark state. Qubit operators are read in the interaction picture, so the
// gate is fixed up to a Z rotation that is tracked in software (virtual Z).

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "reic/crystal.hpp"
#include "reic/dynamics.hpp"
#include "reic/errors.hpp"
#include "reic/parallel.hpp"
#include "reic/pulse.hpp"
#include "reic/types.hpp"

namespace reic {

inline double wrap_angle(double a) {
  a = std::fmod(a, kTwoPi);
  return a < 0.0 ? a + kTwoPi : a;
}

struct GateSpec {
  double theta = 0.0;  // rotation angle enclosed by the two transfers
  double phi = 0.0;    // two-colour phase relation

  GateSpec normalized() const { return {wrap_angle(theta), wrap_angle(phi)}; }
};

using QubitState = Qubit;  // 2x2 density matrix over (|0>, |1>)

/// {bright, dark} for two-colour phase relation phi.
inline std::pair<QubitVector, QubitVector> bright_dark_states(double phi) {
  const double r = 1.0 / std::sqrt(2.0);
  const Complex ph = std::polar(1.0, -phi);
  QubitVector b;
  b << r, -r * ph;
  QubitVector d;
  d << r, r * ph;
  return {b, d};
}

inline Qubit u_dark_matrix(const GateSpec& g) {
  const double c = std::cos(0.5 * g.theta);
  const double s = std::sin(0.5 * g.theta);
  const Complex i(0.0, 1.0);
  Qubit u;
  u << c, i * std::polar(1.0, g.phi) * s, i * std::polar(1.0, -g.phi) * s, c;
  return std::polar(1.0, 0.5 * g.theta) * u;
}

/// diag(1, e^{i angle}).
inline Qubit z_rotation(double angle) {
  Qubit z = Qubit::Identity();
  z(1, 1) = std::polar(1.0, angle);
  return z;
}

/// Average gate fidelity of a possibly leaky 2x2 block `m` against unitary
/// `target`: (|Tr(V^dag M)|^2 + Tr(M^dag M)) / 6.
inline double process_fidelity(const Qubit& target, const Qubit& m) {
  const double overlap = std::norm((target.adjoint() * m).trace());
  const double norm = (m.adjoint() * m).trace().real();
  return (overlap + norm) / 6.0;
}

/// Splits a qubit operator into Z(alpha) * u_dark(theta, phi). Exact for
/// operators of that form with theta in [0, pi].
struct DarkDecomposition {
  double alpha = 0.0;
  GateSpec spec;
};

inline DarkDecomposition decompose_dark(const Qubit& q) {
  DarkDecomposition d;
  d.alpha = std::arg(q(1, 1) / q(0, 0));
  const Qubit r = z_rotation(-d.alpha) * q;
  d.spec.theta = 2.0 * std::atan2(std::abs(r(0, 1)), std::abs(r(0, 0)));
  d.spec.phi = wrap_angle(std::arg(r(0, 1) / (Complex(0.0, 1.0) * r(0, 0))));
  return d;
}

// ---------------------------------------------------------------------------
// Pulse synthesis

struct GateCalibration {
  double theta_offset = 0.0;
  double phi_offset = 0.0;
  /// Z rotation the calibrated gate applies on top of u_dark.
  double frame_shift = 0.0;
};

struct DarkGateParams {
  /// Shape of each transfer. peak_rabi is the bright-state Rabi frequency;
  /// center_time and t_start are taken relative to the gate start.
  SechypParams transfer{};
  Excited excited = Excited::e2;
  /// |0>->|e1> line of the class the gate is tuned for, MHz.
  double reference_detuning = 0.0;
  bool light_shift_compensation = true;
  GateCalibration calibration{};
  /// Bright-state Rabi frequency must exceed this multiple of the
  /// adiabatic bound sqrt(mu) beta / (2 pi).
  double adiabaticity_margin = 1.0;
};

/// Frequencies of the two addressed lines, |0>->e and |1>->e.
inline std::pair<double, double> qubit_lines(const LevelScheme& scheme, const DarkGateParams& p) {
  const int e = static_cast<int>(p.excited);
  return {transition_frequency(scheme, p.reference_detuning, 0, e),
          transition_frequency(scheme, p.reference_detuning, 1, e)};
}

/// Light shift of ground level g per unit squared component amplitude,
/// summed over every non-addressed (component, excited level) pair, MHz/MHz^2.
inline double light_shift_coefficient(const LevelScheme& scheme, const DarkGateParams& p, int g) {
  const auto [f0, f1] = qubit_lines(scheme, p);
  const std::array<double, 2> comp{f0, f1};
  const int addressed = static_cast<int>(p.excited);
  double s = 0.0;
  for (int k = 0; k < 2; ++k)
    for (int e = 0; e < kExcitedLevels; ++e) {
      if (k == g && e == addressed) continue;
      const double delta = comp[static_cast<std::size_t>(k)] -
                           transition_frequency(scheme, p.reference_detuning, g, e);
      const double c = scheme.coupling(g, e);
      s += c * c / (4.0 * delta);
    }
  return s;
}

struct DarkGate {
  GateSpec spec;
  Waveform waveform;
  /// Physical action is about Z(frame_shift) * u_dark(spec).
  double frame_shift = 0.0;
  double duration() const { return waveform.duration(); }
};

inline void check_adiabaticity(const LevelScheme& scheme, const DarkGateParams& p) {
  const int e = static_cast<int>(p.excited);
  const double c0 = scheme.coupling(0, e);
  const double c1 = scheme.coupling(1, e);
  const double bright = p.transfer.peak_rabi * std::sqrt(0.5 * (c0 * c0 + c1 * c1));
  const double bound = std::sqrt(p.transfer.chirp_factor) * p.transfer.width / kTwoPi;
  if (bright < p.adiabaticity_margin * bound)
    throw AdiabaticityViolation("bright-state Rabi frequency " + std::to_string(bright) +
                                " MHz is below the adiabatic bound " + std::to_string(bound));
}

/// Two-colour waveform for `spec`, starting at absolute time t_start.
/// `calibrated` = false synthesizes the nominal phases.
inline DarkGate dark_state_gate(const GateSpec& spec, const DarkGateParams& p,
                                const LevelScheme& scheme = {}, double t_start = 0.0,
                                bool calibrated = true) {
  p.transfer.validate();
  check_adiabaticity(scheme, p);
  const auto [f0, f1] = qubit_lines(scheme, p);
  const double split = f1 - f0;
  const double carrier = 0.5 * (f0 + f1);

  const double theta = spec.theta - (calibrated ? p.calibration.theta_offset : 0.0);
  const double phi = spec.phi - (calibrated ? p.calibration.phi_offset : 0.0);
  const double relative = kPi - phi;        // upper component vs lower
  const double second_phase = kPi - theta;  // second transfer vs first

  SechypParams shape = p.transfer;
  shape.center_frequency = carrier;
  shape.carrier = carrier;
  shape.peak_rabi = p.transfer.peak_rabi / std::sqrt(2.0);
  const double t_len = p.transfer.duration;

  Waveform out;
  out.sample_rate = shape.sample_rate;
  out.carrier = carrier;
  out.t_start = t_start;
  if (shape.sample_rate < 10.0 * split)
    throw AliasingError("sample rate below 10x the two-colour splitting");

  const double ds = p.light_shift_compensation ? light_shift_coefficient(scheme, p, 1) -
                                                     light_shift_coefficient(scheme, p, 0)
                                               : 0.0;
  double accumulated = 0.0;  // ∫ |component|^2 dt
  for (int half = 0; half < 2; ++half) {
    SechypParams h = shape;
    h.t_start = t_start + half * t_len;
    h.center_time = h.t_start + (p.transfer.center_time - p.transfer.t_start);
    const Waveform base = sechyp(h);
    const Complex global = half == 0 ? Complex(1.0) : std::polar(1.0, second_phase);
    for (std::size_t k = 0; k < base.size(); ++k) {
      const double t = base.time(k);
      const Complex a = base.samples[k] * global;
      const double shift_phase = kTwoPi * ds * accumulated;
      const Complex lower = std::polar(1.0, -kPi * split * t);
      const Complex upper = std::polar(1.0, kPi * split * t + relative - shift_phase);
      out.samples.push_back(a * (lower + upper));
      accumulated += std::norm(a) * base.dt();
    }
  }
  return {spec, std::move(out), calibrated ? p.calibration.frame_shift : 0.0};
}

/// Qubit block of the decoherence-free evolution of class `detuning`.
inline Qubit simulate_qubit_operator(const Waveform& w, const LevelScheme& scheme, double detuning,
                                     double rabi_scale = 1.0) {
  DriveHamiltonian h{scheme, detuning, {w}, std::numeric_limits<double>::quiet_NaN(), rabi_scale};
  const Operator6 u = evolution_operator(h, w.duration(), w.t_start);
  return u.topLeftCorner<2, 2>();
}

/// Fits theta/phi offsets and the frame shift at the (pi/2, 0) gate.
inline GateCalibration calibrate_dark_gate(const DarkGateParams& p, const LevelScheme& scheme = {}) {
  const GateSpec probe{kPi / 2.0, 0.0};
  const DarkGate nominal = dark_state_gate(probe, p, scheme, 0.0, false);
  const Qubit q = simulate_qubit_operator(nominal.waveform, scheme, p.reference_detuning);
  const DarkDecomposition d = decompose_dark(q);
  GateCalibration c;
  c.theta_offset = d.spec.theta - probe.theta;
  c.phi_offset = std::remainder(d.spec.phi - probe.phi, kTwoPi);
  c.frame_shift = d.alpha;
  return c;
}

inline DarkGateParams calibrated(DarkGateParams p, const LevelScheme& scheme = {}) {
  p.calibration = calibrate_dark_gate(p, scheme);
  return p;
}

/// Qubit action of a synthesized gate with the tracked frame removed.
inline Qubit gate_in_frame(const DarkGate& g, const LevelScheme& scheme, double detuning) {
  return z_rotation(-g.frame_shift) * simulate_qubit_operator(g.waveform, scheme, detuning);
}

// ---------------------------------------------------------------------------
// Sequences with a tracked frame

/// Builds consecutive gates, adjusting each phi for the Z rotation
/// accumulated by the previous ones.
class GateSequence {
 public:
  GateSequence(DarkGateParams params, LevelScheme scheme, double t_start = 0.0)
      : params_(std::move(params)), scheme_(std::move(scheme)), t_(t_start) {}

  void append(const GateSpec& logical) {
    const GateSpec physical{logical.theta, logical.phi - frame_};
    DarkGate g = dark_state_gate(physical, params_, scheme_, t_);
    frame_ += g.frame_shift;
    t_ += g.duration();
    waveforms_.push_back(std::move(g.waveform));
  }

  double frame() const { return frame_; }
  double end_time() const { return t_; }
  const std::vector<Waveform>& waveforms() const { return waveforms_; }
  Waveform combined() const {
    Waveform w;
    for (const auto& x : waveforms_) w = concatenate(w, x);
    return w;
  }

 private:
  DarkGateParams params_;
  LevelScheme scheme_;
  double t_ = 0.0;
  double frame_ = 0.0;
  std::vector<Waveform> waveforms_;
};

// ---------------------------------------------------------------------------
// Tomography

enum class Axis { x, y, z };

struct TomographyRecord {
  double tr_x = 0.0;
  double tr_y = 0.0;
  double tr_z = 0.0;
  double norm() const { return std::sqrt(tr_x * tr_x + tr_y * tr_y + tr_z * tr_z); }
};

inline Qubit pauli(Axis a) {
  Qubit m;
  switch (a) {
    case Axis::x: m << 0, 1, 1, 0; break;
    case Axis::y: m << 0, Complex(0, -1), Complex(0, 1), 0; break;
    case Axis::z: m << 1, 0, 0, -1; break;
  }
  return m;
}

inline double ideal_projection(const QubitState& rho, Axis a) {
  return (pauli(a) * rho).trace().real();
}

inline TomographyRecord ideal_record(const QubitState& rho) {
  return {ideal_projection(rho, Axis::x), ideal_projection(rho, Axis::y),
          ideal_projection(rho, Axis::z)};
}

/// (I + x X + y Y + z Z) / 2, with the Bloch vector pulled back onto the
/// unit ball if noise pushed it outside.
inline QubitState reconstruct_rho(TomographyRecord r) {
  const double n = r.norm();
  if (n > 1.0) {
    r.tr_x /= n;
    r.tr_y /= n;
    r.tr_z /= n;
  }
  return 0.5 * (Qubit::Identity() + r.tr_x * pauli(Axis::x) + r.tr_y * pauli(Axis::y) +
                r.tr_z * pauli(Axis::z));
}

inline double fidelity(const QubitState& rho, const QubitVector& psi) {
  return (psi.adjoint() * rho * psi)(0, 0).real();
}

inline double gate_fidelity(double f_tot) {
  if (f_tot < 0.0 || f_tot > 1.0) throw ConfigError("total fidelity must lie in [0, 1]");
  return std::sqrt(f_tot);
}

inline double trace_distance(const QubitState& a, const QubitState& b) {
  Eigen::SelfAdjointEigenSolver<Qubit> es(a - b);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

inline QubitState pure_qubit(const QubitVector& psi) { return psi * psi.adjoint(); }

/// The six axis states and the gates preparing them from |0>.
struct AxisState {
  std::string label;
  QubitVector psi;
  std::optional<GateSpec> prep;
};

inline std::vector<AxisState> axis_states() {
  const double r = 1.0 / std::sqrt(2.0);
  const Complex i(0.0, 1.0);
  auto v = [](Complex a, Complex b) {
    QubitVector q;
    q << a, b;
    return q;
  };
  return {
      {"+z", v(1, 0), std::nullopt},
      {"-z", v(0, 1), GateSpec{kPi, 0.0}},
      {"+x", v(r, r), GateSpec{kPi / 2, kPi / 2}},
      {"-x", v(r, -r), GateSpec{kPi / 2, 3 * kPi / 2}},
      {"+y", v(r, r * i), GateSpec{kPi / 2, 0.0}},
      {"-y", v(r, -r * i), GateSpec{kPi / 2, kPi}},
  };
}

/// Rotation that maps the +1 eigenstate of `a` onto |0>.
inline std::optional<GateSpec> measurement_rotation(Axis a) {
  switch (a) {
    case Axis::x: return GateSpec{kPi / 2, 3 * kPi / 2};
    case Axis::y: return GateSpec{kPi / 2, kPi};
    case Axis::z: return std::nullopt;
  }
  return std::nullopt;
}

/// Absorption readout of an ensemble qubit: integrated optical depth of two
/// |0> lines against two |1> lines, each divided by its line strength.
struct AbsorptionReadout {
  std::array<Excited, 2> zero_lines{Excited::e2, Excited::e3};
  std::array<Excited, 2> one_lines{Excited::e1, Excited::e2};
  /// Half-width of each integration window beyond the peak edge, MHz.
  double margin = 0.05;
  double resolution = 0.0005;
};

inline double line_area(const Ensemble& ens, double center, double half_width, double resolution) {
  const auto grid = spaced_grid(center - half_width, center + half_width, resolution);
  const auto a = absorption_spectrum(ens, grid);
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < a.size(); ++k) s += 0.5 * (a[k] + a[k + 1]) * resolution;
  return s;
}

/// <Z> estimated from the spectrum of the qubit classes.
inline double absorption_z(const Ensemble& ens, const AbsorptionReadout& r) {
  if (ens.classes.empty()) return 0.0;
  double lo = ens.classes.front().detuning;
  double hi = lo;
  double width = 0.0;
  for (const auto& c : ens.classes) {
    lo = std::min(lo, c.detuning);
    hi = std::max(hi, c.detuning);
    width = std::max(width, c.width);
  }
  const double center = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo) + 0.5 * width + r.margin;
  double a0 = 0.0;
  double a1 = 0.0;
  for (auto e : r.zero_lines) {
    const int x = static_cast<int>(e);
    a0 += line_area(ens, transition_frequency(ens.scheme, center, 0, x), half, r.resolution) /
          ens.scheme.relative_strengths(0, x);
  }
  for (auto e : r.one_lines) {
    const int x = static_cast<int>(e);
    a1 += line_area(ens, transition_frequency(ens.scheme, center, 1, x), half, r.resolution) /
          ens.scheme.relative_strengths(1, x);
  }
  return a0 + a1 > 0.0 ? (a0 - a1) / (a0 + a1) : 0.0;
}

/// Resamples the classes of a prepared ensemble onto `count` finer classes
/// spanning `width` around `center`. Each fine class inherits the state of
/// the coarse class whose bin contains it. Gates are detuning sensitive, so
/// the qubit peak has to be much narrower than a practical pumping grid.
inline Ensemble qubit_peak(const Ensemble& prepared, double center, double width = 0.003,
                           int count = 5) {
  if (count < 1 || !(width > 0.0)) throw ConfigError("qubit peak needs count >= 1 and width > 0");
  if (width < prepared.scheme.homogeneous_linewidth())
    throw ConfigError("qubit peak narrower than the homogeneous linewidth");
  Ensemble out;
  out.scheme = prepared.scheme;
  out.window = {center - 0.5 * width, center + 0.5 * width};
  out.alpha_scale = 1.0;
  out.reference_alpha_l = prepared.reference_alpha_l;
  const double bin = width / count;
  for (int k = 0; k < count; ++k) {
    const double d = center - 0.5 * width + (k + 0.5) * bin;
    const IonClass* host = nullptr;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : prepared.classes) {
      const double dist = std::abs(c.detuning - d);
      if (dist < best) {
        best = dist;
        host = &c;
      }
    }
    if (host == nullptr) throw NoPit("no class to seed the qubit peak");
    out.classes.push_back({d, 1.0, bin, host->state});
  }
  return out;
}

struct TomographySetup {
  DarkGateParams gate;  // calibrated
  DecoherenceParams decoherence = DecoherenceParams{};
  bool coherent = false;  // ignore decoherence and use exact propagators
  AbsorptionReadout readout{};
  IntegratorOptions integrator{};
  double rabi_scatter = 0.0;
  std::uint64_t seed = 0;
};

/// Runs a gate sequence on every class of the qubit ensemble.
inline Ensemble run_sequence(Ensemble qubit, const GateSequence& seq, const TomographySetup& s,
                             double t0) {
  if (seq.waveforms().empty()) return qubit;
  const Waveform w = seq.combined();
  EnsembleDrive drive;
  drive.waveforms = {w};
  drive.rabi_scatter = s.rabi_scatter;
  drive.seed = s.seed;
  drive.method = s.coherent ? Propagator::unitary : Propagator::master_equation;
  drive.integrator = s.integrator;
  return ensemble_propagate(std::move(qubit), drive, s.decoherence, w.duration(), t0);
}

/// Embeds a qubit density matrix into the ground block of every class.
inline Ensemble with_qubit_state(Ensemble ens, const QubitState& rho) {
  for (auto& c : ens.classes) {
    c.state = DensityMatrix::Zero();
    c.state.topLeftCorner<2, 2>() = rho;
  }
  return ens;
}

/// Projection of the ensemble's qubit state on `axis`. `simulate` applies
/// the measurement rotation with the full dynamics and reads the spectrum;
/// otherwise the ideal Tr(axis rho) of the mean state is returned.
inline double measure_projection(const Ensemble& prepared, Axis axis, bool simulate,
                                 const TomographySetup& s, double t0 = 0.0, double frame = 0.0) {
  if (!simulate) {
    const DensityMatrix m = mean_state(prepared);
    Qubit q = m.topLeftCorner<2, 2>();
    const double tr = q.trace().real();
    if (tr > 0.0) q /= tr;
    return ideal_projection(q, axis);
  }
  GateSequence seq(s.gate, prepared.scheme, t0);
  // Start the sequence in the frame left by the preparation.
  if (auto rot = measurement_rotation(axis)) {
    seq.append({rot->theta, rot->phi + frame});
  }
  return absorption_z(run_sequence(prepared, seq, s, t0), s.readout);
}

/// Convenience overload for a bare qubit state placed on a class ensemble.
inline double measure_projection(const QubitState& rho, Axis axis, bool simulate,
                                 const Ensemble& qubit_classes, const TomographySetup& s) {
  return measure_projection(with_qubit_state(qubit_classes, rho), axis, simulate, s);
}

struct TomographyResult {
  std::string label;
  TomographyRecord record;
  QubitState rho;
  double f_tot = 0.0;
  double f_gate = 0.0;
};

/// Prepares one axis state from |0> and measures X, Y and Z.
inline TomographyResult tomography(const Ensemble& qubit, const AxisState& target,
                                   const TomographySetup& s) {
  GateSequence prep(s.gate, qubit.scheme, 0.0);
  if (target.prep) prep.append(*target.prep);
  const Ensemble prepared = run_sequence(qubit, prep, s, 0.0);
  const double t0 = prep.end_time();
  TomographyResult r;
  r.label = target.label;
  // The prepared frame must be undone: a logical gate phi maps to phi - frame.
  r.record.tr_x = measure_projection(prepared, Axis::x, true, s, t0, -prep.frame());
  r.record.tr_y = measure_projection(prepared, Axis::y, true, s, t0, -prep.frame());
  r.record.tr_z = measure_projection(prepared, Axis::z, true, s, t0, -prep.frame());
  r.rho = reconstruct_rho(r.record);
  r.f_tot = fidelity(r.rho, target.psi);
  r.f_gate = gate_fidelity(std::clamp(r.f_tot, 0.0, 1.0));
  return r;
}

inline std::vector<TomographyResult> six_state_tomography(const Ensemble& qubit,
                                                          const TomographySetup& s) {
  const auto states = axis_states();
  std::vector<TomographyResult> out(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) out[i] = tomography(qubit, states[i], s);
  return out;
}

}  // namespace reic
