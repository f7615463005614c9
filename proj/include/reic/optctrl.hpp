#pragma once

// Gradient-based optimal control of piecewise-constant fields (GRAPE).
//
// Controls are complex baseband amplitudes relative to a carrier. The band
// limit is a hard spectral mask, and the amplitude cap is met by scaling the
// whole sequence, so a projected control satisfies both exactly.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "reic/crystal.hpp"
#include "reic/dynamics.hpp"
#include "reic/errors.hpp"
#include "reic/parallel.hpp"
#include "reic/pulse.hpp"
#include "reic/spectral.hpp"
#include "reic/types.hpp"

namespace reic {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

struct ControlSequence {
  double dt = 0.01;  // µs
  std::vector<Complex> amplitudes;  // Rabi frequency per step, MHz

  std::size_t n_steps() const { return amplitudes.size(); }
  double duration() const { return dt * static_cast<double>(amplitudes.size()); }
  double peak() const {
    double m = 0.0;
    for (auto a : amplitudes) m = std::max(m, std::abs(a));
    return m;
  }

  Waveform to_waveform(double carrier, double t_start = 0.0) const {
    Waveform w;
    w.samples = amplitudes;
    w.sample_rate = 1.0 / dt;
    w.carrier = carrier;
    w.t_start = t_start;
    return w;
  }
};

/// H(u) = drift + u * raise + conj(u) * raise^dag, MHz.
struct ControlModel {
  CMatrix drift;
  CMatrix raise;
  CVector initial;
  CVector target;

  Eigen::Index dim() const { return drift.rows(); }
  CMatrix hamiltonian(Complex u) const {
    return drift + u * raise + std::conj(u) * raise.adjoint();
  }
};

/// All six levels, field referenced to `carrier`.
inline ControlModel multi_level_model(const LevelScheme& scheme, double detuning, double carrier,
                                      int from_ground, int to_excited) {
  DriveHamiltonian h{scheme, detuning, {}, carrier, 1.0};
  const Operator6 h0 = h.hamiltonian(Complex{});
  ControlModel m;
  m.drift = h0;
  m.raise = h.hamiltonian(Complex(1.0, 0.0)) - h0;
  // hamiltonian(1) - H0 = raise + raise^dag; keep the ground-row half.
  m.raise.bottomRows(kExcitedLevels).setZero();
  m.initial = CVector::Zero(kLevels);
  m.initial(from_ground) = 1.0;
  m.target = CVector::Zero(kLevels);
  m.target(kGroundLevels + to_excited) = 1.0;
  return m;
}

/// The addressed pair only; every other line is ignored.
inline ControlModel two_level_model(const LevelScheme& scheme, double detuning, double carrier,
                                    int from_ground, int to_excited) {
  const ControlModel full = multi_level_model(scheme, detuning, carrier, from_ground, to_excited);
  const int g = from_ground;
  const int e = kGroundLevels + to_excited;
  ControlModel m;
  m.drift = CMatrix::Zero(2, 2);
  m.drift(0, 0) = full.drift(g, g);
  m.drift(1, 1) = full.drift(e, e);
  m.raise = CMatrix::Zero(2, 2);
  m.raise(0, 1) = full.raise(g, e);
  m.initial = CVector::Zero(2);
  m.initial(0) = 1.0;
  m.target = CVector::Zero(2);
  m.target(1) = 1.0;
  return m;
}

struct ControlProblem {
  std::vector<ControlModel> members;  // fidelity is averaged over these
  double bandwidth = 2.0;             // full two-sided width, MHz
  double amplitude_cap = 1.0;         // MHz
  double duration = 5.0;              // µs
  double dt = 0.01;                   // µs
  double target_fidelity = 0.999;

  std::size_t n_steps() const {
    return static_cast<std::size_t>(std::llround(duration / dt));
  }

  void validate() const {
    if (members.empty()) throw ConfigError("control problem has no members");
    if (!(bandwidth > 0.0)) throw ConfigError("bandwidth must be positive");
    if (!(duration > 0.0) || !(dt > 0.0) || n_steps() == 0)
      throw ConfigError("duration and step must be positive");
    if (!(amplitude_cap > 0.0)) throw ConfigError("amplitude cap must be positive");
    if (bandwidth > 1.0 / dt) throw ConfigError("bandwidth exceeds the step sampling rate");
  }

  /// A transfer needs pulse area 1/2 (cyclic units) on the strongest coupling.
  void check_feasible() const {
    double c = 0.0;
    for (const auto& m : members) c = std::max(c, 2.0 * m.raise.cwiseAbs().maxCoeff());
    if (c * amplitude_cap * duration < 0.5)
      throw Infeasible("cap x duration x coupling = " +
                       std::to_string(c * amplitude_cap * duration) + " < 1/2");
  }
};

// ---------------------------------------------------------------------------
// Constraints

/// Zeroes every DFT bin outside |f| <= bandwidth / 2. Idempotent.
inline std::vector<Complex> band_limit(const std::vector<Complex>& x, double bandwidth, double dt) {
  if (x.empty()) return x;
  auto spec = spectral::fft(x);
  const double rate = 1.0 / dt;
  for (std::size_t k = 0; k < spec.size(); ++k)
    if (std::abs(spectral::bin_frequency(k, spec.size(), rate)) > 0.5 * bandwidth + 1e-12) spec[k] = 0.0;
  return spectral::ifft(spec);
}

inline ControlSequence project(ControlSequence c, const ControlProblem& p) {
  c.amplitudes = band_limit(c.amplitudes, p.bandwidth, c.dt);
  const double peak = c.peak();
  if (peak > p.amplitude_cap) {
    const double s = p.amplitude_cap / peak;
    for (auto& a : c.amplitudes) a *= s;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Cost and gradient

namespace detail {

struct StepFactor {
  CMatrix vectors;
  Eigen::VectorXd values;
  CMatrix propagator;
};

inline StepFactor factor_step(const ControlModel& m, Complex u, double dt) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(m.hamiltonian(u));
  StepFactor f{es.eigenvectors(), es.eigenvalues(), {}};
  CVector ph(f.values.size());
  for (Eigen::Index i = 0; i < ph.size(); ++i) ph(i) = std::polar(1.0, -kTwoPi * f.values(i) * dt);
  f.propagator = f.vectors * ph.asDiagonal() * f.vectors.adjoint();
  return f;
}

/// Derivative of exp(-i 2 pi dt H) along dH, via the divided-difference
/// (Daleckii-Krein) formula in the eigenbasis of H.
inline CMatrix propagator_derivative(const StepFactor& f, const CMatrix& dh, double dt) {
  const Eigen::Index n = f.values.size();
  const Complex a(0.0, -kTwoPi * dt);
  CMatrix d = f.vectors.adjoint() * dh * f.vectors;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double li = f.values(i);
      const double lj = f.values(j);
      const Complex ei = std::exp(a * li);
      const Complex ej = std::exp(a * lj);
      const Complex g = std::abs(li - lj) > 1e-10 ? (ei - ej) / (li - lj) : a * ei;
      d(i, j) *= g;
    }
  return f.vectors * d * f.vectors.adjoint();
}

}  // namespace detail

inline double transfer_fidelity(const ControlModel& m, const ControlSequence& c) {
  CVector psi = m.initial;
  for (auto u : c.amplitudes) psi = detail::factor_step(m, u, c.dt).propagator * psi;
  return std::norm(m.target.dot(psi));
}

inline double transfer_fidelity(const ControlProblem& p, const ControlSequence& c) {
  double f = 0.0;
  for (const auto& m : p.members) f += transfer_fidelity(m, c);
  return f / static_cast<double>(p.members.size());
}

struct Gradient {
  double fidelity = 0.0;
  std::vector<Complex> d;  // dF/dRe(u_k) + i dF/dIm(u_k)
};

/// Exact gradient of the mean transfer fidelity.
inline Gradient fidelity_gradient(const ControlProblem& p, const ControlSequence& c) {
  const std::size_t n = c.n_steps();
  Gradient g{0.0, std::vector<Complex>(n, Complex{})};
  for (const auto& m : p.members) {
    std::vector<detail::StepFactor> steps;
    steps.reserve(n);
    std::vector<CVector> fwd(n + 1);
    fwd[0] = m.initial;
    for (std::size_t k = 0; k < n; ++k) {
      steps.push_back(detail::factor_step(m, c.amplitudes[k], c.dt));
      fwd[k + 1] = steps[k].propagator * fwd[k];
    }
    const Complex overlap = m.target.dot(fwd[n]);
    g.fidelity += std::norm(overlap);
    const CMatrix d_re = m.raise + m.raise.adjoint();
    const CMatrix d_im = Complex(0.0, 1.0) * (m.raise - m.raise.adjoint());
    CVector back = m.target;  // U_{k+1}^dag ... U_n^dag |target>
    for (std::size_t k = n; k-- > 0;) {
      const CMatrix du_re = detail::propagator_derivative(steps[k], d_re, c.dt);
      const CMatrix du_im = detail::propagator_derivative(steps[k], d_im, c.dt);
      const Complex o_re = back.dot(du_re * fwd[k]);
      const Complex o_im = back.dot(du_im * fwd[k]);
      g.d[k] += Complex(2.0 * (std::conj(overlap) * o_re).real(),
                        2.0 * (std::conj(overlap) * o_im).real());
      back = steps[k].propagator.adjoint() * back;
    }
  }
  const double w = 1.0 / static_cast<double>(p.members.size());
  g.fidelity *= w;
  for (auto& x : g.d) x *= w;
  return g;
}

// ---------------------------------------------------------------------------
// Optimizer

struct GrapeOptions {
  int max_iterations = 500;
  int starts = 5;
  double initial_step = 1.0;
  int max_backtracks = 30;
  /// Improvement that counts as progress, and the window it is judged over.
  double stall_tolerance = 1e-8;
  int stall_window = 50;
  /// Peak of the random initial guess relative to the cap.
  double initial_fraction = 0.25;
  /// Gaussian roll-off of the initial spectrum, as a fraction of the band
  /// half-width. Zero draws a flat in-band spectrum.
  double initial_taper = 1.0 / 3.0;
  bool throw_on_stall = true;
};

struct GrapeResult {
  ControlSequence control;
  std::vector<double> fidelity_trace;
  int start_index = 0;
  bool stalled = false;
  double fidelity() const { return fidelity_trace.empty() ? 0.0 : fidelity_trace.back(); }
};

/// Smooth random control from `seed`, already projected.
inline ControlSequence initial_guess(const ControlProblem& p, std::uint64_t seed,
                                     double fraction = 0.25, double taper = 1.0 / 3.0) {
  const std::size_t n = p.n_steps();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::vector<Complex> spec(n, Complex{});
  for (std::size_t k = 0; k < n; ++k)
  {
    const double f = spectral::bin_frequency(k, n, 1.0 / p.dt);
    const Complex draw{uni(rng), uni(rng)};
    if (std::abs(f) > 0.5 * p.bandwidth) continue;
    const double sigma = taper * 0.5 * p.bandwidth;
    spec[k] = taper > 0.0 ? draw * std::exp(-0.5 * (f / sigma) * (f / sigma)) : draw;
  }
  ControlSequence c{p.dt, spectral::ifft(spec)};
  const double peak = c.peak();
  if (peak > 0.0)
    for (auto& a : c.amplitudes) a *= fraction * p.amplitude_cap / peak;
  return project(std::move(c), p);
}

/// One start of projected gradient ascent with backtracking.
inline GrapeResult grape_single(const ControlProblem& p, ControlSequence c,
                                const GrapeOptions& opt) {
  GrapeResult r;
  double f = transfer_fidelity(p, c);
  r.fidelity_trace.push_back(f);
  double step = opt.initial_step;
  for (int it = 0; it < opt.max_iterations && f < p.target_fidelity; ++it) {
    const Gradient g = fidelity_gradient(p, c);
    std::vector<Complex> dir = band_limit(g.d, p.bandwidth, c.dt);
    bool accepted = false;
    for (int b = 0; b <= opt.max_backtracks; ++b) {
      ControlSequence trial = c;
      for (std::size_t k = 0; k < dir.size(); ++k) trial.amplitudes[k] += step * dir[k];
      trial = project(std::move(trial), p);
      const double ft = transfer_fidelity(p, trial);
      if (ft > f) {
        c = std::move(trial);
        f = ft;
        accepted = true;
        step *= 2.0;
        break;
      }
      step *= 0.5;
    }
    r.fidelity_trace.push_back(f);
    const auto w = static_cast<std::size_t>(opt.stall_window);
    if (!accepted || (r.fidelity_trace.size() > w &&
                      f - r.fidelity_trace[r.fidelity_trace.size() - 1 - w] < opt.stall_tolerance)) {
      r.stalled = true;
      break;
    }
    if (step < 1e-12) step = opt.initial_step;
  }
  r.control = std::move(c);
  return r;
}

/// Multi-start GRAPE. Start i uses seed + i; the best final fidelity wins,
/// ties going to the lowest start index.
inline GrapeResult grape_optimize(const ControlProblem& p, int max_iterations, std::uint64_t seed,
                                  GrapeOptions opt = {}) {
  p.validate();
  p.check_feasible();
  opt.max_iterations = max_iterations;
  const int starts = std::max(1, opt.starts);
  std::vector<GrapeResult> results(static_cast<std::size_t>(starts));
  parallel_for(results.size(), [&](std::size_t i) {
    results[i] = grape_single(p, initial_guess(p, seed + i, opt.initial_fraction, opt.initial_taper), opt);
    results[i].start_index = static_cast<int>(i);
  });
  std::size_t best = 0;
  for (std::size_t i = 1; i < results.size(); ++i)
    if (results[i].fidelity() > results[best].fidelity()) best = i;
  GrapeResult r = std::move(results[best]);
  if (r.stalled && r.fidelity() < p.target_fidelity && opt.throw_on_stall)
    throw Stalled("best fidelity " + std::to_string(r.fidelity()) + " below target " +
                  std::to_string(p.target_fidelity));
  return r;
}

// ---------------------------------------------------------------------------
// Bandwidth study

struct BandwidthStudySettings {
  int from_ground = 0;
  int to_excited = 0;
  double detuning = 0.0;
  double amplitude_cap = 1.0;
  double duration = 5.0;
  double dt = 0.01;
  double target_fidelity = 0.999;
  int max_iterations = 200;
  int starts = 5;
  double initial_taper = 1.0 / 3.0;
  std::uint64_t seed = 1;
};

struct BandwidthPoint {
  double bandwidth = 0.0;
  double two_level = 0.0;
  double multi_level = 0.0;
};

/// Optimizes each transfer on the isolated pair and re-scores the pulse on
/// all six levels.
inline std::vector<BandwidthPoint> efficiency_vs_bandwidth(const LevelScheme& scheme,
                                                           const std::vector<double>& bandwidths,
                                                           const BandwidthStudySettings& s = {}) {
  std::vector<BandwidthPoint> out;
  const double carrier = transition_frequency(scheme, s.detuning, s.from_ground, s.to_excited);
  for (double b : bandwidths) {
    ControlProblem p;
    p.members = {two_level_model(scheme, s.detuning, carrier, s.from_ground, s.to_excited)};
    p.bandwidth = b;
    p.amplitude_cap = s.amplitude_cap;
    p.duration = s.duration;
    p.dt = s.dt;
    p.target_fidelity = s.target_fidelity;
    GrapeOptions opt;
    opt.starts = s.starts;
    opt.initial_taper = s.initial_taper;
    opt.throw_on_stall = false;
    const GrapeResult r = grape_optimize(p, s.max_iterations, s.seed, opt);
    const ControlModel full =
        multi_level_model(scheme, s.detuning, carrier, s.from_ground, s.to_excited);
    out.push_back({b, r.fidelity(), transfer_fidelity(full, r.control)});
  }
  return out;
}

}  // namespace reic
