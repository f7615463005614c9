#pragma once

// Six-level master-equation dynamics under sampled drive fields.
//
// States handed in and out are in the interaction picture of the bare
// level energies at absolute time t: rho_I(t) = e^{i H0 t} rho e^{-i H0 t}.
// Free evolution therefore leaves them unchanged, and the result does not
// depend on the rotating frame used internally.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include "reic/crystal.hpp"
#include "reic/errors.hpp"
#include "reic/parallel.hpp"
#include "reic/pulse.hpp"
#include "reic/types.hpp"

namespace reic {

struct DecoherenceParams {
  double optical_t1 = 164.0;   // µs
  double optical_t2 = 100.0;   // µs
  double hyperfine_t2 = 500.0; // µs
  double hyperfine_t1 = 90.0;  // s

  static DecoherenceParams none() {
    const double inf = std::numeric_limits<double>::infinity();
    return {inf, inf, inf, inf};
  }

  bool is_coherent() const {
    return std::isinf(optical_t1) && std::isinf(optical_t2) && std::isinf(hyperfine_t2) &&
           std::isinf(hyperfine_t1);
  }

  void validate() const {
    for (double v : {optical_t1, optical_t2, hyperfine_t2, hyperfine_t1})
      if (!(v > 0.0)) throw ConfigError("coherence times must be positive");
    if (optical_t2 > 2.0 * optical_t1 * (1.0 + 1e-12))
      throw ConfigError("optical T2 exceeds 2 T1");
    if (hyperfine_t2 > 2.0 * hyperfine_t1 * 1e6 * (1.0 + 1e-12))
      throw ConfigError("hyperfine T2 exceeds 2 T1");
  }

  double optical_decay_rate() const { return 1.0 / optical_t1; }
  /// Ground-coherence dephasing rate, 1/µs.
  double hyperfine_dephasing_rate() const {
    return std::max(0.0, 1.0 / hyperfine_t2 - 0.5 / (hyperfine_t1 * 1e6));
  }
  /// Extra optical dephasing on top of decay and ground dephasing, 1/µs.
  double optical_dephasing_rate() const {
    return std::max(0.0, 1.0 / optical_t2 - 0.5 / optical_t1 - 0.5 * hyperfine_dephasing_rate());
  }
};

/// Light acting on one frequency class. Waveforms are summed; the internal
/// rotating frame defaults to the carrier of the first waveform.
struct DriveHamiltonian {
  LevelScheme scheme;
  double detuning = 0.0;  // MHz, the class's |0>->|e1> line
  std::vector<Waveform> waveforms;
  double frame = std::numeric_limits<double>::quiet_NaN();
  /// Multiplies every field amplitude (laser power fluctuation).
  double rabi_scale = 1.0;

  double resolved_frame() const {
    if (!std::isnan(frame)) return frame;
    return waveforms.empty() ? 0.0 : waveforms.front().carrier;
  }

  /// Level energies in the rotating frame, MHz.
  Eigen::Matrix<double, kLevels, 1> frame_energies() const {
    Eigen::Matrix<double, kLevels, 1> e;
    const double nu = resolved_frame();
    for (int g = 0; g < kGroundLevels; ++g) e(g) = -scheme.ground_offset(g);
    for (int x = 0; x < kExcitedLevels; ++x)
      e(kGroundLevels + x) = detuning + scheme.excited_offset(x) - nu;
    return e;
  }

  /// Total complex field in the rotating frame at time t.
  Complex field(double t) const {
    const double nu = resolved_frame();
    Complex f{};
    for (const auto& w : waveforms) {
      const Complex s = w.at(t);
      if (s == Complex{}) continue;
      f += w.carrier == nu ? s : s * std::polar(1.0, kTwoPi * (w.carrier - nu) * t);
    }
    return rabi_scale * f;
  }

  /// Hamiltonian in MHz (multiply by 2 pi for angular units).
  Operator6 hamiltonian(Complex f) const {
    Operator6 h = Operator6::Zero();
    const auto e = frame_energies();
    for (int i = 0; i < kLevels; ++i) h(i, i) = e(i);
    for (int g = 0; g < kGroundLevels; ++g)
      for (int x = 0; x < kExcitedLevels; ++x) {
        const double c = 0.5 * scheme.coupling(g, x);
        h(kGroundLevels + x, g) = c * std::conj(f);
        h(g, kGroundLevels + x) = c * f;
      }
    return h;
  }

  double max_field() const {
    double m = 0.0;
    for (const auto& w : waveforms) m += w.peak_amplitude();
    return m * std::abs(rabi_scale);
  }

  /// Sorted sample edges of all waveforms inside (t0, t1).
  std::vector<double> breakpoints(double t0, double t1) const {
    std::set<double> edges;
    for (const auto& w : waveforms) {
      for (std::size_t k = 0; k <= w.size(); ++k) {
        const double t = w.time(k);
        if (t > t0 + 1e-12 && t < t1 - 1e-12) edges.insert(t);
      }
    }
    return {edges.begin(), edges.end()};
  }

  double start_time() const {
    double t = std::numeric_limits<double>::infinity();
    for (const auto& w : waveforms) t = std::min(t, w.t_start);
    return std::isinf(t) ? 0.0 : t;
  }
};

/// Moves a state between the interaction picture and the rotating frame
/// at time t. `sign` = -1 goes to the frame, +1 comes back.
inline DensityMatrix change_picture(const DensityMatrix& rho,
                                    const Eigen::Matrix<double, kLevels, 1>& energies, double t,
                                    int sign) {
  DensityMatrix out = rho;
  for (int i = 0; i < kLevels; ++i)
    for (int j = 0; j < kLevels; ++j)
      if (i != j)
        out(i, j) *= std::polar(1.0, sign * kTwoPi * (energies(i) - energies(j)) * t);
  return out;
}

inline Operator6 change_picture_operator(const Operator6& u,
                                         const Eigen::Matrix<double, kLevels, 1>& energies,
                                         double t_out, double t_in) {
  Operator6 out = u;
  for (int i = 0; i < kLevels; ++i)
    for (int j = 0; j < kLevels; ++j)
      out(i, j) *= std::polar(1.0, kTwoPi * (energies(i) * t_out - energies(j) * t_in));
  return out;
}

/// Dissipator in element form: d rho_ij = -kappa_ij rho_ij, plus population
/// feeding d rho_ii = sum_j feed_ij rho_jj.
struct Dissipator {
  Eigen::Matrix<double, kLevels, kLevels> kappa = Eigen::Matrix<double, kLevels, kLevels>::Zero();
  Eigen::Matrix<double, kLevels, kLevels> feed = Eigen::Matrix<double, kLevels, kLevels>::Zero();

  static Dissipator from(const LevelScheme& scheme, const DecoherenceParams& deco) {
    Dissipator d;
    Eigen::Matrix<double, kLevels, 1> loss = Eigen::Matrix<double, kLevels, 1>::Zero();
    const double gamma = std::isinf(deco.optical_t1) ? 0.0 : deco.optical_decay_rate();
    for (int x = 0; x < kExcitedLevels; ++x) {
      const int e = kGroundLevels + x;
      for (int g = 0; g < kGroundLevels; ++g) d.feed(g, e) += gamma * scheme.branching(g, x);
      loss(e) += gamma;
    }
    if (!std::isinf(deco.hyperfine_t1)) {
      const double k = 0.5 / (deco.hyperfine_t1 * 1e6);
      for (int g = 0; g < kGroundLevels; ++g)
        for (int h = 0; h < kGroundLevels; ++h)
          if (g != h) {
            d.feed(h, g) += k;
            loss(g) += k;
          }
    }
    // Diagonal (pure dephasing) jump operators L = sum_i l_i |i><i| add
    // |l_i - l_j|^2 / 2 to kappa_ij.
    std::vector<Eigen::Matrix<double, kLevels, 1>> diag_ops;
    const double opt = std::isinf(deco.optical_t2) ? 0.0 : deco.optical_dephasing_rate();
    if (opt > 0.0) {
      Eigen::Matrix<double, kLevels, 1> l = Eigen::Matrix<double, kLevels, 1>::Zero();
      for (int x = 0; x < kExcitedLevels; ++x) l(kGroundLevels + x) = std::sqrt(2.0 * opt);
      diag_ops.push_back(l);
    }
    const double hf = std::isinf(deco.hyperfine_t2) ? 0.0 : deco.hyperfine_dephasing_rate();
    if (hf > 0.0) {
      for (int g = 0; g < kGroundLevels; ++g) {
        Eigen::Matrix<double, kLevels, 1> l = Eigen::Matrix<double, kLevels, 1>::Zero();
        l(g) = std::sqrt(hf);
        diag_ops.push_back(l);
      }
    }
    for (int i = 0; i < kLevels; ++i)
      for (int j = 0; j < kLevels; ++j) {
        double k = 0.5 * (loss(i) + loss(j));
        if (i != j)
          for (const auto& l : diag_ops) k += 0.5 * (l(i) - l(j)) * (l(i) - l(j));
        d.kappa(i, j) = k;
      }
    return d;
  }

  bool is_zero() const { return kappa.isZero(0.0) && feed.isZero(0.0); }

  double max_rate() const { return kappa.maxCoeff(); }
};

struct IntegratorOptions {
  /// Upper bound on the RK4 step, µs. Zero selects the automatic bound.
  double max_step = 0.0;
  /// Step count limit before StepSizeTooLarge is raised.
  std::size_t max_steps = 200'000'000;
  /// Steps per period of the fastest frequency in the generator.
  double steps_per_period = 50.0;
};

namespace detail {

inline DensityMatrix lindblad_rhs(const Operator6& h_ang, const Dissipator& d,
                                  const DensityMatrix& rho, bool dissipative) {
  const Complex minus_i(0.0, -1.0);
  DensityMatrix out = minus_i * (h_ang * rho - rho * h_ang);
  if (dissipative) {
    for (int i = 0; i < kLevels; ++i)
      for (int j = 0; j < kLevels; ++j) out(i, j) -= d.kappa(i, j) * rho(i, j);
    for (int i = 0; i < kLevels; ++i) {
      double f = 0.0;
      for (int j = 0; j < kLevels; ++j) f += d.feed(i, j) * rho(j, j).real();
      out(i, i) += f;
    }
  }
  return out;
}

/// Exact evolution without drive: coherences rotate and decay, populations
/// follow the rate equations of the dissipator.
inline DensityMatrix free_evolution(const DensityMatrix& rho,
                                    const Eigen::Matrix<double, kLevels, 1>& energies,
                                    const Dissipator& d, double t) {
  DensityMatrix out = rho;
  for (int i = 0; i < kLevels; ++i)
    for (int j = 0; j < kLevels; ++j)
      if (i != j)
        out(i, j) *= std::exp(Complex(-d.kappa(i, j) * t, -kTwoPi * (energies(i) - energies(j)) * t));
  if (!d.is_zero()) {
    Eigen::Matrix<double, kLevels, kLevels> rates = d.feed;
    for (int i = 0; i < kLevels; ++i) rates(i, i) -= d.kappa(i, i);
    const Eigen::Matrix<double, kLevels, kLevels> map = (rates * t).exp();
    const Populations p = map * populations_of(rho);
    for (int i = 0; i < kLevels; ++i) out(i, i) = p(i);
  }
  return out;
}

}  // namespace detail

/// Largest RK4 step allowed for this drive: 1/(steps_per_period x the
/// fastest rate in the generator).
inline double rk4_step_bound(const DriveHamiltonian& drive, const Dissipator& d,
                             const IntegratorOptions& opt) {
  const auto e = drive.frame_energies();
  double c_max = 0.0;
  for (int g = 0; g < 3; ++g)
    for (int x = 0; x < 3; ++x) c_max = std::max(c_max, drive.scheme.coupling(g, x));
  const double fastest = (e.maxCoeff() - e.minCoeff()) + drive.max_field() * c_max +
                         d.max_rate() / kTwoPi;
  return fastest > 0.0 ? 1.0 / (opt.steps_per_period * fastest)
                       : std::numeric_limits<double>::infinity();
}

/// Evolves `rho` from `t0` for `duration` µs with the Lindblad master
/// equation, fixed-step RK4 on a grid aligned with the sample edges.
inline DensityMatrix propagate(const DensityMatrix& rho, const DriveHamiltonian& drive,
                               const DecoherenceParams& deco, double duration,
                               std::optional<double> t0 = std::nullopt,
                               const IntegratorOptions& opt = {}) {
  deco.validate();
  if (duration < 0.0) throw ConfigError("duration must be non-negative");
  const double start = t0 ? *t0 : drive.start_time();
  const double stop = start + duration;
  const Dissipator d = Dissipator::from(drive.scheme, deco);
  const bool dissipative = !d.is_zero();
  const double bound = rk4_step_bound(drive, d, opt);
  if (opt.max_step > 0.0 && opt.max_step > bound * (1.0 + 1e-9))
    throw StepSizeTooLarge("requested step " + std::to_string(opt.max_step) +
                           " µs exceeds the stability bound " + std::to_string(bound));
  const double h_max = opt.max_step > 0.0 ? opt.max_step : bound;

  const auto energies = drive.frame_energies();
  DensityMatrix r = change_picture(rho, energies, start, -1);

  std::vector<double> edges;
  edges.push_back(start);
  for (double t : drive.breakpoints(start, stop)) edges.push_back(t);
  edges.push_back(stop);

  std::size_t steps_taken = 0;
  for (std::size_t s = 0; s + 1 < edges.size(); ++s) {
    const double a = edges[s];
    const double b = edges[s + 1];
    const double len = b - a;
    if (len <= 0.0) continue;
    const Complex f = drive.field(0.5 * (a + b));
    const Operator6 h = kTwoPi * drive.hamiltonian(f);
    if (f == Complex{}) {
      r = detail::free_evolution(r, energies, d, len);
      continue;
    }
    const auto n = static_cast<std::size_t>(std::ceil(len / h_max - 1e-9));
    steps_taken += n;
    if (steps_taken > opt.max_steps)
      throw StepSizeTooLarge("integration needs more than " + std::to_string(opt.max_steps) +
                             " steps");
    const double dt = len / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
      const DensityMatrix k1 = detail::lindblad_rhs(h, d, r, dissipative);
      const DensityMatrix k2 = detail::lindblad_rhs(h, d, r + 0.5 * dt * k1, dissipative);
      const DensityMatrix k3 = detail::lindblad_rhs(h, d, r + 0.5 * dt * k2, dissipative);
      const DensityMatrix k4 = detail::lindblad_rhs(h, d, r + dt * k3, dissipative);
      r += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    r = 0.5 * (r + r.adjoint().eval());
  }
  return change_picture(r, energies, stop, +1);
}

/// exp(-2 pi i H t) for Hermitian H.
inline Operator6 hermitian_propagator(const Operator6& h, double t) {
  Eigen::SelfAdjointEigenSolver<Operator6> es(h);
  const auto& v = es.eigenvectors();
  Eigen::Matrix<Complex, kLevels, 1> phase;
  for (int i = 0; i < kLevels; ++i) phase(i) = std::polar(1.0, -kTwoPi * es.eigenvalues()(i) * t);
  return v * phase.asDiagonal() * v.adjoint();
}

/// Exact coherent evolution operator in the interaction picture, one matrix
/// exponential per constant-field segment. Decoherence is ignored.
inline Operator6 evolution_operator(const DriveHamiltonian& drive, double duration,
                                    std::optional<double> t0 = std::nullopt) {
  const double start = t0 ? *t0 : drive.start_time();
  const double stop = start + duration;
  const auto energies = drive.frame_energies();
  std::vector<double> edges;
  edges.push_back(start);
  for (double t : drive.breakpoints(start, stop)) edges.push_back(t);
  edges.push_back(stop);
  Operator6 u = Operator6::Identity();
  for (std::size_t s = 0; s + 1 < edges.size(); ++s) {
    const double a = edges[s];
    const double b = edges[s + 1];
    if (b <= a) continue;
    const Complex f = drive.field(0.5 * (a + b));
    if (f == Complex{}) {
      Eigen::Matrix<Complex, kLevels, 1> ph;
      for (int i = 0; i < kLevels; ++i) ph(i) = std::polar(1.0, -kTwoPi * energies(i) * (b - a));
      u = ph.asDiagonal() * u;
    } else {
      u = hermitian_propagator(drive.hamiltonian(f), b - a) * u;
    }
  }
  // frame -> interaction picture: U_I = e^{i H0 stop} U e^{-i H0 start}
  return change_picture_operator(u, energies, stop, start);
}

inline DensityMatrix propagate_unitary(const DensityMatrix& rho, const DriveHamiltonian& drive,
                                       double duration, std::optional<double> t0 = std::nullopt) {
  const Operator6 u = evolution_operator(drive, duration, t0);
  return u * rho * u.adjoint();
}

// ---------------------------------------------------------------------------
// Ensembles

/// Deterministic per-class Rabi scale in [1 - scatter, 1 + scatter], keyed
/// on the class detuning so it does not depend on class order.
inline double class_rabi_scale(double detuning, double scatter, std::uint64_t seed) {
  if (scatter == 0.0) return 1.0;
  std::uint64_t bits;
  static_assert(sizeof(bits) == sizeof(detuning));
  std::memcpy(&bits, &detuning, sizeof(bits));
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(bits), static_cast<std::uint32_t>(bits >> 32)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return 1.0 + scatter * u(rng);
}

enum class Propagator { master_equation, unitary };

struct EnsembleDrive {
  std::vector<Waveform> waveforms;
  double frame = std::numeric_limits<double>::quiet_NaN();
  double rabi_scatter = 0.0;
  std::uint64_t seed = 0;
  Propagator method = Propagator::master_equation;
  IntegratorOptions integrator{};
};

/// Propagates every class with its own detuning and Rabi scale.
inline Ensemble ensemble_propagate(Ensemble ens, const EnsembleDrive& drive,
                                   const DecoherenceParams& deco, double duration,
                                   std::optional<double> t0 = std::nullopt) {
  if (drive.rabi_scatter < 0.0 || drive.rabi_scatter >= 1.0)
    throw ConfigError("rabi_scatter must lie in [0, 1)");
  parallel_for(ens.classes.size(), [&](std::size_t i) {
    IonClass& c = ens.classes[i];
    DriveHamiltonian h{ens.scheme, c.detuning, drive.waveforms, drive.frame,
                       class_rabi_scale(c.detuning, drive.rabi_scatter, drive.seed)};
    c.state = drive.method == Propagator::unitary
                  ? propagate_unitary(c.state, h, duration, t0)
                  : propagate(c.state, h, deco, duration, t0, drive.integrator);
  });
  return ens;
}

/// Weight-averaged population of `level`, summed in detuning order so the
/// result is independent of class order.
inline double mean_population(const Ensemble& ens, int level) {
  std::vector<std::pair<double, std::pair<double, double>>> items;
  items.reserve(ens.classes.size());
  for (const auto& c : ens.classes)
    items.push_back({c.detuning, {c.weight, c.state(level, level).real()}});
  std::sort(items.begin(), items.end());
  double num = 0.0;
  double den = 0.0;
  for (const auto& [d, wp] : items) {
    num += wp.first * wp.second;
    den += wp.first;
  }
  return den > 0.0 ? num / den : 0.0;
}

/// Weight-averaged density matrix, summed in detuning order.
inline DensityMatrix mean_state(const Ensemble& ens) {
  std::vector<std::size_t> order(ens.classes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ens.classes[a].detuning < ens.classes[b].detuning;
  });
  DensityMatrix acc = DensityMatrix::Zero();
  double w = 0.0;
  for (auto i : order) {
    acc += ens.classes[i].weight * ens.classes[i].state;
    w += ens.classes[i].weight;
  }
  return w > 0.0 ? DensityMatrix(acc / w) : acc;
}

/// Ensemble of equal-weight classes at the given detunings, all in `state`.
inline Ensemble class_ensemble(const std::vector<double>& detunings, const DensityMatrix& state,
                               const LevelScheme& scheme = {}) {
  Ensemble e;
  e.scheme = scheme;
  e.alpha_scale = 1.0;
  if (!detunings.empty()) {
    const auto [lo, hi] = std::minmax_element(detunings.begin(), detunings.end());
    e.window = {*lo, *hi};
  }
  for (double d : detunings) e.classes.push_back({d, 1.0, 0.0, state});
  return e;
}

}  // namespace reic
