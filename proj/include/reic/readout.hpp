#pragma once

// Single-ion readout: dipole shifts between nearby ions, fluorescence photon
// statistics of the readout ion, count discrimination, chain mapping and a
// few scaling helpers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "reic/errors.hpp"
#include "reic/types.hpp"

namespace reic {

struct ReadoutIon {
  double zpl_wavelength_nm = 371.0;
  double excited_lifetime_ns = 50.0;
  double homogeneous_linewidth = 3.0;       // MHz
  double inhomogeneous_linewidth_ghz = 80.0;
  double transition_offset = 0.0;           // MHz

  double lifetime_limited_linewidth() const {
    return 1.0 / (kTwoPi * excited_lifetime_ns * 1e-3);  // MHz
  }
  void validate() const {
    if (!(excited_lifetime_ns > 0.0) || !(homogeneous_linewidth > 0.0))
      throw ConfigError("readout ion lifetime and linewidth must be positive");
    const double limit = lifetime_limited_linewidth();
    if (homogeneous_linewidth < 0.9 * limit)
      throw ConfigError("homogeneous linewidth below the lifetime limit");
  }
};

struct Position {
  double x = 0.0, y = 0.0, z = 0.0;  // nm
};

inline double distance(const Position& a, const Position& b) {
  return std::hypot(a.x - b.x, a.y - b.y, a.z - b.z);
}

struct QubitIon {
  Position position;
  double frequency = 0.0;  // MHz
};

struct IonGeometry {
  Position readout;
  std::vector<QubitIon> qubits;
  double reference_shift = 30.0;    // MHz
  double reference_distance = 7.0;  // nm

  void validate() const {
    for (std::size_t i = 0; i < qubits.size(); ++i) {
      if (!(distance(qubits[i].position, readout) > 0.0))
        throw ConfigError("qubit ion coincides with the readout ion");
      for (std::size_t j = i + 1; j < qubits.size(); ++j)
        if (!(distance(qubits[i].position, qubits[j].position) > 0.0))
          throw ConfigError("two qubit ions coincide");
    }
  }
};

/// Static dipole-dipole shift, scaled as r^-3 from the reference pair.
inline double dipole_shift(double distance_nm, double reference_shift = 30.0,
                           double reference_distance = 7.0) {
  if (!(distance_nm > 0.0)) throw ConfigError("distance must be positive");
  return reference_shift * std::pow(reference_distance / distance_nm, 3);
}

struct DetectionParams {
  double quantum_efficiency = 0.1;
  double collection_efficiency = 0.3;
  double window = 150.0;             // µs
  double reference_window = 150.0;   // µs the means refer to
  double signal_mean = 100.0;        // counts, qubit in |1>
  double background_mean = 50.0;     // counts, qubit in |0>
  double prior_one = 0.5;

  void validate() const {
    auto unit = [](double v) { return v > 0.0 && v <= 1.0; };
    if (!unit(quantum_efficiency) || !unit(collection_efficiency))
      throw ConfigError("efficiencies must lie in (0, 1]");
    if (signal_mean < 0.0 || background_mean < 0.0) throw ConfigError("means must be >= 0");
    if (window < 0.0 || !(reference_window > 0.0)) throw ConfigError("invalid detection window");
    if (!(prior_one > 0.0 && prior_one < 1.0)) throw ConfigError("prior must lie in (0, 1)");
  }
  double mean(bool qubit_in_one) const {
    return (qubit_in_one ? signal_mean : background_mean) * window / reference_window;
  }
};

inline int photon_budget(bool qubit_in_one, const DetectionParams& p, std::uint64_t seed) {
  p.validate();
  const double m = p.mean(qubit_in_one);
  if (m == 0.0) return 0;
  std::mt19937_64 rng(seed);
  return std::poisson_distribution<int>(m)(rng);
}

/// `count` independent draws from one generator.
inline std::vector<int> photon_samples(bool qubit_in_one, const DetectionParams& p,
                                       std::size_t count, std::uint64_t seed) {
  p.validate();
  const double m = p.mean(qubit_in_one);
  std::vector<int> out(count, 0);
  if (m == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::poisson_distribution<int> dist(m);
  for (auto& x : out) x = dist(rng);
  return out;
}

inline double poisson_log_pmf(int k, double mean) {
  if (mean == 0.0) return k == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
  return k * std::log(mean) - mean - std::lgamma(k + 1.0);
}

struct Discrimination {
  int estimate = 0;           // 0 or 1
  int threshold = 0;          // smallest count favouring |1> (means ordered as default)
  double error_probability = 0.0;
};

/// Maximum-likelihood decision between the two Poisson hypotheses. The
/// error probability covers both mistakes under the configured priors.
inline Discrimination discriminate(int count, const DetectionParams& p) {
  p.validate();
  const double s = p.mean(true);
  const double b = p.mean(false);
  if (s == b) throw DegenerateMeans("signal and background means are equal");
  const double w1 = p.prior_one;
  const double w0 = 1.0 - p.prior_one;
  auto favours_one = [&](int k) {
    return std::log(w1) + poisson_log_pmf(k, s) > std::log(w0) + poisson_log_pmf(k, b);
  };
  const double hi = std::max(s, b);
  const int k_max = static_cast<int>(std::ceil(hi + 40.0 * std::sqrt(hi) + 50.0));
  Discrimination d;
  d.threshold = -1;
  double err = 0.0;
  for (int k = 0; k <= k_max; ++k) {
    const bool one = favours_one(k);
    if (one && d.threshold < 0) d.threshold = k;
    err += one ? w0 * std::exp(poisson_log_pmf(k, b)) : w1 * std::exp(poisson_log_pmf(k, s));
  }
  d.error_probability = err;
  d.estimate = favours_one(count) ? 1 : 0;
  return d;
}

/// Maps the chain of qubit ions coupled to the readout ion. From the current
/// head, every unused qubit whose excitation shifts the head by more than the
/// resolution is a candidate; the largest shift wins.
inline std::vector<double> find_chain(const IonGeometry& g, const ReadoutIon& readout,
                                      double shift_resolution) {
  g.validate();
  readout.validate();
  if (shift_resolution < readout.homogeneous_linewidth)
    throw ConfigError("shift resolution below the readout linewidth");
  std::vector<double> chain;
  std::vector<bool> used(g.qubits.size(), false);
  Position head = g.readout;
  for (;;) {
    std::size_t best = g.qubits.size();
    double best_shift = shift_resolution;
    for (std::size_t i = 0; i < g.qubits.size(); ++i) {
      if (used[i]) continue;
      const double s = dipole_shift(distance(g.qubits[i].position, head), g.reference_shift,
                                    g.reference_distance);
      if (s > best_shift) {
        best_shift = s;
        best = i;
      }
    }
    if (best == g.qubits.size()) break;
    used[best] = true;
    chain.push_back(g.qubits[best].frequency);
    head = g.qubits[best].position;
  }
  if (chain.empty()) throw NoChain("no qubit ion shifts the readout ion above resolution");
  return chain;
}

/// Fraction of ions usable when each of n-1 neighbours must be found with
/// probability p.
inline double ensemble_scaling(double p, int n) {
  if (!(p > 0.0 && p <= 1.0) || n < 1) throw ConfigError("need p in (0, 1] and n >= 1");
  return std::pow(p, n - 1);
}

/// Linear Stark shift in MHz for a field in V/cm and a coefficient in kHz/(V/cm).
inline double stark_shift(double field, double coefficient_khz) {
  if (coefficient_khz < 0.0) throw ConfigError("Stark coefficient must be >= 0");
  return field * coefficient_khz / 1000.0;
}

}  // namespace reic
