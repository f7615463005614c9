#pragma once

#include <Eigen/Dense>

#include <complex>
#include <vector>

#include "reic/errors.hpp"

namespace reic {

// Units used throughout: frequencies in MHz (cyclic), times in µs,
// phases in radians. Rabi frequencies are cyclic MHz.

using Complex = std::complex<double>;
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

inline constexpr int kGroundLevels = 3;
inline constexpr int kExcitedLevels = 3;
inline constexpr int kLevels = kGroundLevels + kExcitedLevels;

/// Ground hyperfine levels. Index 0..2 in the 6-level basis.
enum class Ground : int { zero = 0, one = 1, aux = 2 };
/// Excited hyperfine levels, ascending energy. Index 3..5 in the 6-level basis.
enum class Excited : int { e1 = 0, e2 = 1, e3 = 2 };

inline constexpr int level_index(Ground g) { return static_cast<int>(g); }
inline constexpr int level_index(Excited e) { return kGroundLevels + static_cast<int>(e); }

using Populations = Eigen::Matrix<double, kLevels, 1>;
using DensityMatrix = Eigen::Matrix<Complex, kLevels, kLevels>;
using Operator6 = DensityMatrix;
using Qubit = Eigen::Matrix<Complex, 2, 2>;
using QubitVector = Eigen::Matrix<Complex, 2, 1>;

/// A closed frequency interval [lo, hi] in MHz.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  double center() const { return 0.5 * (lo + hi); }
  bool contains(double x) const { return x >= lo && x <= hi; }
  Interval shifted(double by) const { return {lo + by, hi + by}; }
  Interval widened(double by) const { return {lo - by, hi + by}; }
  /// Distance from x to the interval; zero inside.
  double distance(double x) const {
    if (x < lo) return lo - x;
    if (x > hi) return x - hi;
    return 0.0;
  }
  friend bool operator==(const Interval&, const Interval&) = default;
};

inline DensityMatrix pure_state(int level) {
  DensityMatrix rho = DensityMatrix::Zero();
  rho(level, level) = 1.0;
  return rho;
}

inline DensityMatrix diagonal_state(const Populations& p) {
  DensityMatrix rho = DensityMatrix::Zero();
  for (int i = 0; i < kLevels; ++i) rho(i, i) = p(i);
  return rho;
}

inline Populations populations_of(const DensityMatrix& rho) {
  Populations p;
  for (int i = 0; i < kLevels; ++i) p(i) = rho(i, i).real();
  return p;
}

}  // namespace reic
