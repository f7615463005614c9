#pragma once

// Level structure of the ion and the inhomogeneously broadened ensemble.
//
// An ensemble is a set of frequency classes. Each class stands for all ions
// whose |0>->|e1> transition lies inside a bin of `width` MHz centred on
// `detuning`; its absorption line shape is the homogeneous Lorentzian
// convolved with that bin. This makes a flat profile exactly flat no matter
// how coarse the sampling, while the pit edges stay sharp to one bin.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "reic/errors.hpp"
#include "reic/types.hpp"

namespace reic {

/// Hyperfine structure: three ground and three excited levels.
struct LevelScheme {
  /// Adjacent splittings down the ground ladder, MHz. With the default ladder
  /// these are |0>-|1> and |1>-|aux>.
  std::array<double, 2> ground_splittings{10.2, 17.3};
  /// e1-e2 and e2-e3 splittings, MHz.
  std::array<double, 2> excited_splittings{4.6, 4.8};
  /// Relative oscillator strengths, rows = ground level, columns = excited
  /// level. Each row sums to one.
  Eigen::Matrix3d relative_strengths = Eigen::Matrix3d::Constant(1.0 / 3.0);
  /// Homogeneous optical linewidth (FWHM), kHz.
  double homogeneous_linewidth_khz = 3.0;
  /// Rung of |0>, |1>, |aux> on the ground ladder counted from the highest
  /// ground energy. Default puts |0> on top, |aux> at the bottom.
  std::array<int, 3> ground_ladder{0, 1, 2};

  void validate() const {
    for (double s : ground_splittings)
      if (!(s > 0.0)) throw ConfigError("ground splittings must be positive");
    for (double s : excited_splittings)
      if (!(s > 0.0)) throw ConfigError("excited splittings must be positive");
    if (!(homogeneous_linewidth_khz > 0.0))
      throw ConfigError("homogeneous linewidth must be positive");
    std::array<int, 3> sorted = ground_ladder;
    std::sort(sorted.begin(), sorted.end());
    if (sorted != std::array<int, 3>{0, 1, 2})
      throw ConfigError("ground_ladder must be a permutation of 0,1,2");
    for (int g = 0; g < 3; ++g) {
      double row = 0.0;
      for (int e = 0; e < 3; ++e) {
        if (relative_strengths(g, e) < 0.0)
          throw ConfigError("relative strengths must be non-negative");
        row += relative_strengths(g, e);
      }
      if (std::abs(row - 1.0) > 1e-9)
        throw ConfigError("each row of relative_strengths must sum to 1");
    }
  }

  double homogeneous_linewidth() const { return homogeneous_linewidth_khz * 1e-3; }

  /// Energy of ground rung r below the top rung, MHz.
  double rung_depth(int rung) const {
    double depth = 0.0;
    for (int r = 0; r < rung; ++r) depth += ground_splittings[static_cast<std::size_t>(r)];
    return depth;
  }

  /// Offset added to the class detuning for transitions out of ground g.
  double ground_offset(int g) const {
    return rung_depth(ground_ladder[static_cast<std::size_t>(g)]) -
           rung_depth(ground_ladder[0]);
  }
  double ground_offset(Ground g) const { return ground_offset(static_cast<int>(g)); }

  /// Offset of excited level e above e1.
  double excited_offset(int e) const {
    double off = 0.0;
    for (int k = 0; k < e; ++k) off += excited_splittings[static_cast<std::size_t>(k)];
    return off;
  }
  double excited_offset(Excited e) const { return excited_offset(static_cast<int>(e)); }

  double ground_span() const { return ground_splittings[0] + ground_splittings[1]; }
  double excited_span() const { return excited_splittings[0] + excited_splittings[1]; }
  double total_span() const { return ground_span() + excited_span(); }

  /// Widest interval that can be emptied of absorbers: every class keeps a
  /// ground level whose three lines all fall outside it.
  double max_pit_width() const { return ground_span() - excited_span(); }

  /// Rabi-frequency factor of transition (g, e) relative to a transition of
  /// average strength; uniform strengths give 1 for every transition.
  double coupling(int g, int e) const { return std::sqrt(3.0 * relative_strengths(g, e)); }

  /// Probability that excited level e decays into ground level g.
  double branching(int g, int e) const {
    const double col = relative_strengths.col(e).sum();
    return col > 0.0 ? relative_strengths(g, e) / col : 1.0 / 3.0;
  }
};

struct Transition {
  int ground = 0;
  int excited = 0;
  double frequency = 0.0;  // MHz
};

/// All nine transition frequencies of an ion whose |0>->|e1> line sits at
/// `detuning`, ordered by (ground, excited).
inline std::array<Transition, 9> transition_frequencies(const LevelScheme& scheme,
                                                        double detuning) {
  std::array<Transition, 9> out{};
  for (int g = 0; g < 3; ++g)
    for (int e = 0; e < 3; ++e)
      out[static_cast<std::size_t>(3 * g + e)] = {
          g, e, detuning + scheme.ground_offset(g) + scheme.excited_offset(e)};
  return out;
}

inline double transition_frequency(const LevelScheme& scheme, double detuning, int g, int e) {
  return detuning + scheme.ground_offset(g) + scheme.excited_offset(e);
}

/// One frequency class of ions.
struct IonClass {
  double detuning = 0.0;  // MHz, |0>->|e1> line centre
  double weight = 0.0;    // statistical weight
  double width = 0.0;     // MHz, spectral extent the class represents
  DensityMatrix state = DensityMatrix::Zero();

  Populations populations() const { return populations_of(state); }
  double ground_population(int g) const { return state(g, g).real(); }
};

enum class Profile { flat, gaussian };

struct EnsembleOptions {
  /// Peak optical depth of the unburned ensemble.
  double alpha_l_max = 2.0;
  /// FWHM of the gaussian profile, MHz (the full inhomogeneous line).
  double gaussian_fwhm = 5000.0;
  /// Centre of the gaussian profile; NaN selects the window centre.
  double gaussian_center = std::numeric_limits<double>::quiet_NaN();
};

struct Ensemble {
  LevelScheme scheme;
  Interval window;
  std::vector<IonClass> classes;
  /// Converts the raw absorber sum into optical depth.
  double alpha_scale = 0.0;
  /// Optical depth of the unburned plateau the scale was fixed to.
  double reference_alpha_l = 0.0;

  bool empty() const { return classes.empty(); }
  double total_weight() const {
    double w = 0.0;
    for (const auto& c : classes) w += c.weight;
    return w;
  }
};

inline DensityMatrix thermal_ground_state() {
  Populations p = Populations::Zero();
  p(0) = p(1) = p(2) = 1.0 / 3.0;
  return diagonal_state(p);
}

namespace detail {

/// Lorentzian of FWHM `gamma` convolved with a unit-area box of width `width`,
/// evaluated at offset x. Normalized to unit area. Zero beyond 1000 linewidths
/// of the box edge.
inline double class_lineshape(double x, double width, double gamma) {
  const double half = 0.5 * width;
  if (std::abs(x) - half > 1000.0 * gamma) return 0.0;
  if (width <= 0.0) {
    const double hg = 0.5 * gamma;
    return hg / (kPi * (x * x + hg * hg));
  }
  return (std::atan(2.0 * (x + half) / gamma) - std::atan(2.0 * (x - half) / gamma)) /
         (kPi * width);
}

inline double lineshape_reach(double width, double gamma) { return 0.5 * width + 1000.0 * gamma; }

inline double raw_absorption_at(const Ensemble& ens, double nu) {
  const double gamma = ens.scheme.homogeneous_linewidth();
  double sum = 0.0;
  for (const auto& c : ens.classes) {
    for (const auto& t : transition_frequencies(ens.scheme, c.detuning)) {
      const double pop = c.state(t.ground, t.ground).real();
      if (pop == 0.0) continue;
      sum += c.weight * pop * ens.scheme.relative_strengths(t.ground, t.excited) *
             class_lineshape(nu - t.frequency, c.width, gamma);
    }
  }
  return sum;
}

}  // namespace detail

/// Discretizes the inhomogeneous line inside `window` into `n_classes`
/// equal-width frequency bins. The seed draws the sub-bin phase of the grid.
/// All classes start with 1/3 in each ground level.
inline Ensemble sample_ensemble(Profile profile, Interval window, std::size_t n_classes,
                                std::uint64_t seed, const LevelScheme& scheme = {},
                                const EnsembleOptions& options = {}) {
  scheme.validate();
  if (!(window.lo < window.hi)) throw ConfigError("ensemble window must satisfy min < max");
  if (!(options.alpha_l_max > 0.0)) throw ConfigError("alpha_l_max must be positive");

  Ensemble ens;
  ens.scheme = scheme;
  ens.window = window;
  ens.reference_alpha_l = options.alpha_l_max;
  if (n_classes == 0) return ens;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double phase = unit(rng);
  const double bin = window.width() / static_cast<double>(n_classes);
  const double center =
      std::isnan(options.gaussian_center) ? window.center() : options.gaussian_center;
  const double sigma = options.gaussian_fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0)));

  ens.classes.reserve(n_classes);
  const DensityMatrix thermal = thermal_ground_state();
  for (std::size_t i = 0; i < n_classes; ++i) {
    IonClass c;
    c.detuning = window.lo + (static_cast<double>(i) + phase) * bin;
    c.width = bin;
    c.weight = 1.0;
    if (profile == Profile::gaussian) {
      const double z = (c.detuning - center) / sigma;
      c.weight = std::exp(-0.5 * z * z);
    }
    c.state = thermal;
    ens.classes.push_back(c);
  }
  const double raw = detail::raw_absorption_at(ens, profile == Profile::gaussian
                                                        ? std::clamp(center, window.lo, window.hi)
                                                        : window.center());
  ens.alpha_scale = raw > 0.0 ? options.alpha_l_max / raw : 0.0;
  ens.reference_alpha_l = options.alpha_l_max;
  return ens;
}

/// Optical depth on each grid frequency.
inline std::vector<double> absorption_spectrum(const Ensemble& ens, const std::vector<double>& grid) {
  std::vector<double> out(grid.size(), 0.0);
  if (ens.classes.empty() || grid.empty()) return out;
  const double gamma = ens.scheme.homogeneous_linewidth();

  std::vector<std::size_t> order(grid.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return grid[a] < grid[b]; });
  std::vector<double> sorted(grid.size());
  for (std::size_t i = 0; i < order.size(); ++i) sorted[i] = grid[order[i]];

  std::vector<double> acc(grid.size(), 0.0);
  for (const auto& c : ens.classes) {
    const double reach = detail::lineshape_reach(c.width, gamma);
    for (const auto& t : transition_frequencies(ens.scheme, c.detuning)) {
      const double pop = c.state(t.ground, t.ground).real();
      if (pop == 0.0 || c.weight == 0.0) continue;
      const double amp = c.weight * pop * ens.scheme.relative_strengths(t.ground, t.excited);
      if (amp == 0.0) continue;
      auto first = std::lower_bound(sorted.begin(), sorted.end(), t.frequency - reach);
      auto last = std::upper_bound(first, sorted.end(), t.frequency + reach);
      for (auto it = first; it != last; ++it) {
        const auto k = static_cast<std::size_t>(it - sorted.begin());
        acc[k] += amp * detail::class_lineshape(*it - t.frequency, c.width, gamma);
      }
    }
  }
  for (std::size_t i = 0; i < order.size(); ++i) out[order[i]] = ens.alpha_scale * acc[i];
  return out;
}

/// Uniform grid from lo to hi inclusive.
inline std::vector<double> linear_grid(double lo, double hi, std::size_t n) {
  std::vector<double> g(n);
  if (n == 1) {
    g[0] = lo;
    return g;
  }
  for (std::size_t i = 0; i < n; ++i)
    g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return g;
}

/// Grid with the given spacing covering [lo, hi].
inline std::vector<double> spaced_grid(double lo, double hi, double step) {
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  return linear_grid(lo, lo + step * static_cast<double>(n - 1), n);
}

struct Peak {
  double frequency = 0.0;
  double height = 0.0;
  double fwhm = 0.0;
};

/// Local maxima of a sampled curve whose height reaches `min_height` and
/// that rise at least `min_prominence` above the higher of the two minima
/// separating them from taller neighbours. Flat tops count once, at their
/// midpoint. FWHM uses linear interpolation of the half-height crossings.
inline std::vector<Peak> find_peaks(const std::vector<double>& grid, const std::vector<double>& y,
                                    double min_height, double min_prominence = 0.0) {
  std::vector<Peak> peaks;
  const std::size_t n = y.size();
  if (n < 3 || grid.size() != n) return peaks;
  std::size_t i = 1;
  while (i + 1 < n) {
    if (y[i] > y[i - 1]) {
      std::size_t j = i;
      while (j + 1 < n && y[j + 1] == y[i]) ++j;
      if (j + 1 < n && y[j + 1] < y[i] && y[i] >= min_height) {
        const std::size_t mid = (i + j) / 2;
        const double h = y[mid];
        double left_min = h;
        for (std::size_t k = i; k-- > 0;) {
          if (y[k] > h) break;
          left_min = std::min(left_min, y[k]);
        }
        double right_min = h;
        for (std::size_t k = j + 1; k < n; ++k) {
          if (y[k] > h) break;
          right_min = std::min(right_min, y[k]);
        }
        if (h - std::max(left_min, right_min) >= min_prominence) {
          Peak p;
          p.frequency = grid[mid];
          p.height = h;
          const double half = 0.5 * h;
          std::size_t l = i;
          while (l > 0 && y[l] > half) --l;
          std::size_t r = j;
          while (r + 1 < n && y[r] > half) ++r;
          auto cross = [&](std::size_t a, std::size_t b) {
            if (y[a] == y[b]) return grid[a];
            return grid[a] + (half - y[a]) * (grid[b] - grid[a]) / (y[b] - y[a]);
          };
          const double left = y[l] <= half ? cross(l, l + 1) : grid[l];
          const double right = y[r] <= half ? cross(r - 1, r) : grid[r];
          p.fwhm = right - left;
          peaks.push_back(p);
        }
      }
      i = j + 1;
    } else {
      ++i;
    }
  }
  return peaks;
}

}  // namespace reic
