#pragma once

// Incoherent optical pumping. A scanned burn pulse is replaced by its
// time-averaged rate: the laser dwells uniformly on every frequency of the
// scan interval, so each transition sees the Lorentzian averaged over the
// scan. Populations then follow linear rate equations, solved exactly per
// class with a matrix exponential.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "reic/crystal.hpp"
#include "reic/errors.hpp"
#include "reic/parallel.hpp"
#include "reic/types.hpp"

namespace reic {

using RateMatrix = Eigen::Matrix<double, kLevels, kLevels>;

/// Mask of the nine (ground, excited) transitions a pulse may drive,
/// indexed 3 * ground + excited.
using TransitionMask = std::array<bool, 9>;
inline constexpr TransitionMask kAllTransitions{true, true, true, true, true,
                                                true, true, true, true};

struct BurnPulse {
  Interval scan;
  double rabi_frequency = 0.0;  // MHz, for a transition of unit coupling
  double duration = 0.0;        // µs
  TransitionMask target = kAllTransitions;
  std::string label;

  void validate(const Interval& window) const {
    if (!(duration > 0.0)) throw ConfigError("burn pulse duration must be positive");
    if (rabi_frequency < 0.0) throw ConfigError("burn pulse Rabi frequency must be non-negative");
    if (scan.hi < scan.lo) throw ConfigError("burn pulse scan interval must satisfy min <= max");
    if (scan.lo < window.lo - 1e-9 || scan.hi > window.hi + 1e-9)
      throw ConfigError("burn pulse scan interval lies outside the simulation window");
  }
};

struct PumpStep {
  BurnPulse pulse;
  int repetitions = 1;
  /// Dark time after every repetition, µs.
  double relaxation = 0.0;
};

struct PumpSchedule {
  std::vector<PumpStep> steps;

  bool empty() const { return steps.empty(); }
  void validate(const Interval& window) const {
    for (const auto& s : steps) {
      s.pulse.validate(window);
      if (s.repetitions < 1) throw ConfigError("pump step repetitions must be >= 1");
      if (s.relaxation < 0.0) throw ConfigError("relaxation interval must be non-negative");
    }
  }
  PumpSchedule& then(const PumpSchedule& other) {
    steps.insert(steps.end(), other.steps.begin(), other.steps.end());
    return *this;
  }
};

struct PumpingOptions {
  double optical_lifetime = 164.0;  // µs
  /// Ground hyperfine population lifetime, µs. Infinite by default because a
  /// burn sequence is far shorter than it.
  double hyperfine_lifetime = std::numeric_limits<double>::infinity();
};

/// Scan-averaged Lorentzian (unit area, FWHM gamma) seen by a line at f.
inline double scan_averaged_lineshape(const Interval& scan, double f, double gamma) {
  if (scan.distance(f) > 1000.0 * gamma) return 0.0;
  if (scan.width() <= 0.0) return detail::class_lineshape(f - scan.lo, 0.0, gamma);
  return (std::atan(2.0 * (scan.hi - f) / gamma) - std::atan(2.0 * (scan.lo - f) / gamma)) /
         (kPi * scan.width());
}

/// Rate generator without drive: optical decay by branching plus optional
/// ground relaxation. Columns sum to zero.
inline RateMatrix relaxation_generator(const LevelScheme& scheme, const PumpingOptions& opt) {
  RateMatrix m = RateMatrix::Zero();
  const double gamma = 1.0 / opt.optical_lifetime;
  for (int e = 0; e < 3; ++e) {
    const int ie = kGroundLevels + e;
    for (int g = 0; g < 3; ++g) {
      const double r = gamma * scheme.branching(g, e);
      m(g, ie) += r;
      m(ie, ie) -= r;
    }
  }
  if (std::isfinite(opt.hyperfine_lifetime) && opt.hyperfine_lifetime > 0.0) {
    const double k = 0.5 / opt.hyperfine_lifetime;
    for (int g = 0; g < 3; ++g)
      for (int h = 0; h < 3; ++h)
        if (g != h) {
          m(h, g) += k;
          m(g, g) -= k;
        }
  }
  return m;
}

/// Full generator for one class under a burn pulse. Returns nullopt when
/// the pulse drives none of the class's transitions.
inline std::optional<RateMatrix> pumping_generator(const LevelScheme& scheme, double detuning,
                                                   const BurnPulse& pulse,
                                                   const RateMatrix& relax) {
  if (pulse.rabi_frequency == 0.0) return std::nullopt;
  const double gamma = scheme.homogeneous_linewidth();
  RateMatrix m = relax;
  bool driven = false;
  for (const auto& t : transition_frequencies(scheme, detuning)) {
    if (!pulse.target[static_cast<std::size_t>(3 * t.ground + t.excited)]) continue;
    const double c = scheme.coupling(t.ground, t.excited);
    const double w = kPi * kPi * pulse.rabi_frequency * pulse.rabi_frequency * c * c *
                     scan_averaged_lineshape(pulse.scan, t.frequency, gamma);
    if (w == 0.0) continue;
    driven = true;
    const int g = t.ground;
    const int e = kGroundLevels + t.excited;
    m(e, g) += w;
    m(g, g) -= w;
    m(g, e) += w;
    m(e, e) -= w;
  }
  if (!driven) return std::nullopt;
  return m;
}

namespace detail {

inline Populations clamp_to_simplex(Populations p) {
  double sum = 0.0;
  for (int i = 0; i < kLevels; ++i) {
    if (p(i) < 0.0) p(i) = 0.0;
    sum += p(i);
  }
  if (sum > 0.0) p /= sum;
  return p;
}

inline bool has_excited_population(const Populations& p) {
  return p(3) != 0.0 || p(4) != 0.0 || p(5) != 0.0;
}

}  // namespace detail

/// Applies one step (repetitions of pulse followed by relaxation) to every
/// class. Classes the pulse cannot reach and that hold no excited population
/// are left bit-for-bit unchanged.
inline Ensemble apply_step(Ensemble ens, const PumpStep& step, const PumpingOptions& opt = {}) {
  step.pulse.validate(ens.window);
  if (step.repetitions < 1) throw ConfigError("pump step repetitions must be >= 1");
  const RateMatrix relax = relaxation_generator(ens.scheme, opt);
  const RateMatrix relax_map = (relax * step.relaxation).exp();
  const RateMatrix idle_map = (relax * step.pulse.duration).exp();
  const bool ground_is_stable = !std::isfinite(opt.hyperfine_lifetime);

  parallel_for(ens.classes.size(), [&](std::size_t i) {
    IonClass& c = ens.classes[i];
    Populations p = c.populations();
    const auto gen = pumping_generator(ens.scheme, c.detuning, step.pulse, relax);
    if (!gen && !detail::has_excited_population(p) && ground_is_stable) return;
    const RateMatrix pulse_map = gen ? RateMatrix((*gen * step.pulse.duration).exp()) : idle_map;
    const RateMatrix cycle = relax_map * pulse_map;
    for (int r = 0; r < step.repetitions; ++r) p = cycle * p;
    c.state = diagonal_state(detail::clamp_to_simplex(p));
  });
  return ens;
}

/// Single burn pulse with no dark time afterwards.
inline Ensemble pump_step(Ensemble ens, const BurnPulse& pulse, const PumpingOptions& opt = {}) {
  return apply_step(std::move(ens), PumpStep{pulse, 1, 0.0}, opt);
}

inline Ensemble apply_schedule(Ensemble ens, const PumpSchedule& schedule,
                               const PumpingOptions& opt = {}) {
  schedule.validate(ens.window);
  for (const auto& step : schedule.steps) ens = apply_step(std::move(ens), step, opt);
  return ens;
}

/// Parameters of the built-in pit burning sequence: full-width burn rounds
/// followed by polish rounds that stay `polish_margin` inside the pit edges.
/// The polish rounds empty the interior without driving, through their
/// Lorentzian wings, the lines of ions parked just outside the edges.
struct PitRecipe {
  double rabi_frequency = 0.1;    // MHz
  double pulse_duration = 1000.0;  // µs
  double relaxation = 0.0;         // µs
  int rounds = 10;
  double polish_margin = 0.05;     // MHz
  int polish_rounds = 20;
  /// Final dark time so no excited population is left, µs.
  double settle = 2000.0;
};

inline PumpSchedule default_pit_schedule(const Interval& pit, const PitRecipe& recipe = {}) {
  PumpSchedule s;
  BurnPulse burn{pit, recipe.rabi_frequency, recipe.pulse_duration, kAllTransitions, "pit"};
  s.steps.push_back({burn, recipe.rounds, recipe.relaxation});
  const Interval inner{pit.lo + recipe.polish_margin, pit.hi - recipe.polish_margin};
  if (recipe.polish_rounds > 0 && inner.hi > inner.lo) {
    BurnPulse polish{inner, recipe.rabi_frequency, recipe.pulse_duration, kAllTransitions,
                     "polish"};
    s.steps.push_back({polish, recipe.polish_rounds, recipe.relaxation});
  }
  BurnPulse idle{pit, 0.0, recipe.settle, kAllTransitions, "settle"};
  s.steps.push_back({idle, 1, 0.0});
  return s;
}

inline void check_pit_width(const LevelScheme& scheme, const Interval& pit) {
  if (!(pit.hi > pit.lo)) throw ConfigError("pit interval must satisfy min < max");
  if (pit.width() > scheme.max_pit_width() + 1e-9)
    throw PitTooWide("pit width " + std::to_string(pit.width()) + " MHz exceeds the " +
                     std::to_string(scheme.max_pit_width()) + " MHz hyperfine bound");
}

/// Empties `pit` of absorbers. An empty schedule selects the built-in one.
inline Ensemble create_pit(Ensemble ens, const Interval& pit, const PumpSchedule& schedule = {},
                           const PumpingOptions& opt = {}) {
  check_pit_width(ens.scheme, pit);
  if (ens.empty()) return ens;
  const PumpSchedule& s = schedule.empty() ? default_pit_schedule(pit) : schedule;
  return apply_schedule(std::move(ens), s, opt);
}

/// Parameters of the edge-cleaning iterations.
struct OptimalPitRecipe {
  double clean_rabi = 0.1;
  double clean_duration = 1000.0;
  double clean_relaxation = 0.0;
  int clean_repetitions = 5;
  /// Gap kept between the cleaning bands and the region they protect, MHz.
  double guard = 0.2;
  PitRecipe reburn{};
  PitRecipe initial{};
};

/// Cleaning bands for the pit edges. Ions whose strongest-edge lines sit
/// just outside the pit still hold population in |0> or |1>; scanning the
/// far band of their other lines moves that population into the ground level
/// whose lines avoid the pit, which for edge ions is the one that absorbs
/// right at the edge. Returns {lower band, upper band} clipped to `window`.
inline std::pair<Interval, Interval> edge_cleaning_bands(const LevelScheme& scheme,
                                                         const Interval& pit,
                                                         const Interval& window, double guard) {
  const double lower_zone = scheme.excited_splittings[1];
  const double upper_zone = scheme.excited_splittings[0];
  Interval lower{pit.lo - scheme.total_span() - lower_zone,
                 pit.lo - lower_zone - scheme.excited_span() - guard};
  Interval upper{pit.hi + upper_zone + scheme.excited_span() + guard,
                 pit.hi + scheme.total_span() + upper_zone};
  lower.lo = std::max(lower.lo, window.lo);
  upper.hi = std::min(upper.hi, window.hi);
  return {lower, upper};
}

inline PumpSchedule edge_cleaning_schedule(const LevelScheme& scheme, const Interval& pit,
                                           const Interval& window,
                                           const OptimalPitRecipe& recipe) {
  const auto [lower, upper] = edge_cleaning_bands(scheme, pit, window, recipe.guard);
  PumpSchedule s;
  for (const auto& band : {lower, upper}) {
    if (band.hi <= band.lo) continue;
    BurnPulse p{band, recipe.clean_rabi, recipe.clean_duration, kAllTransitions, "edge-clean"};
    s.steps.push_back({p, recipe.clean_repetitions, recipe.clean_relaxation});
  }
  s.then(default_pit_schedule(pit, recipe.reburn));
  return s;
}

/// Pit with sharpened edges: the plain pit followed by `n_iterations` rounds
/// of edge cleaning and re-burning of the interior.
inline Ensemble optimal_pit(Ensemble ens, const Interval& pit, int n_iterations,
                            const OptimalPitRecipe& recipe = {}, const PumpingOptions& opt = {}) {
  if (n_iterations < 0) throw ConfigError("n_iterations must be >= 0");
  check_pit_width(ens.scheme, pit);
  if (ens.empty()) return ens;
  ens = create_pit(std::move(ens), pit, default_pit_schedule(pit, recipe.initial), opt);
  const PumpSchedule round = edge_cleaning_schedule(ens.scheme, pit, ens.window, recipe);
  for (int i = 0; i < n_iterations; ++i) ens = apply_schedule(std::move(ens), round, opt);
  return ens;
}

// ---------------------------------------------------------------------------
// Pit diagnostics

struct PitProbe {
  double resolution = 0.005;  // MHz
  /// Margin at each pit edge excluded from the residual, MHz. The Lorentzian
  /// wings of the absorbing wall reach into the pit by about
  /// linewidth / (2 pi distance) of the plateau.
  double edge_guard = 0.1;
};

/// Largest optical depth inside the pit, less the edge guards, as a fraction
/// of the unburned plateau.
inline double pit_residual(const Ensemble& ens, const Interval& pit, const PitProbe& probe = {}) {
  const Interval inner{pit.lo + probe.edge_guard, pit.hi - probe.edge_guard};
  if (inner.hi <= inner.lo || ens.reference_alpha_l <= 0.0) return 0.0;
  const auto grid = spaced_grid(inner.lo, inner.hi, probe.resolution);
  const auto a = absorption_spectrum(ens, grid);
  return *std::max_element(a.begin(), a.end()) / ens.reference_alpha_l;
}

enum class PitEdge { lower, upper };

/// Distance between the 10% and 90% plateau crossings walking outward from
/// one pit edge. Infinite when αL does not reach 90% within `search` MHz.
inline double edge_rise_width(const Ensemble& ens, const Interval& pit, PitEdge edge,
                              double search = 12.0, double resolution = 0.005) {
  const double sign = edge == PitEdge::lower ? -1.0 : 1.0;
  const double start = edge == PitEdge::lower ? pit.lo + 0.5 : pit.hi - 0.5;
  const auto n = static_cast<std::size_t>(std::ceil((search + 0.5) / resolution)) + 1;
  std::vector<double> grid(n);
  for (std::size_t i = 0; i < n; ++i) grid[i] = start + sign * resolution * static_cast<double>(i);
  const auto a = absorption_spectrum(ens, grid);
  const double lo_level = 0.1 * ens.reference_alpha_l;
  const double hi_level = 0.9 * ens.reference_alpha_l;
  auto crossing = [&](double level) -> std::optional<double> {
    for (std::size_t i = 1; i < n; ++i)
      if (a[i] >= level && a[i - 1] < level) {
        const double f = (level - a[i - 1]) / (a[i] - a[i - 1]);
        return (static_cast<double>(i - 1) + f) * resolution;
      }
    return std::nullopt;
  };
  const auto x10 = crossing(lo_level);
  if (!x10) return std::numeric_limits<double>::infinity();
  // First 90% crossing beyond the 10% crossing.
  for (std::size_t i = 1; i < n; ++i) {
    const double x = static_cast<double>(i) * resolution;
    if (x < *x10) continue;
    if (a[i] >= hi_level) {
      const double f = a[i] == a[i - 1] ? 0.0 : (hi_level - a[i - 1]) / (a[i] - a[i - 1]);
      return (static_cast<double>(i - 1) + f) * resolution - *x10;
    }
  }
  return std::numeric_limits<double>::infinity();
}

// ---------------------------------------------------------------------------
// Burnback

struct BurnbackRecipe {
  /// Rabi frequencies are quoted for a scan as wide as the pit; narrower
  /// scans are driven at the same scan-averaged rate.
  double rabi_frequency = 0.1;
  double pulse_duration = 2000.0;
  /// Alternations of the aux and |1> depletion pulses per block. Each pulse
  /// hands part of what it removes to the other level, so one pass leaves
  /// about a quarter behind.
  int depletion_cycles = 8;
  int rounds = 4;
  /// Interior cleaning inside every round.
  double clean_rabi = 0.1;
  double clean_duration = 500.0;
  /// Sweeps over all cleaning pieces per round.
  int clean_passes = 8;
  /// Margin between the peak lines and the cleaning scans, MHz.
  double guard = 0.02;
  /// Closing block: a last |1> depletion (|aux> is invisible to readout and
  /// gates), then cleaning restricted to the in-pit lines of the other
  /// classes that scan reaches, kept `polish_guard` away from the peak lines.
  int polish_passes = 8;
  double polish_guard = 0.1;
  /// Extra reach of the depletion scan when listing stray classes, MHz.
  double polish_margin = 0.05;
  double settle = 2000.0;
  /// Pit detection threshold as a fraction of the plateau.
  double empty_threshold = 0.01;
  double probe_resolution = 0.01;
};

/// Finds the empty region of the spectrum around `[lo, hi]`. Throws NoPit if
/// any point in it absorbs above threshold.
inline Interval locate_pit(const Ensemble& ens, const Interval& must_cover, double threshold,
                           double resolution) {
  const double level = threshold * ens.reference_alpha_l;
  const auto inner = spaced_grid(must_cover.lo, must_cover.hi, resolution);
  const auto a_inner = absorption_spectrum(ens, inner);
  for (std::size_t i = 0; i < inner.size(); ++i)
    if (!(a_inner[i] < level))
      throw NoPit("no pit at " + std::to_string(inner[i]) + " MHz (alphaL " +
                  std::to_string(a_inner[i]) + ")");
  const double reach = ens.scheme.max_pit_width() + 1.0;
  auto walk = [&](double from, double dir) {
    const auto n = static_cast<std::size_t>(std::ceil(reach / resolution));
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = from + dir * resolution * static_cast<double>(i + 1);
    const auto a = absorption_spectrum(ens, g);
    double last = from;
    for (std::size_t i = 0; i < n; ++i) {
      if (!(a[i] < level)) break;
      last = g[i];
    }
    return last;
  };
  return {walk(must_cover.lo, -1.0), walk(must_cover.hi, 1.0)};
}

/// Subtracts the union of `holes` from `base`, returning the remaining
/// pieces in order.
inline std::vector<Interval> subtract_intervals(const Interval& base, std::vector<Interval> holes) {
  std::sort(holes.begin(), holes.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  std::vector<Interval> out;
  double cursor = base.lo;
  for (const auto& h : holes) {
    if (h.hi <= cursor) continue;
    if (h.lo > cursor) out.push_back({cursor, std::min(h.lo, base.hi)});
    cursor = std::max(cursor, h.hi);
    if (cursor >= base.hi) break;
  }
  if (cursor < base.hi) out.push_back({cursor, base.hi});
  out.erase(std::remove_if(out.begin(), out.end(), [](const Interval& i) { return i.hi <= i.lo; }),
            out.end());
  return out;
}

inline std::vector<Interval> merge_intervals(std::vector<Interval> v) {
  std::sort(v.begin(), v.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  std::vector<Interval> out;
  for (const auto& i : v) {
    if (!out.empty() && i.lo <= out.back().hi)
      out.back().hi = std::max(out.back().hi, i.hi);
    else
      out.push_back(i);
  }
  return out;
}

/// Schedule that parks a narrow class band in |0>: every round empties
/// |aux> and |1> of those classes through their highest lines, then cleans
/// the pit interior away from the band's |0> lines.
inline PumpSchedule burnback_schedule(const LevelScheme& scheme, const Interval& pit,
                                      const Interval& window, double peak_frequency,
                                      double peak_width, const BurnbackRecipe& recipe) {
  const Interval band{peak_frequency - 0.5 * peak_width, peak_frequency + 0.5 * peak_width};
  const int top = kExcitedLevels - 1;
  std::vector<BurnPulse> depletion;
  for (int g : {level_index(Ground::aux), level_index(Ground::one)}) {
    const Interval shifted = band.shifted(scheme.ground_offset(g) + scheme.excited_offset(top));
    if (shifted.lo < window.lo || shifted.hi > window.hi)
      throw ConfigError("burnback band falls outside the simulation window");
    depletion.push_back({shifted, recipe.rabi_frequency * std::sqrt(shifted.width() / pit.width()),
                         recipe.pulse_duration, kAllTransitions, "burnback"});
  }
  std::vector<Interval> holes;
  for (int e = 0; e < kExcitedLevels; ++e)
    holes.push_back(band.shifted(scheme.excited_offset(e)).widened(recipe.guard));
  const auto pieces = subtract_intervals(pit, holes);

  // In-pit lines of every class with some transition under the |1> depletion
  // scan.
  const BurnPulse& last = depletion.back();
  std::vector<Interval> polish_holes;
  for (const auto& h : holes) polish_holes.push_back(h.widened(recipe.polish_guard - recipe.guard));
  std::vector<Interval> stray;
  for (const auto& t : transition_frequencies(scheme, 0.0)) {
    const Interval classes = last.scan.widened(recipe.polish_margin).shifted(-t.frequency);
    for (const auto& u : transition_frequencies(scheme, 0.0)) {
      const Interval line = classes.shifted(u.frequency);
      const Interval clipped{std::max(line.lo, pit.lo), std::min(line.hi, pit.hi)};
      if (clipped.hi <= clipped.lo) continue;
      for (const auto& piece : subtract_intervals(clipped, polish_holes)) stray.push_back(piece);
    }
  }
  stray = merge_intervals(std::move(stray));

  if (recipe.depletion_cycles < 1) throw ConfigError("depletion_cycles must be >= 1");
  PumpSchedule s;
  const auto deplete = [&] {
    for (int k = 0; k < recipe.depletion_cycles; ++k)
      for (const auto& p : depletion) s.steps.push_back({p, 1, 0.0});
  };
  const auto clean = [&](const std::vector<Interval>& pieces, int passes) {
    for (int pass = 0; pass < passes; ++pass)
      for (const auto& piece : pieces)
        s.steps.push_back(
            {BurnPulse{piece, recipe.clean_rabi * std::sqrt(piece.width() / pit.width()),
                       recipe.clean_duration, kAllTransitions, "clean"},
             1, 0.0});
  };
  for (int r = 0; r < recipe.rounds; ++r) {
    deplete();
    clean(pieces, recipe.clean_passes);
  }
  s.steps.push_back({last, 1, 0.0});
  clean(stray, recipe.polish_passes);
  s.steps.push_back({BurnPulse{pit, 0.0, recipe.settle, kAllTransitions, "settle"}, 1, 0.0});
  return s;
}

/// Creates an ensemble qubit peak: classes whose |0>->|e1> line lies within
/// peak_width of peak_frequency end in |0>, and the pit shows only their
/// three |0> lines.
inline Ensemble burnback(Ensemble ens, double peak_frequency, double peak_width,
                         const BurnbackRecipe& recipe = {}, const PumpingOptions& opt = {}) {
  if (!(peak_width >= ens.scheme.homogeneous_linewidth()))
    throw ConfigError("peak width must be at least the homogeneous linewidth");
  if (ens.empty()) throw NoPit("empty ensemble has no pit");
  const Interval lines{peak_frequency - 0.5 * peak_width,
                       peak_frequency + ens.scheme.excited_span() + 0.5 * peak_width};
  const Interval pit = locate_pit(ens, lines, recipe.empty_threshold, recipe.probe_resolution);
  const PumpSchedule s =
      burnback_schedule(ens.scheme, pit, ens.window, peak_frequency, peak_width, recipe);
  return apply_schedule(std::move(ens), s, opt);
}

}  // namespace reic
