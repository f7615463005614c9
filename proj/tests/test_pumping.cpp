#include <gtest/gtest.h>

#include <cmath>

#include "reic/pumping.hpp"

using namespace reic;

namespace {

const Interval kWindow{-51.0, 69.0};
const Interval kPit{0.0, 18.0};
constexpr double kPeak = 1.0;
constexpr double kPeakWidth = 0.2;

Ensemble fresh() { return sample_ensemble(Profile::flat, kWindow, 6000, 1); }

// Burned ensembles are expensive; build each once per test binary.
const Ensemble& simple_pit() {
  static const Ensemble e = create_pit(fresh(), kPit);
  return e;
}
const Ensemble& optimal() {
  static const Ensemble e = optimal_pit(fresh(), kPit, 4);
  return e;
}
const Ensemble& peak() {
  static const Ensemble e = burnback(simple_pit(), kPeak, kPeakWidth);
  return e;
}

Ensemble lone_class(double detuning, const DensityMatrix& state) {
  Ensemble e;
  e.window = kWindow;
  IonClass c;
  c.detuning = detuning;
  c.width = 0.0;
  c.state = state;
  e.classes.push_back(c);
  e.alpha_scale = 1.0;
  e.reference_alpha_l = 1.0;
  return e;
}

TransitionMask only(int g, int e) {
  TransitionMask m{};
  m[static_cast<std::size_t>(3 * g + e)] = true;
  return m;
}

std::vector<Peak> pit_peaks(const Ensemble& e) {
  const auto grid = spaced_grid(kPit.lo, kPit.hi, 0.005);
  const auto a = absorption_spectrum(e, grid);
  const double plateau = e.reference_alpha_l;
  return find_peaks(grid, a, 0.05 * plateau, 0.05 * plateau);
}

}  // namespace

TEST(PumpStep, ZeroRabiLeavesEnsembleUnchanged) {
  const Ensemble e = sample_ensemble(Profile::flat, {-5, 5}, 200, 3);
  const Ensemble out = pump_step(e, BurnPulse{{-2, 2}, 0.0, 500.0, kAllTransitions, "idle"});
  for (std::size_t i = 0; i < e.classes.size(); ++i)
    EXPECT_EQ(out.classes[i].state, e.classes[i].state);
}

TEST(PumpStep, ClassesOutsideScanUntouched) {
  Ensemble e = sample_ensemble(Profile::flat, {-50, -45}, 100, 3);
  e.window = kWindow;
  // Lines span detuning .. detuning + 36.9, so a scan above +60 misses them by
  // more than 1000 linewidths.
  const Ensemble out = pump_step(e, BurnPulse{{60.0, 65.0}, 1.0, 1000.0, kAllTransitions, "far"});
  for (std::size_t i = 0; i < e.classes.size(); ++i)
    EXPECT_EQ(out.classes[i].state, e.classes[i].state);
}

TEST(PumpStep, MatchesClosedFormTwoLevelWithDecay) {
  // Only |0> -> e1 is driven; e1 decays with lifetime 164 us, one third back
  // into |0>. The (|0>, e1) block is linear and solved in closed form.
  const double rabi = 0.02, duration = 300.0, tau = 164.0;
  const Interval scan{-0.05, 0.05};
  const double f = 0.01;
  const double gamma = 0.003;
  const double avg = (std::atan(2 * (scan.hi - f) / gamma) - std::atan(2 * (scan.lo - f) / gamma)) /
                     (M_PI * scan.width());
  const double w = M_PI * M_PI * rabi * rabi * avg;
  const double k = 1.0 / tau;
  // d/dt [g, e] = A [g, e]
  const double a11 = -w, a12 = w + k / 3.0, a21 = w, a22 = -w - k;
  const double s = 0.5 * (a11 + a22);
  const double det = a11 * a22 - a12 * a21;
  const double q = std::sqrt(s * s - det);
  const double ch = std::cosh(q * duration), sh = std::sinh(q * duration) / q;
  const double es = std::exp(s * duration);
  const double g_end = es * (ch + sh * (a11 - s));
  const double e_end = es * (sh * a21);

  const Ensemble out = pump_step(lone_class(f, pure_state(0)),
                                 BurnPulse{scan, rabi, duration, only(0, 0), "probe"});
  const auto p = out.classes[0].populations();
  EXPECT_NEAR(p(0), g_end, 1e-9);
  EXPECT_NEAR(p(3), e_end, 1e-9);
  EXPECT_NEAR(p(1), p(2), 1e-12);
  EXPECT_NEAR(p.sum(), 1.0, 1e-12);
}

TEST(PumpStep, SaturatingScanEmptiesTargetedLevel) {
  Ensemble e = lone_class(0.0, thermal_ground_state());
  const PumpStep step{BurnPulse{{-0.1, 0.1}, 0.1, 1000.0, only(0, 0), "burn"}, 20, 1000.0};
  e = apply_step(std::move(e), step);
  EXPECT_LT(e.classes[0].ground_population(0), 1e-3);
  EXPECT_NEAR(e.classes[0].populations().sum(), 1.0, 1e-9);
}

TEST(PumpStep, TargetedPopulationNeverIncreases) {
  Ensemble e = lone_class(0.0, thermal_ground_state());
  const BurnPulse p{{-0.1, 0.1}, 0.1, 200.0, only(0, 0), "burn"};
  double last = e.classes[0].ground_population(0);
  for (int i = 0; i < 30; ++i) {
    e = pump_step(std::move(e), p);
    const double now = e.classes[0].ground_population(0);
    EXPECT_LE(now, last + 1e-12);
    last = now;
  }
}

TEST(PumpSchedule, RejectsZeroRepetitions) {
  PumpSchedule s;
  s.steps.push_back({BurnPulse{{0, 1}, 0.1, 10.0, kAllTransitions, "x"}, 0, 0.0});
  EXPECT_THROW(apply_schedule(fresh(), s), ConfigError);
}

TEST(CreatePit, TooWideRejected) {
  EXPECT_THROW(create_pit(fresh(), {0.0, 20.0}), PitTooWide);
}

TEST(CreatePit, EmptyEnsembleStaysEmpty) {
  Ensemble e;
  e.window = kWindow;
  EXPECT_TRUE(create_pit(e, kPit).empty());
}

TEST(CreatePit, ResidualBelowOnePercent) {
  EXPECT_LT(pit_residual(simple_pit(), kPit), 0.01);
}

TEST(CreatePit, TracePreservedPerClass) {
  for (const auto& c : simple_pit().classes)
    EXPECT_NEAR(c.populations().sum(), 1.0, 1e-9);
}

TEST(CreatePit, PopulationsStayInSimplex) {
  for (const auto& c : simple_pit().classes)
    for (int i = 0; i < kLevels; ++i) EXPECT_GE(c.state(i, i).real(), 0.0);
}

TEST(CreatePit, RerunningIsStable) {
  const Ensemble again = create_pit(simple_pit(), kPit);
  const auto grid = spaced_grid(kPit.lo + 0.1, kPit.hi - 0.1, 0.01);
  const auto a = absorption_spectrum(simple_pit(), grid);
  const auto b = absorption_spectrum(again, grid);
  double worst = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  EXPECT_LT(worst / simple_pit().reference_alpha_l, 1e-3);
}

TEST(OptimalPit, ZeroIterationsEqualsCreatePit) {
  const Ensemble a = optimal_pit(fresh(), kPit, 0);
  const Ensemble& b = simple_pit();
  ASSERT_EQ(a.classes.size(), b.classes.size());
  for (std::size_t i = 0; i < a.classes.size(); ++i) EXPECT_EQ(a.classes[i].state, b.classes[i].state);
}

TEST(OptimalPit, SteeperEdges) {
  for (PitEdge edge : {PitEdge::lower, PitEdge::upper})
    EXPECT_LT(edge_rise_width(optimal(), kPit, edge), edge_rise_width(simple_pit(), kPit, edge));
}

TEST(OptimalPit, RisesWithinOneMegahertz) {
  for (PitEdge edge : {PitEdge::lower, PitEdge::upper})
    EXPECT_LT(edge_rise_width(optimal(), kPit, edge), 1.0);
  EXPECT_LT(pit_residual(optimal(), kPit), 0.01);
}

namespace {

// Weighted ground populations of classes with every line outside the pit and
// one within `reach` of the given edge.
Populations edge_class_populations(const Ensemble& e, PitEdge edge, double reach) {
  Populations p = Populations::Zero();
  double total = 0.0;
  for (const auto& c : e.classes) {
    bool inside = false;
    double nearest = 1e9;
    for (const auto& t : transition_frequencies(e.scheme, c.detuning)) {
      inside = inside || kPit.contains(t.frequency);
      if ((t.frequency > kPit.hi) == (edge == PitEdge::upper))
        nearest = std::min(nearest, kPit.distance(t.frequency));
    }
    if (inside || nearest > reach) continue;
    p += c.weight * c.populations();
    total += c.weight;
  }
  return p / total;
}

}  // namespace

TEST(OptimalPit, EdgeIonsParkInLevelFacingPit) {
  // Below the pit the |aux> lines are the ones nearest the edge; above it the
  // |0> lines are.
  const int aux = level_index(Ground::aux), zero = level_index(Ground::zero);
  const Populations lo_opt = edge_class_populations(optimal(), PitEdge::lower, 1.0);
  const Populations lo_simple = edge_class_populations(simple_pit(), PitEdge::lower, 1.0);
  EXPECT_GT(lo_opt(aux), 0.5);
  EXPECT_GT(lo_opt(aux), lo_simple(aux));
  const Populations hi_opt = edge_class_populations(optimal(), PitEdge::upper, 1.0);
  EXPECT_GT(hi_opt(zero), 0.5);
}

TEST(OptimalPit, TooWideRejected) {
  EXPECT_THROW(optimal_pit(fresh(), {0.0, 18.5}, 1), PitTooWide);
}

TEST(Burnback, NoBurnbackLeavesPitEmpty) {
  EXPECT_LT(pit_residual(simple_pit(), kPit), 0.01);
  EXPECT_TRUE(pit_peaks(simple_pit()).empty());
}

TEST(Burnback, ThreePeaksWithHyperfineSpacing) {
  const auto peaks = pit_peaks(peak());
  ASSERT_EQ(peaks.size(), 3u);
  EXPECT_NEAR(peaks[0].frequency, kPeak, 0.05);
  EXPECT_NEAR(peaks[1].frequency - peaks[0].frequency, 4.6, 0.1);
  EXPECT_NEAR(peaks[2].frequency - peaks[1].frequency, 4.8, 0.1);
}

TEST(Burnback, PeakWidthTracksRequest) {
  for (const auto& p : pit_peaks(peak())) EXPECT_NEAR(p.fwhm, kPeakWidth, 0.2 * kPeakWidth);
}

TEST(Burnback, PeakClassesHoldNoQubitOnePopulation) {
  double one = 0.0, zero = 0.0;
  for (const auto& c : peak().classes)
    if (std::abs(c.detuning - kPeak) < 0.05) {
      one += c.weight * c.ground_population(1);
      zero += c.weight * c.ground_population(0);
    }
  ASSERT_GT(zero, 0.0);
  EXPECT_LT(one / zero, 1e-2);
}

TEST(Burnback, TracePreservedPerClass) {
  for (const auto& c : peak().classes) EXPECT_NEAR(c.populations().sum(), 1.0, 1e-9);
}

TEST(Burnback, NoPitWithoutBurning) {
  EXPECT_THROW(burnback(fresh(), kPeak, kPeakWidth), NoPit);
}

TEST(Burnback, WidthBelowLinewidthRejected) {
  EXPECT_THROW(burnback(simple_pit(), kPeak, 0.001), ConfigError);
}

TEST(Intervals, SubtractAndMerge) {
  const auto pieces = subtract_intervals({0, 10}, {{2, 3}, {8, 12}, {-1, 0.5}});
  ASSERT_EQ(pieces.size(), 2u);
  EXPECT_EQ(pieces[0], (Interval{0.5, 2}));
  EXPECT_EQ(pieces[1], (Interval{3, 8}));
  const auto merged = merge_intervals({{4, 5}, {0, 1}, {0.5, 2}});
  ASSERT_EQ(merged.size(), 2u);
  EXPECT_EQ(merged[0], (Interval{0, 2}));
}
