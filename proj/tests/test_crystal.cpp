#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "reic/crystal.hpp"

using namespace reic;

namespace {

std::pair<double, double> line_extent(const LevelScheme& s, double detuning) {
  const auto lines = transition_frequencies(s, detuning);
  double lo = lines[0].frequency, hi = lo;
  for (const auto& t : lines) {
    lo = std::min(lo, t.frequency);
    hi = std::max(hi, t.frequency);
  }
  return {lo, hi};
}

Ensemble single_class(const DensityMatrix& state, double detuning = 0.0) {
  Ensemble e;
  e.window = {-10.0, 50.0};
  IonClass c;
  c.detuning = detuning;
  c.width = 0.0;
  c.weight = 1.0;
  c.state = state;
  e.classes.push_back(c);
  e.alpha_scale = 1.0;
  e.reference_alpha_l = 1.0;
  return e;
}

// Lorentzian of FWHM gamma smeared over a box of width w, written out
// independently of the library.
double box_lorentzian(double x, double w, double gamma) {
  if (w == 0.0) return (gamma / 2.0) / (M_PI * (x * x + gamma * gamma / 4.0));
  return (std::atan((x + w / 2.0) / (gamma / 2.0)) - std::atan((x - w / 2.0) / (gamma / 2.0))) /
         (M_PI * w);
}

}  // namespace

TEST(TransitionFrequencies, SpanOfNineLines) {
  LevelScheme s;
  const auto lines = transition_frequencies(s, 0.0);
  EXPECT_EQ(lines.size(), 9u);
  const auto [lo, hi] = line_extent(s, 0.0);
  EXPECT_NEAR(lo, 0.0, 1e-12);
  EXPECT_NEAR(hi, 36.9, 1e-12);
  EXPECT_NEAR(hi - lo, 4.8 + 4.6 + 10.2 + 17.3, 1e-12);
}

TEST(TransitionFrequencies, GroundSpanAndPitBound) {
  LevelScheme s;
  EXPECT_NEAR(s.ground_span(), 27.5, 1e-12);
  EXPECT_NEAR(s.max_pit_width(), 18.1, 1e-12);
}

TEST(TransitionFrequencies, RigidShiftWithDetuning) {
  LevelScheme s;
  const auto a = transition_frequencies(s, 0.0);
  const auto b = transition_frequencies(s, 5.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].ground, b[i].ground);
    EXPECT_EQ(a[i].excited, b[i].excited);
    EXPECT_NEAR(b[i].frequency - a[i].frequency, 5.0, 1e-12);
  }
}

TEST(TransitionFrequencies, QubitPairSplitting) {
  LevelScheme s;
  EXPECT_NEAR(transition_frequency(s, 0.0, level_index(Ground::one), 0) -
                  transition_frequency(s, 0.0, level_index(Ground::zero), 0),
              10.2, 1e-12);
}

TEST(LevelScheme, RejectsNonStochasticStrengths) {
  LevelScheme s;
  s.relative_strengths(0, 0) = 0.9;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(SampleEnsemble, ZeroClassesIsEmpty) {
  const Ensemble e = sample_ensemble(Profile::flat, {-20, 20}, 0, 1);
  EXPECT_TRUE(e.empty());
}

TEST(SampleEnsemble, RejectsInvertedWindow) {
  EXPECT_THROW(sample_ensemble(Profile::flat, {5, -5}, 10, 1), ConfigError);
}

TEST(SampleEnsemble, DeterministicForSeed) {
  const Ensemble a = sample_ensemble(Profile::flat, {-20, 20}, 500, 42);
  const Ensemble b = sample_ensemble(Profile::flat, {-20, 20}, 500, 42);
  ASSERT_EQ(a.classes.size(), b.classes.size());
  for (std::size_t i = 0; i < a.classes.size(); ++i) {
    EXPECT_EQ(a.classes[i].detuning, b.classes[i].detuning);
    EXPECT_EQ(a.classes[i].weight, b.classes[i].weight);
  }
}

TEST(SampleEnsemble, ThermalStartAndInsideWindow) {
  const Ensemble e = sample_ensemble(Profile::gaussian, {-20, 20}, 300, 3);
  for (const auto& c : e.classes) {
    EXPECT_TRUE(e.window.contains(c.detuning));
    for (int g = 0; g < 3; ++g) EXPECT_NEAR(c.ground_population(g), 1.0 / 3.0, 1e-15);
    for (int x = 3; x < 6; ++x) EXPECT_EQ(c.state(x, x).real(), 0.0);
  }
  EXPECT_GT(e.total_weight(), 0.0);
}

TEST(SampleEnsemble, FlatDensityUniformChiSquare) {
  const Ensemble e = sample_ensemble(Profile::flat, {-20, 20}, 10000, 7);
  constexpr int kBins = 40;
  std::vector<double> counts(kBins, 0.0);
  for (const auto& c : e.classes) {
    const int b = std::min(kBins - 1, static_cast<int>((c.detuning + 20.0) / 40.0 * kBins));
    counts[static_cast<std::size_t>(b)] += c.weight;
  }
  const double expected = e.total_weight() / kBins;
  double chi2 = 0.0;
  for (double n : counts) {
    EXPECT_NEAR(n, expected, 0.05 * expected);
    chi2 += (n - expected) * (n - expected) / expected;
  }
  // 1% critical value of chi-square with 39 degrees of freedom.
  EXPECT_LT(chi2, 62.43);
}

TEST(Absorption, NoAbsorbersGivesZero) {
  Ensemble e = sample_ensemble(Profile::flat, {-20, 20}, 200, 1);
  for (auto& c : e.classes) c.state = pure_state(level_index(Excited::e1));
  for (double a : absorption_spectrum(e, linear_grid(-20, 20, 101))) EXPECT_EQ(a, 0.0);
}

TEST(Absorption, SingleClassInZeroShowsThreePeaks) {
  const Ensemble e = single_class(pure_state(0));
  const auto grid = spaced_grid(-2.0, 40.0, 0.001);
  const auto a = absorption_spectrum(e, grid);
  const auto peaks = find_peaks(grid, a, 0.1 * *std::max_element(a.begin(), a.end()));
  ASSERT_EQ(peaks.size(), 3u);
  EXPECT_NEAR(peaks[1].frequency - peaks[0].frequency, 4.6, 1e-3);
  EXPECT_NEAR(peaks[2].frequency - peaks[1].frequency, 4.8, 1e-3);
}

TEST(Absorption, MatchesIndependentLineSum) {
  Ensemble e = sample_ensemble(Profile::flat, {-1.0, 1.0}, 7, 11);
  e.classes[2].state = diagonal_state((Populations() << 0.5, 0.2, 0.3, 0, 0, 0).finished());
  const double gamma = e.scheme.homogeneous_linewidth();
  const std::vector<double> probe{-0.7, 0.0, 4.61, 10.3, 27.6, 33.0};
  const auto a = absorption_spectrum(e, probe);
  for (std::size_t k = 0; k < probe.size(); ++k) {
    double raw = 0.0;
    for (const auto& c : e.classes)
      for (int g = 0; g < 3; ++g)
        for (int ex = 0; ex < 3; ++ex) {
          const double f = c.detuning + e.scheme.ground_offset(g) + e.scheme.excited_offset(ex);
          raw += c.weight * c.state(g, g).real() * e.scheme.relative_strengths(g, ex) *
                 box_lorentzian(probe[k] - f, c.width, gamma);
        }
    // The oracle keeps the full Lorentzian; the library cuts it at 1000 widths.
    EXPECT_NEAR(a[k], e.alpha_scale * raw, 1e-3 * e.alpha_scale * raw);
  }
}

TEST(Absorption, PlateauMatchesConfiguredDepth) {
  const Ensemble e = sample_ensemble(Profile::flat, {-51, 69}, 6000, 1);
  const auto a = absorption_spectrum(e, {9.0});
  EXPECT_NEAR(a[0], 2.0, 0.02);
}

TEST(Absorption, LinearInWeights) {
  const Ensemble e = sample_ensemble(Profile::flat, {-5, 5}, 400, 2);
  Ensemble doubled = e;
  for (auto& c : doubled.classes) c.weight *= 2.0;
  const auto grid = linear_grid(-5, 40, 301);
  const auto a = absorption_spectrum(e, grid);
  const auto b = absorption_spectrum(doubled, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_NEAR(b[i], 2.0 * a[i], 1e-12 * (1.0 + a[i]));
}

TEST(Absorption, LinearInPopulations) {
  const Ensemble mixed = single_class(diagonal_state((Populations() << 0.25, 0.75, 0, 0, 0, 0).finished()));
  const Ensemble zero = single_class(pure_state(0));
  const Ensemble one = single_class(pure_state(1));
  const auto grid = linear_grid(-1, 30, 211);
  const auto m = absorption_spectrum(mixed, grid);
  const auto z = absorption_spectrum(zero, grid);
  const auto o = absorption_spectrum(one, grid);
  for (std::size_t i = 0; i < grid.size(); ++i)
    EXPECT_NEAR(m[i], 0.25 * z[i] + 0.75 * o[i], 1e-12 * (1.0 + m[i]));
}

TEST(Absorption, TruncationErrorBelowTenthPercent) {
  // Mass of a Lorentzian beyond 1000 FWHM on each side is about 2/(pi*2000).
  const double gamma = 0.003;
  const double tail = 1.0 - 2.0 / M_PI * std::atan(2.0 * 1000.0);
  EXPECT_LT(tail, 1e-3);
  EXPECT_EQ(detail::class_lineshape(1000.0 * gamma + 1e-9, 0.0, gamma), 0.0);
}

TEST(FindPeaks, FlatTopCountsOnce) {
  const std::vector<double> x{0, 1, 2, 3, 4, 5};
  const std::vector<double> y{0, 1, 2, 2, 1, 0};
  const auto p = find_peaks(x, y, 0.5);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_NEAR(p[0].height, 2.0, 0.0);
}
