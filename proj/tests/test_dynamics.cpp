#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "reic/dynamics.hpp"

using namespace reic;

namespace {

// Only |g> <-> e_g couples, so |0> <-> e1 is an exact two-level system.
LevelScheme isolated_scheme() {
  LevelScheme s;
  s.relative_strengths = Eigen::Matrix3d::Identity();
  return s;
}

Waveform square(double amplitude, double duration, std::size_t n, double carrier = 0.0) {
  Waveform w;
  w.sample_rate = static_cast<double>(n) / duration;
  w.carrier = carrier;
  w.samples.assign(n, Complex{amplitude, 0.0});
  return w;
}

double trace_real(const DensityMatrix& r) { return r.trace().real(); }

double min_eigenvalue(const DensityMatrix& r) {
  Eigen::SelfAdjointEigenSolver<DensityMatrix> es(r);
  return es.eigenvalues().minCoeff();
}

SechypParams transfer_pulse() {
  SechypParams p;
  p.center_frequency = 0.0;  // |0> -> e1 of the class at zero detuning
  return p;
}

double mean_transfer(double rabi_factor) {
  const LevelScheme s;
  const double span = 100.0 * s.homogeneous_linewidth();
  SechypParams p = transfer_pulse();
  p.peak_rabi *= rabi_factor;
  EnsembleDrive d;
  d.waveforms = {sechyp(p)};
  d.method = Propagator::unitary;
  Ensemble e = class_ensemble(linear_grid(-span / 2, span / 2, 21), pure_state(0), s);
  e = ensemble_propagate(std::move(e), d, DecoherenceParams::none(), p.duration);
  return mean_population(e, level_index(Excited::e1));
}

}  // namespace

TEST(Decoherence, DefaultsAndValidation) {
  const DecoherenceParams d;
  EXPECT_EQ(d.optical_t1, 164.0);
  EXPECT_EQ(d.optical_t2, 100.0);
  EXPECT_EQ(d.hyperfine_t2, 500.0);
  EXPECT_EQ(d.hyperfine_t1, 90.0);
  DecoherenceParams bad;
  bad.optical_t2 = 400.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = {};
  bad.optical_t1 = -1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Propagate, ZeroDriveZeroDecoherenceIsIdentity) {
  DensityMatrix rho = DensityMatrix::Zero();
  rho(0, 0) = 0.6;
  rho(1, 1) = 0.4;
  rho(0, 1) = rho(1, 0) = 0.3;
  DriveHamiltonian h;
  const DensityMatrix out = propagate(rho, h, DecoherenceParams::none(), 50.0, 0.0);
  EXPECT_LT((out - rho).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Propagate, ResonantPiPulseInverts) {
  const LevelScheme s = isolated_scheme();
  const double amp = 0.5;
  // Rabi frequency on this line is coupling x amplitude, coupling = sqrt(3).
  const double t_pi = 1.0 / (2.0 * std::sqrt(3.0) * amp);
  DriveHamiltonian h{s, 0.0, {square(amp, t_pi, 200)}};
  const DensityMatrix out = propagate(pure_state(0), h, DecoherenceParams::none(), t_pi);
  EXPECT_GE(out(3, 3).real(), 1.0 - 1e-6);
  const DensityMatrix exact = propagate_unitary(pure_state(0), h, t_pi);
  EXPECT_GE(exact(3, 3).real(), 1.0 - 1e-6);
}

TEST(Propagate, HalfPiPulseMatchesRabiFormula) {
  const LevelScheme s = isolated_scheme();
  const double amp = 0.3, t = 0.4;
  DriveHamiltonian h{s, 0.0, {square(amp, t, 100)}};
  const DensityMatrix out = propagate(pure_state(0), h, DecoherenceParams::none(), t);
  const double rabi = std::sqrt(3.0) * amp;
  EXPECT_NEAR(out(3, 3).real(), std::pow(std::sin(M_PI * rabi * t), 2), 1e-8);
}

TEST(Propagate, ExcitedDecaysWithOpticalLifetime) {
  DriveHamiltonian h;
  const DensityMatrix out = propagate(pure_state(3), h, DecoherenceParams{}, 164.0, 0.0);
  EXPECT_NEAR(out(3, 3).real(), std::exp(-1.0), 1e-4);
  EXPECT_NEAR(trace_real(out), 1.0, 1e-10);
  // Uniform branching returns the population equally to the grounds.
  EXPECT_NEAR(out(0, 0).real(), out(2, 2).real(), 1e-12);
}

TEST(Propagate, OpticalCoherenceDecaysWithT2) {
  DensityMatrix rho = DensityMatrix::Zero();
  rho(0, 0) = rho(3, 3) = 0.5;
  rho(0, 3) = rho(3, 0) = 0.5;
  DriveHamiltonian h;
  const DecoherenceParams d;
  const DensityMatrix out = propagate(rho, h, d, 100.0, 0.0);
  EXPECT_NEAR(std::abs(out(0, 3)), 0.5 * std::exp(-1.0), 1e-6);
}

TEST(Propagate, TraceAndPositivityUnderNoisyDrive) {
  const LevelScheme s;
  SechypParams p = transfer_pulse();
  DriveHamiltonian h{s, 0.02, {two_color(sechyp(p), 10.2, 0.3)}};
  const DensityMatrix out = propagate(pure_state(0), h, DecoherenceParams{}, p.duration);
  EXPECT_NEAR(trace_real(out), 1.0, 1e-8);
  EXPECT_GT(min_eigenvalue(out), -1e-8);
  EXPECT_LT((out - out.adjoint()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Propagate, CoherentEvolutionKeepsPurity) {
  const LevelScheme s;
  SechypParams p = transfer_pulse();
  DriveHamiltonian h{s, 0.05, {sechyp(p)}};
  const DensityMatrix out = propagate(pure_state(0), h, DecoherenceParams::none(), p.duration);
  EXPECT_NEAR((out * out).trace().real(), 1.0, 1e-6);
}

TEST(Propagate, HalvingStepConverges) {
  const LevelScheme s;
  SechypParams p = transfer_pulse();
  DriveHamiltonian h{s, 0.03, {sechyp(p)}};
  IntegratorOptions coarse, fine;
  fine.steps_per_period = 2.0 * coarse.steps_per_period;
  const DecoherenceParams d;
  const DensityMatrix a = propagate(pure_state(0), h, d, p.duration, std::nullopt, coarse);
  const DensityMatrix b = propagate(pure_state(0), h, d, p.duration, std::nullopt, fine);
  for (int i = 0; i < kLevels; ++i) EXPECT_NEAR(a(i, i).real(), b(i, i).real(), 1e-6);
}

TEST(Propagate, MasterEquationAgreesWithUnitaryWithoutNoise) {
  const LevelScheme s;
  SechypParams p = transfer_pulse();
  DriveHamiltonian h{s, -0.04, {two_color(sechyp(p), 10.2, 1.1)}};
  const DensityMatrix a = propagate(pure_state(0), h, DecoherenceParams::none(), p.duration);
  const DensityMatrix b = propagate_unitary(pure_state(0), h, p.duration);
  // RK4 at 50 steps per fastest period leaves a few 1e-6 on coherences.
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(Propagate, OversizedStepRejected) {
  const LevelScheme s;
  DriveHamiltonian h{s, 0.0, {sechyp(transfer_pulse())}};
  IntegratorOptions opt;
  opt.max_step = 1.0;
  EXPECT_THROW(propagate(pure_state(0), h, DecoherenceParams{}, 1.0, std::nullopt, opt),
               StepSizeTooLarge);
}

TEST(Propagate, NegativeDurationRejected) {
  DriveHamiltonian h;
  EXPECT_THROW(propagate(pure_state(0), h, DecoherenceParams{}, -1.0), ConfigError);
}

TEST(EvolutionOperator, IsUnitary) {
  const LevelScheme s;
  DriveHamiltonian h{s, 0.01, {two_color(sechyp(transfer_pulse()), 10.2, 0.5)}};
  const Operator6 u = evolution_operator(h, 16.4);
  EXPECT_LT((u.adjoint() * u - Operator6::Identity()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Ensemble, SingleClassMatchesPropagate) {
  const LevelScheme s;
  SechypParams p = transfer_pulse();
  EnsembleDrive d;
  d.waveforms = {sechyp(p)};
  Ensemble e = class_ensemble({0.07}, pure_state(0), s);
  e = ensemble_propagate(std::move(e), d, DecoherenceParams{}, p.duration);
  DriveHamiltonian h{s, 0.07, d.waveforms};
  const DensityMatrix want = propagate(pure_state(0), h, DecoherenceParams{}, p.duration);
  EXPECT_EQ(e.classes[0].state, want);
}

TEST(Ensemble, SechypTransferOverHundredLinewidths) {
  EXPECT_GE(mean_transfer(1.0), 0.97);
}

TEST(Ensemble, SechypTransferRobustToDoubledIntensity) {
  const double base = mean_transfer(1.0);
  const double boosted = mean_transfer(2.0);
  EXPECT_LT(std::abs(boosted - base) / base, 0.005);
}

TEST(Ensemble, ClassOrderDoesNotChangeAggregates) {
  const LevelScheme s;
  SechypParams p = transfer_pulse();
  EnsembleDrive d;
  d.waveforms = {sechyp(p)};
  d.rabi_scatter = 0.1;
  d.seed = 9;
  d.method = Propagator::unitary;
  auto det = linear_grid(-0.2, 0.2, 9);
  Ensemble a = ensemble_propagate(class_ensemble(det, pure_state(0), s), d, DecoherenceParams::none(), p.duration);
  std::reverse(det.begin(), det.end());
  std::rotate(det.begin(), det.begin() + 3, det.end());
  Ensemble b = ensemble_propagate(class_ensemble(det, pure_state(0), s), d, DecoherenceParams::none(), p.duration);
  for (int l = 0; l < kLevels; ++l) EXPECT_EQ(mean_population(a, l), mean_population(b, l));
  EXPECT_EQ(mean_state(a), mean_state(b));
}

TEST(Ensemble, RabiScatterIsDeterministicAndBounded) {
  for (double d : {-0.1, 0.0, 0.37}) {
    const double a = class_rabi_scale(d, 0.2, 5);
    EXPECT_EQ(a, class_rabi_scale(d, 0.2, 5));
    EXPECT_GE(a, 0.8);
    EXPECT_LE(a, 1.2);
  }
  EXPECT_EQ(class_rabi_scale(0.3, 0.0, 5), 1.0);
  EnsembleDrive bad;
  bad.rabi_scatter = 1.5;
  EXPECT_THROW(ensemble_propagate(class_ensemble({0.0}, pure_state(0)), bad, DecoherenceParams{}, 1.0),
               ConfigError);
}
