#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "reic/gates.hpp"

using namespace reic;

namespace {

const Complex I(0.0, 1.0);

// The dark state picks up e^{i theta}, the bright state is left alone.
Qubit oracle_u_dark(double theta, double phi) {
  QubitVector b, d;
  b << 1.0 / std::sqrt(2.0), -std::polar(1.0, -phi) / std::sqrt(2.0);
  d << 1.0 / std::sqrt(2.0), std::polar(1.0, -phi) / std::sqrt(2.0);
  return b * b.adjoint() + std::polar(1.0, theta) * d * d.adjoint();
}

double max_abs(const Qubit& m) { return m.cwiseAbs().maxCoeff(); }

const DarkGateParams& params() {
  static const DarkGateParams p = calibrated(DarkGateParams{});
  return p;
}

Qubit simulated(const GateSpec& g, double detuning = 0.0) {
  return gate_in_frame(dark_state_gate(g, params()), LevelScheme{}, detuning);
}

QubitVector ket(Complex a, Complex b) {
  QubitVector v;
  v << a, b;
  return v;
}

}  // namespace

TEST(BrightDark, OrthonormalForAnyPhase) {
  for (double phi : {0.0, 0.3, 1.7, M_PI, 5.9}) {
    const auto [b, d] = bright_dark_states(phi);
    EXPECT_NEAR(std::abs(b.dot(d)), 0.0, 1e-15);
    EXPECT_NEAR(b.norm(), 1.0, 1e-15);
    EXPECT_NEAR(d.norm(), 1.0, 1e-15);
  }
}

TEST(BrightDark, KnownPhases) {
  const double r = 1.0 / std::sqrt(2.0);
  auto [b0, d0] = bright_dark_states(0.0);
  EXPECT_LT((b0 - ket(r, -r)).norm(), 1e-15);
  EXPECT_LT((d0 - ket(r, r)).norm(), 1e-15);
  auto [bp, dp] = bright_dark_states(M_PI);
  EXPECT_LT((bp - ket(r, r)).norm(), 1e-15);
}

TEST(UDark, ThetaZeroIsIdentity) {
  EXPECT_LT(max_abs(u_dark_matrix({0.0, 1.3}) - Qubit::Identity()), 1e-15);
}

TEST(UDark, NotGateMatrix) {
  Qubit want;
  want << 0, -1, -1, 0;
  EXPECT_LT(max_abs(u_dark_matrix({M_PI, 0.0}) - want), 1e-15);
}

TEST(UDark, HalfPiQuarterPhaseMatrix) {
  Qubit want;
  want << 1, -1, 1, 1;
  want *= std::polar(1.0, M_PI / 4) / std::sqrt(2.0);
  EXPECT_LT(max_abs(u_dark_matrix({M_PI / 2, M_PI / 2}) - want), 1e-15);
}

TEST(UDark, MatchesBrightDarkConstruction) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ang(0.0, 2 * M_PI);
  for (int k = 0; k < 50; ++k) {
    const double t = ang(rng), p = ang(rng);
    EXPECT_LT(max_abs(u_dark_matrix({t, p}) - oracle_u_dark(t, p)), 1e-12);
  }
}

TEST(UDark, UnitaryWithDeterminantPhase) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ang(0.0, 2 * M_PI);
  for (int k = 0; k < 100; ++k) {
    const GateSpec g{ang(rng), ang(rng)};
    const Qubit u = u_dark_matrix(g);
    EXPECT_LT(max_abs(u.adjoint() * u - Qubit::Identity()), 1e-12);
    EXPECT_LT(std::abs(u.determinant() - std::polar(1.0, g.theta)), 1e-12);
  }
}

TEST(UDark, ComposesAlongOneAxis) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ang(0.0, 2 * M_PI);
  for (int k = 0; k < 50; ++k) {
    const double a = ang(rng), b = ang(rng), phi = ang(rng);
    const Qubit lhs = u_dark_matrix({a, phi}) * u_dark_matrix({b, phi});
    const Qubit rhs = u_dark_matrix({a + b, phi});
    // Equal up to a global phase: |Tr(A^dag B)| = 2.
    EXPECT_NEAR(std::abs((lhs.adjoint() * rhs).trace()), 2.0, 1e-12);
  }
}

TEST(UDark, DecompositionRoundTrip) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> t(0.05, M_PI - 0.05), ang(0.0, 2 * M_PI);
  for (int k = 0; k < 50; ++k) {
    const double theta = t(rng), phi = ang(rng), alpha = ang(rng) - M_PI;
    const auto d = decompose_dark(z_rotation(alpha) * u_dark_matrix({theta, phi}));
    EXPECT_NEAR(d.spec.theta, theta, 1e-10);
    EXPECT_NEAR(std::remainder(d.spec.phi - phi, 2 * M_PI), 0.0, 1e-10);
    EXPECT_NEAR(std::remainder(d.alpha - alpha, 2 * M_PI), 0.0, 1e-10);
  }
}

TEST(ProcessFidelity, UnitaryAgainstItselfIsOne) {
  const Qubit u = u_dark_matrix({1.1, 0.4});
  EXPECT_NEAR(process_fidelity(u, u), 1.0, 1e-14);
  EXPECT_NEAR(process_fidelity(u, std::polar(1.0, 0.7) * u), 1.0, 1e-14);
  // Orthogonal Paulis: (0 + 2) / 6.
  EXPECT_NEAR(process_fidelity(pauli(Axis::x), pauli(Axis::z)), 1.0 / 3.0, 1e-14);
}

TEST(Reconstruct, AxisExamples) {
  EXPECT_LT(max_abs(reconstruct_rho({0, 0, 1}) - pure_qubit(ket(1, 0))), 1e-15);
  EXPECT_LT(max_abs(reconstruct_rho({0, 0, 0}) - 0.5 * Qubit::Identity()), 1e-15);
  const double r = 1.0 / std::sqrt(2.0);
  EXPECT_LT(max_abs(reconstruct_rho({1, 0, 0}) - pure_qubit(ket(r, r))), 1e-15);
}

TEST(Reconstruct, RoundTripOfRandomStates) {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    Eigen::Vector3d v(g(rng), g(rng), g(rng));
    v *= std::cbrt(u(rng)) / v.norm();
    Qubit rho;
    rho << 0.5 * (1 + v.z()), 0.5 * Complex(v.x(), -v.y()), 0.5 * Complex(v.x(), v.y()),
        0.5 * (1 - v.z());
    EXPECT_LT(max_abs(reconstruct_rho(ideal_record(rho)) - rho), 1e-14);
  }
}

TEST(Reconstruct, UnphysicalRecordProjectedToBall) {
  const QubitState rho = reconstruct_rho({1.2, 0.0, 0.9});
  Eigen::SelfAdjointEigenSolver<Qubit> es(rho);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-15);
  EXPECT_NEAR(rho.trace().real(), 1.0, 1e-15);
  EXPECT_NEAR(ideal_record(rho).norm(), 1.0, 1e-14);
}

TEST(Fidelity, Examples) {
  const QubitVector psi = ket(std::cos(0.4), std::polar(std::sin(0.4), 0.9));
  const QubitVector perp = ket(-std::conj(psi(1)), std::conj(psi(0)));
  EXPECT_NEAR(fidelity(pure_qubit(psi), psi), 1.0, 1e-15);
  EXPECT_NEAR(fidelity(0.5 * Qubit::Identity(), psi), 0.5, 1e-15);
  EXPECT_NEAR(fidelity(pure_qubit(perp), psi), 0.0, 1e-15);
}

TEST(Fidelity, GateFidelityIsSquareRoot) {
  EXPECT_NEAR(gate_fidelity(0.84), 0.9165, 1e-4);
  EXPECT_NEAR(gate_fidelity(0.92), 0.9591, 1e-4);
  EXPECT_EQ(gate_fidelity(1.0), 1.0);
  EXPECT_THROW(gate_fidelity(1.5), ConfigError);
}

TEST(MeasureProjection, IdealValues) {
  const Ensemble classes = class_ensemble({0.0}, pure_state(0));
  const TomographySetup s{};
  const double r = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(measure_projection(pure_qubit(ket(1, 0)), Axis::z, false, classes, s), 1.0, 1e-15);
  EXPECT_NEAR(measure_projection(pure_qubit(ket(r, r)), Axis::z, false, classes, s), 0.0, 1e-15);
  EXPECT_NEAR(measure_projection(pure_qubit(ket(r, r)), Axis::x, false, classes, s), 1.0, 1e-15);
}

TEST(MeasureProjection, SimulatedReadoutThroughPipeline) {
  Ensemble classes = class_ensemble({0.0}, pure_state(0));
  classes.classes[0].width = 0.003;
  TomographySetup s;
  s.gate = params();
  s.coherent = true;
  const double r = 1.0 / std::sqrt(2.0);
  // Lorentzian tails of neighbouring lines leak a few 1e-5 into each window.
  EXPECT_NEAR(measure_projection(pure_qubit(ket(1, 0)), Axis::z, true, classes, s), 1.0, 1e-3);
  EXPECT_NEAR(measure_projection(pure_qubit(ket(0, 1)), Axis::z, true, classes, s), -1.0, 1e-3);
  EXPECT_GT(measure_projection(pure_qubit(ket(r, r)), Axis::x, true, classes, s), 0.99);
  EXPECT_GT(measure_projection(pure_qubit(ket(r, r * I)), Axis::y, true, classes, s), 0.99);
  EXPECT_LT(measure_projection(pure_qubit(ket(r, -r)), Axis::x, true, classes, s), -0.99);
}

TEST(DarkStateGate, MatchesAnalyticUnitary) {
  for (double theta : {0.5, M_PI / 2, 2.0, M_PI, 4.0})
    for (double phi : {0.0, 1.0, M_PI, 4.5})
      EXPECT_GE(process_fidelity(u_dark_matrix({theta, phi}), simulated({theta, phi})), 0.99)
          << theta << " " << phi;
}

TEST(DarkStateGate, DarkStateReturns) {
  for (double theta : {0.0, 1.0, M_PI, 5.0})
    for (double phi : {0.0, 2.0}) {
      const QubitVector d = bright_dark_states(phi).second;
      const QubitVector out = simulated({theta, phi}) * d;
      EXPECT_GE(std::norm(d.dot(out)), 0.99) << theta << " " << phi;
    }
}

TEST(DarkStateGate, NotGateFlipsZero) {
  const QubitVector out = simulated({M_PI, 0.0}) * ket(1, 0);
  EXPECT_GE(std::norm(out(1)), 0.99);
}

TEST(DarkStateGate, ZeroAngleIsIdentity) {
  EXPECT_GE(process_fidelity(Qubit::Identity(), simulated({0.0, 0.7})), 0.999);
}

TEST(DarkStateGate, AdiabaticityEnforced) {
  DarkGateParams p;
  p.transfer.peak_rabi = 0.05;
  EXPECT_THROW(dark_state_gate({1.0, 0.0}, p), AdiabaticityViolation);
}

TEST(DarkStateGate, TwoColourLinesAtQubitSplitting) {
  const auto [f0, f1] = qubit_lines(LevelScheme{}, params());
  EXPECT_NEAR(f1 - f0, 10.2, 1e-12);
}

TEST(GateSequence, TrackedFrameComposesGates) {
  GateSequence seq(params(), LevelScheme{});
  seq.append({M_PI / 2, 0.3});
  seq.append({M_PI / 2, 0.3});
  const Waveform w = seq.combined();
  const Qubit q = z_rotation(-seq.frame()) * simulate_qubit_operator(w, LevelScheme{}, 0.0);
  EXPECT_GE(process_fidelity(u_dark_matrix({M_PI, 0.3}), q), 0.99);
  EXPECT_NEAR(seq.end_time(), w.duration(), 1e-9);
}

TEST(Tomography, SixStatesDecoherenceFree) {
  const Ensemble qubit = class_ensemble(linear_grid(-0.0012, 0.0012, 5), pure_state(0));
  Ensemble peak = qubit;
  for (auto& c : peak.classes) c.width = 0.0006;
  TomographySetup s;
  s.gate = params();
  s.coherent = true;
  for (const auto& r : six_state_tomography(peak, s)) {
    EXPECT_GE(r.f_tot, 0.99) << r.label;
    EXPECT_NEAR(r.f_gate, std::sqrt(r.f_tot), 1e-15);
  }
}

TEST(Tomography, AxisStatesPreparedByTheirGates) {
  for (const auto& a : axis_states()) {
    QubitVector out = ket(1, 0);
    if (a.prep) out = u_dark_matrix(*a.prep) * out;
    EXPECT_NEAR(std::norm(a.psi.dot(out)), 1.0, 1e-12) << a.label;
  }
}

TEST(Tomography, MeasurementRotationsMapEigenstatesToZero) {
  const double r = 1.0 / std::sqrt(2.0);
  const QubitVector plus_x = ket(r, r), plus_y = ket(r, r * I);
  EXPECT_NEAR(std::norm((u_dark_matrix(*measurement_rotation(Axis::x)) * plus_x)(0)), 1.0, 1e-12);
  EXPECT_NEAR(std::norm((u_dark_matrix(*measurement_rotation(Axis::y)) * plus_y)(0)), 1.0, 1e-12);
  EXPECT_FALSE(measurement_rotation(Axis::z).has_value());
}

TEST(QubitPeak, RejectsSubLinewidthPeak) {
  const Ensemble e = class_ensemble({0.0}, pure_state(0));
  EXPECT_THROW(qubit_peak(e, 0.0, 0.001), ConfigError);
  const Ensemble p = qubit_peak(e, 0.0);
  EXPECT_EQ(p.classes.size(), 5u);
}
