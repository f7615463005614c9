#pragma once

// Named, versioned experiment pipelines. Each recipe reads only its config,
// writes artifacts into the output directory and returns metrics that depend
// on nothing but the config (wall time is reported separately).

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "reic/crystal.hpp"
#include "reic/dynamics.hpp"
#include "reic/gates.hpp"
#include "reic/harness/config.hpp"
#include "reic/harness/io.hpp"
#include "reic/harness/report.hpp"
#include "reic/optctrl.hpp"
#include "reic/pulse.hpp"
#include "reic/pumping.hpp"
#include "reic/readout.hpp"

namespace reic::harness {

class UnknownRecipe : public ConfigError {
 public:
  explicit UnknownRecipe(const std::string& name) : ConfigError("unknown recipe: " + name) {}
};

class RecipeContext {
 public:
  RecipeContext(const ExperimentConfig& cfg, std::string prefix)
      : config(cfg), prefix_(std::move(prefix)) {
    std::filesystem::create_directories(cfg.output_dir);
  }

  /// Path for an artifact; the file is listed in the manifest.
  std::filesystem::path artifact(const std::string& name) {
    auto p = std::filesystem::path(config.output_dir) / (prefix_ + "_" + name);
    manifest.push_back(p.string());
    return p;
  }

  const ExperimentConfig& config;
  Json metrics = Json::object();
  std::vector<std::string> manifest;

 private:
  std::string prefix_;
};

// ---------------------------------------------------------------------------
// Shared pipeline pieces

inline Ensemble initial_ensemble(const ExperimentConfig& c) {
  EnsembleOptions opt;
  opt.alpha_l_max = c.crystal.alpha_l_max;
  const Profile profile = c.crystal.profile == "gaussian" ? Profile::gaussian : Profile::flat;
  return sample_ensemble(profile, c.crystal.window, static_cast<std::size_t>(c.crystal.n_classes),
                         c.seed, c.crystal.scheme, opt);
}

inline PumpingOptions pumping_options(const ExperimentConfig& c) {
  PumpingOptions o;
  o.optical_lifetime = c.pumping.optical_lifetime;
  return o;
}

inline Ensemble burn_pit(const ExperimentConfig& c) {
  return create_pit(initial_ensemble(c), c.pumping.pit,
                    default_pit_schedule(c.pumping.pit, c.pumping.pit_recipe), pumping_options(c));
}

inline double peak_frequency(const ExperimentConfig& c) {
  return c.pumping.pit.lo + c.pumping.peak_offset;
}

inline Ensemble burn_qubit_peak(const ExperimentConfig& c) {
  return burnback(burn_pit(c), peak_frequency(c), c.pumping.peak_width, c.pumping.burnback,
                  pumping_options(c));
}

inline DarkGateParams gate_params(const ExperimentConfig& c, double reference_detuning) {
  DarkGateParams p;
  p.transfer = c.pulse.sechyp;
  p.excited = static_cast<Excited>(c.gates.excited);
  p.reference_detuning = reference_detuning;
  p.light_shift_compensation = c.gates.light_shift_compensation;
  return calibrated(p, c.crystal.scheme);
}

inline std::vector<double> pit_grid(const Interval& pit, double margin, double step) {
  return spaced_grid(pit.lo - margin, pit.hi + margin, step);
}

// ---------------------------------------------------------------------------
// Recipes

inline void recipe_levels(RecipeContext& ctx) {
  const auto& s = ctx.config.crystal.scheme;
  const auto lines = transition_frequencies(s, 0.0);
  double lo = lines[0].frequency;
  double hi = lo;
  for (const auto& t : lines) {
    lo = std::min(lo, t.frequency);
    hi = std::max(hi, t.frequency);
  }
  ctx.metrics["transition_span_MHz"] = hi - lo;
  ctx.metrics["ground_span_MHz"] = s.ground_span();
  ctx.metrics["max_pit_width_MHz"] = s.max_pit_width();
  CsvWriter w(ctx.artifact("transitions.csv"), {"ground", "excited", "freq_MHz"});
  for (const auto& t : lines) w.row({double(t.ground), double(t.excited), t.frequency});
}

inline void recipe_fig2(RecipeContext& ctx) {
  const auto& c = ctx.config;
  const Interval pit = c.pumping.pit;
  ctx.metrics["pit_too_wide_rejected"] = [&] {
    try {
      check_pit_width(c.crystal.scheme, {pit.lo, pit.lo + 20.0});
      return 0;
    } catch (const PitTooWide&) {
      return 1;
    }
  }();
  const auto opt = pumping_options(c);
  const Ensemble simple = burn_pit(c);
  OptimalPitRecipe o = c.pumping.optimal;
  const Ensemble optimal = optimal_pit(initial_ensemble(c), pit, c.pumping.optimal_iterations, o, opt);

  ctx.metrics["residual_simple"] = pit_residual(simple, pit);
  ctx.metrics["residual_optimal"] = pit_residual(optimal, pit);
  const double sl = edge_rise_width(simple, pit, PitEdge::lower);
  const double su = edge_rise_width(simple, pit, PitEdge::upper);
  const double ol = edge_rise_width(optimal, pit, PitEdge::lower);
  const double ou = edge_rise_width(optimal, pit, PitEdge::upper);
  ctx.metrics["edge_rise_simple_MHz"] = std::max(sl, su);
  ctx.metrics["edge_rise_optimal_MHz"] = std::max(ol, ou);
  ctx.metrics["edge_rise_simple_lower_MHz"] = sl;
  ctx.metrics["edge_rise_simple_upper_MHz"] = su;
  ctx.metrics["edge_rise_optimal_lower_MHz"] = ol;
  ctx.metrics["edge_rise_optimal_upper_MHz"] = ou;

  const auto grid = spaced_grid(c.crystal.window.lo, c.crystal.window.hi, 0.02);
  write_spectrum_csv(ctx.artifact("simple.csv"), grid, absorption_spectrum(simple, grid));
  write_spectrum_csv(ctx.artifact("optimal.csv"), grid, absorption_spectrum(optimal, grid));
}

struct PeakSummary {
  std::vector<Peak> peaks;
  double contamination = 0.0;  // largest αL away from the peaks and pit edges, fraction of plateau
};

inline PeakSummary summarize_peaks(const Ensemble& ens, const Interval& pit,
                                   const std::vector<double>& grid, const std::vector<double>& a) {
  PeakSummary s;
  const double plateau = ens.reference_alpha_l;
  s.peaks = find_peaks(grid, a, 0.05 * plateau, 0.05 * plateau);
  std::erase_if(s.peaks, [&](const Peak& p) { return !pit.contains(p.frequency); });
  const double guard = PitProbe{}.edge_guard;
  const Interval inner{pit.lo + guard, pit.hi - guard};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!inner.contains(grid[i])) continue;
    bool near = false;
    for (const auto& p : s.peaks) near = near || std::abs(grid[i] - p.frequency) < 2.0 * p.fwhm;
    if (!near) s.contamination = std::max(s.contamination, a[i] / plateau);
  }
  return s;
}

inline void recipe_fig3(RecipeContext& ctx) {
  const auto& c = ctx.config;
  const Interval pit = c.pumping.pit;
  const Ensemble ens = burn_qubit_peak(c);
  const auto grid = pit_grid(pit, 2.0, 0.005);
  const auto a = absorption_spectrum(ens, grid);
  write_spectrum_csv(ctx.artifact("spectrum.csv"), grid, a);
  const PeakSummary s = summarize_peaks(ens, pit, grid, a);
  ctx.metrics["peak_count"] = s.peaks.size();
  Json f = Json::array();
  Json w = Json::array();
  for (const auto& p : s.peaks) {
    f.push_back(p.frequency);
    w.push_back(p.fwhm);
  }
  ctx.metrics["peak_frequencies_MHz"] = f;
  ctx.metrics["peak_fwhm_MHz"] = w;
  Json gaps = Json::array();
  for (std::size_t i = 1; i < s.peaks.size(); ++i)
    gaps.push_back(s.peaks[i].frequency - s.peaks[i - 1].frequency);
  ctx.metrics["peak_spacings_MHz"] = gaps;
  ctx.metrics["off_peak_max_fraction"] = s.contamination;
}

inline double sechyp_transfer(const ExperimentConfig& c, double rabi_factor) {
  const auto& s = c.crystal.scheme;
  const double span = c.dynamics.span_linewidths * s.homogeneous_linewidth();
  const auto det = linear_grid(-0.5 * span, 0.5 * span, static_cast<std::size_t>(c.dynamics.ensemble_classes));
  SechypParams p = c.pulse.sechyp;
  p.peak_rabi *= rabi_factor;
  p.center_frequency = transition_frequency(s, 0.0, 0, 0);
  const Waveform w = sechyp(p);
  Ensemble ens = class_ensemble(det, diagonal_state({1, 0, 0, 0, 0, 0}), s);
  EnsembleDrive drive;
  drive.waveforms = {w};
  drive.method = Propagator::unitary;
  ens = ensemble_propagate(std::move(ens), drive, DecoherenceParams::none(), w.duration());
  return mean_population(ens, level_index(Excited::e1));
}

inline void recipe_fig4(RecipeContext& ctx) {
  const auto& c = ctx.config;
  const double base = sechyp_transfer(c, 1.0);
  const double boosted = sechyp_transfer(c, c.dynamics.intensity_factor);
  ctx.metrics["transfer_efficiency"] = base;
  ctx.metrics["transfer_efficiency_boosted"] = boosted;
  ctx.metrics["intensity_relative_change"] = std::abs(boosted - base) / base;
  const Waveform w = sechyp(c.pulse.sechyp);
  ctx.metrics["pulse_energy"] = w.energy();
  ctx.metrics["pulse_spectral_fwhm_MHz"] = spectral_fwhm(w);
  write_waveform_csv(ctx.artifact("waveform.csv"), w);
}

inline void recipe_gate_grid(RecipeContext& ctx) {
  const auto& c = ctx.config;
  const auto& s = c.crystal.scheme;
  const DarkGateParams p = gate_params(c, 0.0);
  const int n = c.gates.grid;
  double worst = 1.0;
  double worst_dark = 1.0;
  CsvWriter w(ctx.artifact("grid.csv"), {"theta", "phi", "process_fidelity", "dark_return"});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const GateSpec g{kTwoPi * i / n, kTwoPi * j / n};
      const Qubit q = gate_in_frame(dark_state_gate(g, p, s), s, 0.0);
      const double f = process_fidelity(u_dark_matrix(g), q);
      const QubitVector d = bright_dark_states(g.phi).second;
      const double ret = std::norm(d.dot(q * d));
      worst = std::min(worst, f);
      worst_dark = std::min(worst_dark, ret);
      w.row({g.theta, g.phi, f, ret});
    }
  ctx.metrics["worst_process_fidelity"] = worst;
  ctx.metrics["worst_dark_return"] = worst_dark;
  const Qubit not_gate = gate_in_frame(dark_state_gate({kPi, 0.0}, p, s), s, 0.0);
  ctx.metrics["not_gate_one_population"] = std::norm(not_gate(1, 0));
  const Qubit id = gate_in_frame(dark_state_gate({0.0, 0.0}, p, s), s, 0.0);
  ctx.metrics["identity_process_fidelity"] = process_fidelity(Qubit::Identity(), id);
  ctx.metrics["calibration"] = {p.calibration.theta_offset, p.calibration.phi_offset,
                                p.calibration.frame_shift};
}

inline void run_tomography(RecipeContext& ctx, bool coherent) {
  const auto& c = ctx.config;
  const double f = peak_frequency(c);
  const Ensemble burned = burn_qubit_peak(c);
  const Ensemble qubit = qubit_peak(burned, f, c.gates.qubit_peak_width, c.gates.qubit_peak_classes);
  TomographySetup setup;
  setup.gate = gate_params(c, f);
  setup.coherent = coherent;
  setup.decoherence = coherent ? DecoherenceParams::none() : c.dynamics.decoherence;
  setup.rabi_scatter = c.dynamics.rabi_scatter;
  setup.seed = c.seed;
  setup.integrator.steps_per_period = c.dynamics.steps_per_period;
  const auto results = six_state_tomography(qubit, setup);
  Json report = Json::array();
  Json ftot = Json::array();
  double lo = 1.0;
  double hi = 0.0;
  double worst_distance = 0.0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    const TomographyRecord ideal = ideal_record(pure_qubit(axis_states()[i].psi));
    const double dist = std::hypot(r.record.tr_x - ideal.tr_x, r.record.tr_y - ideal.tr_y,
                                   r.record.tr_z - ideal.tr_z);
    worst_distance = std::max(worst_distance, dist);
    report.push_back({{"state_label", r.label},
                      {"bloch", {r.record.tr_x, r.record.tr_y, r.record.tr_z}},
                      {"F_tot", r.f_tot},
                      {"F_gate", r.f_gate}});
    ftot.push_back(r.f_tot);
    lo = std::min(lo, r.f_tot);
    hi = std::max(hi, r.f_tot);
  }
  write_json(ctx.artifact("tomography.json"), report);
  ctx.metrics["states"] = report;
  ctx.metrics["F_tot"] = ftot;
  ctx.metrics["F_tot_min"] = lo;
  ctx.metrics["F_tot_max"] = hi;
  ctx.metrics["F_gate_min"] = std::sqrt(lo);
  ctx.metrics["F_gate_max"] = std::sqrt(hi);
  ctx.metrics["bloch_distance_max"] = worst_distance;
}

inline ControlProblem transfer_problem(const ExperimentConfig& c) {
  const auto& s = c.crystal.scheme;
  const double carrier = transition_frequency(s, 0.0, 0, 0);
  ControlProblem p;
  p.members = {two_level_model(s, 0.0, carrier, 0, 0)};
  p.bandwidth = c.optctrl.bandwidth;
  p.amplitude_cap = c.optctrl.amplitude_cap;
  p.duration = c.optctrl.duration;
  p.dt = c.optctrl.dt;
  p.target_fidelity = c.optctrl.target_fidelity;
  return p;
}

inline GrapeResult optimize_transfer(const ExperimentConfig& c) {
  GrapeOptions opt;
  opt.starts = c.optctrl.starts;
  opt.initial_taper = c.optctrl.initial_taper;
  return grape_optimize(transfer_problem(c), c.optctrl.max_iterations, c.seed, opt);
}

inline void recipe_grape(RecipeContext& ctx) {
  const auto& c = ctx.config;
  const GrapeResult r = optimize_transfer(c);
  ctx.metrics["fidelity"] = r.fidelity();
  ctx.metrics["iterations"] = r.fidelity_trace.size() - 1;
  ctx.metrics["start_index"] = r.start_index;
  ctx.metrics["peak_amplitude_MHz"] = r.control.peak();
  const double carrier = transition_frequency(c.crystal.scheme, 0.0, 0, 0);
  const ControlModel full = multi_level_model(c.crystal.scheme, 0.0, carrier, 0, 0);
  ctx.metrics["fidelity_multi_level"] = transfer_fidelity(full, r.control);
  write_waveform_csv(ctx.artifact("control.csv"), r.control.to_waveform(0.0));
  CsvWriter w(ctx.artifact("trace.csv"), {"iteration", "fidelity"});
  for (std::size_t i = 0; i < r.fidelity_trace.size(); ++i) w.row({double(i), r.fidelity_trace[i]});
}

inline void recipe_fig6(RecipeContext& ctx) {
  const auto& c = ctx.config;
  BandwidthStudySettings s;
  s.amplitude_cap = c.optctrl.amplitude_cap;
  s.duration = c.optctrl.duration;
  s.dt = c.optctrl.dt;
  s.target_fidelity = c.optctrl.target_fidelity;
  s.max_iterations = c.optctrl.max_iterations;
  s.starts = c.optctrl.starts;
  s.initial_taper = c.optctrl.initial_taper;
  s.seed = c.seed;
  const auto pts = efficiency_vs_bandwidth(c.crystal.scheme, c.optctrl.study_bandwidths, s);
  write_study_csv(ctx.artifact("study.csv"), pts);
  double gap = 0.0;
  Json table = Json::array();
  for (const auto& pt : pts) {
    table.push_back({pt.bandwidth, pt.two_level, pt.multi_level});
    if (pt.bandwidth <= 2.0 * c.crystal.scheme.excited_splittings[0] + 1e-9)
      gap = std::max(gap, std::abs(pt.two_level - pt.multi_level) / pt.two_level);
  }
  ctx.metrics["table"] = table;
  ctx.metrics["max_relative_gap_two_level_band"] = gap;
  if (!pts.empty()) {
    const auto widest = std::max_element(pts.begin(), pts.end(), [](auto& a, auto& b) {
      return a.bandwidth < b.bandwidth;
    });
    ctx.metrics["widest_bandwidth_MHz"] = widest->bandwidth;
    ctx.metrics["widest_two_level"] = widest->two_level;
    ctx.metrics["widest_multi_level"] = widest->multi_level;
  }
}

inline void recipe_beat(RecipeContext& ctx) {
  const auto& c = ctx.config;
  const Waveform sech = sechyp(c.pulse.sechyp);
  const BeatTrace bs = beat_characterize(sech, c.pulse.beat_reference, c.pulse.phase_floor);
  const BeatError es = beat_round_trip_error(sech, bs);
  write_beat_csv(ctx.artifact("sechyp.csv"), bs);
  ctx.metrics["sechyp_envelope_rms"] = es.envelope_rms;
  ctx.metrics["sechyp_phase_rms_rad"] = es.phase_rms;

  const Waveform grape = optimize_transfer(c).control.to_waveform(0.0);
  const BeatTrace bg = beat_characterize(grape, c.pulse.beat_reference, c.pulse.phase_floor);
  const BeatError eg = beat_round_trip_error(grape, bg);
  write_beat_csv(ctx.artifact("grape.csv"), bg);
  ctx.metrics["grape_envelope_rms"] = eg.envelope_rms;
  ctx.metrics["grape_phase_rms_rad"] = eg.phase_rms;
}

inline void recipe_readout(RecipeContext& ctx) {
  const auto& c = ctx.config;
  const auto& r = c.readout;
  auto mean = [](const std::vector<int>& v) {
    double s = 0.0;
    for (int x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };
  const auto n = static_cast<std::size_t>(r.samples);
  ctx.metrics["mean_one"] = mean(photon_samples(true, r.detection, n, c.seed));
  ctx.metrics["mean_zero"] = mean(photon_samples(false, r.detection, n, c.seed + 1));
  const Discrimination d = discriminate(0, r.detection);
  ctx.metrics["threshold"] = d.threshold;
  ctx.metrics["error_probability"] = d.error_probability;
  ctx.metrics["dipole_shift_7nm_MHz"] = dipole_shift(7.0);
  ctx.metrics["dipole_shift_14nm_MHz"] = dipole_shift(14.0);
  ctx.metrics["ensemble_scaling"] = ensemble_scaling(r.scaling_p, r.scaling_n);
  ctx.metrics["stark_shift_MHz"] = stark_shift(r.stark_field, r.stark_coefficient);

  IonGeometry g;
  for (const auto& ion : r.chain)
    g.qubits.push_back({{ion.position[0], ion.position[1], ion.position[2]}, ion.frequency});
  try {
    ctx.metrics["chain_MHz"] = find_chain(g, r.ion, r.shift_resolution);
  } catch (const NoChain&) {
    ctx.metrics["chain_MHz"] = Json::array();
  }
}

struct RecipeEntry {
  int version;
  std::function<void(RecipeContext&)> run;
};

inline const std::map<std::string, RecipeEntry>& recipes() {
  static const std::map<std::string, RecipeEntry> table{
      {"levels", {1, recipe_levels}},
      {"fig2", {1, recipe_fig2}},
      {"fig3-burnback", {1, recipe_fig3}},
      {"fig4-sechyp", {1, recipe_fig4}},
      {"gate-grid", {1, recipe_gate_grid}},
      {"six-state-tomo", {1, [](RecipeContext& c) { run_tomography(c, true); }}},
      {"fig5-tomo-noise", {1, [](RecipeContext& c) { run_tomography(c, false); }}},
      {"fig5-beat", {1, recipe_beat}},
      {"grape", {1, recipe_grape}},
      {"fig6-grape-study", {1, recipe_fig6}},
      {"readout", {1, recipe_readout}},
  };
  return table;
}

inline RunReport run_experiment(const std::string& name, const ExperimentConfig& config) {
  const auto& table = recipes();
  const auto it = table.find(name);
  if (it == table.end()) throw UnknownRecipe(name);
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  RecipeContext ctx(config, name);
  it->second.run(ctx);
  RunReport r;
  r.experiment = name;
  r.recipe_version = it->second.version;
  r.config_digest = config_digest(config);
  r.metrics = std::move(ctx.metrics);
  r.manifest = std::move(ctx.manifest);
  r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace reic::harness
