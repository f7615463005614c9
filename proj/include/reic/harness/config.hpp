#pragma once

// Experiment configuration: one JSON object with a section per module.
// Every field has a default; unknown keys and out-of-range values are
// rejected with the dotted path of the offending field.

#include <json.hpp>

#include <array>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "reic/crystal.hpp"
#include "reic/dynamics.hpp"
#include "reic/errors.hpp"
#include "reic/gates.hpp"
#include "reic/optctrl.hpp"
#include "reic/pulse.hpp"
#include "reic/pumping.hpp"
#include "reic/readout.hpp"

namespace reic::harness {

using Json = nlohmann::json;

class ConfigInvalid : public ConfigError {
 public:
  ConfigInvalid(const std::string& field, const std::string& why)
      : ConfigError(field + ": " + why), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

struct CrystalConfig {
  LevelScheme scheme{};
  std::string profile = "flat";
  Interval window{-51.0, 69.0};
  int n_classes = 6000;
  double alpha_l_max = 2.0;
};

struct PumpingConfig {
  Interval pit{0.0, 18.0};
  PitRecipe pit_recipe{};
  int optimal_iterations = 4;
  OptimalPitRecipe optimal{};
  double peak_offset = 1.0;  // burnback peak above the pit's low edge, MHz
  double peak_width = 0.2;   // MHz
  BurnbackRecipe burnback{};
  double optical_lifetime = 164.0;
};

struct PulseConfig {
  SechypParams sechyp{};
  /// Offset of the beat reference from the pulse carrier, MHz.
  double beat_reference = 20.0;
  double phase_floor = 0.01;
};

struct DynamicsConfig {
  DecoherenceParams decoherence{};
  double rabi_scatter = 0.0;
  double span_linewidths = 100.0;
  int ensemble_classes = 21;
  double intensity_factor = 2.0;
  int steps_per_period = 50;
};

struct GatesConfig {
  int excited = 1;  // index of the common excited level
  bool light_shift_compensation = true;
  int grid = 8;
  double qubit_peak_width = 0.003;  // MHz
  int qubit_peak_classes = 5;
};

struct OptctrlConfig {
  double bandwidth = 2.0;
  double amplitude_cap = 1.0;
  double duration = 5.0;
  double dt = 0.01;
  double target_fidelity = 0.999;
  int max_iterations = 200;
  int starts = 5;
  double initial_taper = 1.0 / 3.0;
  std::vector<double> study_bandwidths{2.0, 4.0, 6.0, 8.0, 9.2, 12.0, 16.0};
};

struct ChainIon {
  std::array<double, 3> position{};
  double frequency = 0.0;
};

struct ReadoutConfig {
  DetectionParams detection{};
  ReadoutIon ion{};
  int samples = 100000;
  double shift_resolution = 3.0;
  std::vector<ChainIon> chain{{{5.0, 0.0, 0.0}, 12.5}, {{10.0, 1.0, 0.0}, -40.0},
                              {{15.0, 0.0, 1.0}, 3.3}, {{60.0, 0.0, 0.0}, 7.0}};
  double scaling_p = 0.01;
  int scaling_n = 5;
  double stark_field = 1e6;   // V/cm
  double stark_coefficient = 35.0;  // kHz/(V/cm)
};

struct ExperimentConfig {
  CrystalConfig crystal;
  PumpingConfig pumping;
  PulseConfig pulse;
  DynamicsConfig dynamics;
  GatesConfig gates;
  OptctrlConfig optctrl;
  ReadoutConfig readout;
  std::uint64_t seed = 1;
  std::string output_dir = "out";

  void validate() const;
};

// ---------------------------------------------------------------------------
// Reading

namespace detail {

/// Reads fields from one JSON object and remembers which keys were used.
class Section {
 public:
  Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigInvalid(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigInvalid(at(key), "wrong type");
    }
  }

  void get(const std::string& key, Interval& out) {
    std::array<double, 2> v{out.lo, out.hi};
    get(key, v);
    out = {v[0], v[1]};
  }

  void positive(const std::string& key, double& out) {
    get(key, out);
    if (!(out > 0.0)) throw ConfigInvalid(at(key), "must be > 0");
  }
  void non_negative(const std::string& key, double& out) {
    get(key, out);
    if (!(out >= 0.0)) throw ConfigInvalid(at(key), "must be >= 0");
  }
  void at_least(const std::string& key, int& out, int lo) {
    get(key, out);
    if (out < lo) throw ConfigInvalid(at(key), "must be >= " + std::to_string(lo));
  }

  void mark(const std::string& key) { seen_.insert(key); }

  Section sub(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    static const Json empty = Json::object();
    return Section(it == j_.end() ? empty : *it, at(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigInvalid(at(it.key()), "unknown key");
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline ExperimentConfig parse_config(const Json& root) {
  ExperimentConfig c;
  detail::Section top(root, "");
  top.get("seed", c.seed);
  top.get("output_dir", c.output_dir);

  {
    auto s = top.sub("crystal");
    auto& k = c.crystal;
    std::array<double, 2> gs{k.scheme.ground_splittings[0], k.scheme.ground_splittings[1]};
    std::array<double, 2> es{k.scheme.excited_splittings[0], k.scheme.excited_splittings[1]};
    s.get("ground_splittings", gs);
    s.get("excited_splittings", es);
    k.scheme.ground_splittings = {gs[0], gs[1]};
    k.scheme.excited_splittings = {es[0], es[1]};
    std::array<std::array<double, 3>, 3> m{};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) m[i][j] = k.scheme.relative_strengths(i, j);
    s.get("relative_strengths", m);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) k.scheme.relative_strengths(i, j) = m[i][j];
    s.positive("homogeneous_linewidth_khz", k.scheme.homogeneous_linewidth_khz);
    std::array<int, 3> ladder{k.scheme.ground_ladder[0], k.scheme.ground_ladder[1],
                              k.scheme.ground_ladder[2]};
    s.get("ground_ladder", ladder);
    k.scheme.ground_ladder = {ladder[0], ladder[1], ladder[2]};
    s.get("profile", k.profile);
    s.get("window", k.window);
    s.at_least("n_classes", k.n_classes, 0);
    s.positive("alpha_l_max", k.alpha_l_max);
    s.finish();
    if (k.profile != "flat" && k.profile != "gaussian")
      throw ConfigInvalid("crystal.profile", "expected \"flat\" or \"gaussian\"");
    if (!(k.window.hi > k.window.lo)) throw ConfigInvalid("crystal.window", "min must be < max");
    try {
      k.scheme.validate();
    } catch (const ConfigError& e) {
      throw ConfigInvalid("crystal", e.what());
    }
  }
  {
    auto s = top.sub("pumping");
    auto& p = c.pumping;
    s.get("pit", p.pit);
    auto pr = s.sub("pit_recipe");
    pr.non_negative("rabi_frequency", p.pit_recipe.rabi_frequency);
    pr.positive("pulse_duration", p.pit_recipe.pulse_duration);
    pr.at_least("rounds", p.pit_recipe.rounds, 1);
    pr.non_negative("polish_margin", p.pit_recipe.polish_margin);
    pr.at_least("polish_rounds", p.pit_recipe.polish_rounds, 0);
    pr.non_negative("settle", p.pit_recipe.settle);
    pr.finish();
    s.at_least("optimal_iterations", p.optimal_iterations, 0);
    auto op = s.sub("optimal");
    op.non_negative("clean_rabi", p.optimal.clean_rabi);
    op.positive("clean_duration", p.optimal.clean_duration);
    op.at_least("clean_repetitions", p.optimal.clean_repetitions, 1);
    op.non_negative("guard", p.optimal.guard);
    op.finish();
    p.optimal.initial = p.pit_recipe;
    p.optimal.reburn = p.pit_recipe;
    s.get("peak_offset", p.peak_offset);
    s.positive("peak_width", p.peak_width);
    auto bb = s.sub("burnback");
    bb.non_negative("rabi_frequency", p.burnback.rabi_frequency);
    bb.positive("pulse_duration", p.burnback.pulse_duration);
    bb.at_least("depletion_cycles", p.burnback.depletion_cycles, 1);
    bb.at_least("rounds", p.burnback.rounds, 1);
    bb.non_negative("clean_rabi", p.burnback.clean_rabi);
    bb.positive("clean_duration", p.burnback.clean_duration);
    bb.at_least("clean_passes", p.burnback.clean_passes, 0);
    bb.non_negative("guard", p.burnback.guard);
    bb.at_least("polish_passes", p.burnback.polish_passes, 0);
    bb.non_negative("polish_guard", p.burnback.polish_guard);
    bb.non_negative("polish_margin", p.burnback.polish_margin);
    bb.finish();
    s.positive("optical_lifetime", p.optical_lifetime);
    s.finish();
    if (!(p.pit.hi > p.pit.lo)) throw ConfigInvalid("pumping.pit", "min must be < max");
  }
  {
    auto s = top.sub("pulse");
    auto& p = c.pulse;
    auto sh = s.sub("sechyp");
    sh.positive("peak_rabi", p.sechyp.peak_rabi);
    sh.positive("width", p.sechyp.width);
    sh.non_negative("chirp_factor", p.sechyp.chirp_factor);
    sh.get("center_time", p.sechyp.center_time);
    sh.positive("duration", p.sechyp.duration);
    sh.positive("sample_rate", p.sechyp.sample_rate);
    sh.finish();
    s.positive("beat_reference", p.beat_reference);
    s.positive("phase_floor", p.phase_floor);
    s.finish();
  }
  {
    auto s = top.sub("dynamics");
    auto& d = c.dynamics;
    auto dc = s.sub("decoherence");
    dc.positive("optical_t1", d.decoherence.optical_t1);
    dc.positive("optical_t2", d.decoherence.optical_t2);
    dc.positive("hyperfine_t2", d.decoherence.hyperfine_t2);
    dc.positive("hyperfine_t1", d.decoherence.hyperfine_t1);
    dc.finish();
    try {
      d.decoherence.validate();
    } catch (const ConfigError& e) {
      throw ConfigInvalid("dynamics.decoherence", e.what());
    }
    s.non_negative("rabi_scatter", d.rabi_scatter);
    if (d.rabi_scatter >= 1.0) throw ConfigInvalid("dynamics.rabi_scatter", "must be < 1");
    s.positive("span_linewidths", d.span_linewidths);
    s.at_least("ensemble_classes", d.ensemble_classes, 1);
    s.positive("intensity_factor", d.intensity_factor);
    s.at_least("steps_per_period", d.steps_per_period, 4);
    s.finish();
  }
  {
    auto s = top.sub("gates");
    auto& g = c.gates;
    s.at_least("excited", g.excited, 0);
    if (g.excited > 2) throw ConfigInvalid("gates.excited", "must be 0, 1 or 2");
    s.get("light_shift_compensation", g.light_shift_compensation);
    s.at_least("grid", g.grid, 1);
    s.positive("qubit_peak_width", g.qubit_peak_width);
    s.at_least("qubit_peak_classes", g.qubit_peak_classes, 1);
    s.finish();
  }
  {
    auto s = top.sub("optctrl");
    auto& o = c.optctrl;
    s.positive("bandwidth", o.bandwidth);
    s.positive("amplitude_cap", o.amplitude_cap);
    s.positive("duration", o.duration);
    s.positive("dt", o.dt);
    s.positive("target_fidelity", o.target_fidelity);
    s.at_least("max_iterations", o.max_iterations, 0);
    s.at_least("starts", o.starts, 1);
    s.non_negative("initial_taper", o.initial_taper);
    s.get("study_bandwidths", o.study_bandwidths);
    s.finish();
    for (double b : o.study_bandwidths)
      if (!(b > 0.0)) throw ConfigInvalid("optctrl.study_bandwidths", "entries must be > 0");
  }
  {
    auto s = top.sub("readout");
    auto& r = c.readout;
    auto d = s.sub("detection");
    d.positive("quantum_efficiency", r.detection.quantum_efficiency);
    d.positive("collection_efficiency", r.detection.collection_efficiency);
    d.non_negative("window", r.detection.window);
    d.positive("reference_window", r.detection.reference_window);
    d.non_negative("signal_mean", r.detection.signal_mean);
    d.non_negative("background_mean", r.detection.background_mean);
    d.positive("prior_one", r.detection.prior_one);
    d.finish();
    try {
      r.detection.validate();
    } catch (const ConfigError& e) {
      throw ConfigInvalid("readout.detection", e.what());
    }
    auto ion = s.sub("ion");
    ion.positive("zpl_wavelength_nm", r.ion.zpl_wavelength_nm);
    ion.positive("excited_lifetime_ns", r.ion.excited_lifetime_ns);
    ion.positive("homogeneous_linewidth", r.ion.homogeneous_linewidth);
    ion.positive("inhomogeneous_linewidth_ghz", r.ion.inhomogeneous_linewidth_ghz);
    ion.get("transition_offset", r.ion.transition_offset);
    ion.finish();
    s.at_least("samples", r.samples, 1);
    s.positive("shift_resolution", r.shift_resolution);
    if (auto it = root.find("readout"); it != root.end() && it->contains("chain")) {
      const Json& arr = it->at("chain");
      if (!arr.is_array()) throw ConfigInvalid("readout.chain", "expected an array");
      r.chain.clear();
      for (std::size_t i = 0; i < arr.size(); ++i) {
        detail::Section ci(arr[i], "readout.chain[" + std::to_string(i) + "]");
        ChainIon x;
        ci.get("position", x.position);
        ci.get("frequency", x.frequency);
        ci.finish();
        r.chain.push_back(x);
      }
    }
    s.mark("chain");
    s.positive("scaling_p", r.scaling_p);
    if (r.scaling_p > 1.0) throw ConfigInvalid("readout.scaling_p", "must be <= 1");
    s.at_least("scaling_n", r.scaling_n, 1);
    s.get("stark_field", r.stark_field);
    s.non_negative("stark_coefficient", r.stark_coefficient);
    s.finish();
  }
  top.finish();
  return c;
}

inline void to_json(Json& j, const ChainIon& x) {
  j = Json{{"position", x.position}, {"frequency", x.frequency}};
}
inline void from_json(const Json& j, ChainIon& x) {
  j.at("position").get_to(x.position);
  j.at("frequency").get_to(x.frequency);
}

/// Fully resolved configuration, defaults included, keys sorted.
inline Json to_json(const ExperimentConfig& c) {
  const auto& k = c.crystal;
  Json strengths = Json::array();
  for (int i = 0; i < 3; ++i)
    strengths.push_back({k.scheme.relative_strengths(i, 0), k.scheme.relative_strengths(i, 1),
                         k.scheme.relative_strengths(i, 2)});
  const auto& p = c.pumping;
  const auto& d = c.dynamics;
  const auto& r = c.readout;
  return Json{
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"crystal",
       {{"ground_splittings", k.scheme.ground_splittings},
        {"excited_splittings", k.scheme.excited_splittings},
        {"relative_strengths", strengths},
        {"homogeneous_linewidth_khz", k.scheme.homogeneous_linewidth_khz},
        {"ground_ladder", k.scheme.ground_ladder},
        {"profile", k.profile},
        {"window", {k.window.lo, k.window.hi}},
        {"n_classes", k.n_classes},
        {"alpha_l_max", k.alpha_l_max}}},
      {"pumping",
       {{"pit", {p.pit.lo, p.pit.hi}},
        {"pit_recipe",
         {{"rabi_frequency", p.pit_recipe.rabi_frequency},
          {"pulse_duration", p.pit_recipe.pulse_duration},
          {"rounds", p.pit_recipe.rounds},
          {"polish_margin", p.pit_recipe.polish_margin},
          {"polish_rounds", p.pit_recipe.polish_rounds},
          {"settle", p.pit_recipe.settle}}},
        {"optimal_iterations", p.optimal_iterations},
        {"optimal",
         {{"clean_rabi", p.optimal.clean_rabi},
          {"clean_duration", p.optimal.clean_duration},
          {"clean_repetitions", p.optimal.clean_repetitions},
          {"guard", p.optimal.guard}}},
        {"peak_offset", p.peak_offset},
        {"peak_width", p.peak_width},
        {"burnback",
         {{"rabi_frequency", p.burnback.rabi_frequency},
          {"pulse_duration", p.burnback.pulse_duration},
          {"depletion_cycles", p.burnback.depletion_cycles},
          {"rounds", p.burnback.rounds},
          {"clean_rabi", p.burnback.clean_rabi},
          {"clean_duration", p.burnback.clean_duration},
          {"clean_passes", p.burnback.clean_passes},
          {"guard", p.burnback.guard},
          {"polish_passes", p.burnback.polish_passes},
          {"polish_guard", p.burnback.polish_guard},
          {"polish_margin", p.burnback.polish_margin}}},
        {"optical_lifetime", p.optical_lifetime}}},
      {"pulse",
       {{"sechyp",
         {{"peak_rabi", c.pulse.sechyp.peak_rabi},
          {"width", c.pulse.sechyp.width},
          {"chirp_factor", c.pulse.sechyp.chirp_factor},
          {"center_time", c.pulse.sechyp.center_time},
          {"duration", c.pulse.sechyp.duration},
          {"sample_rate", c.pulse.sechyp.sample_rate}}},
        {"beat_reference", c.pulse.beat_reference},
        {"phase_floor", c.pulse.phase_floor}}},
      {"dynamics",
       {{"decoherence",
         {{"optical_t1", d.decoherence.optical_t1},
          {"optical_t2", d.decoherence.optical_t2},
          {"hyperfine_t2", d.decoherence.hyperfine_t2},
          {"hyperfine_t1", d.decoherence.hyperfine_t1}}},
        {"rabi_scatter", d.rabi_scatter},
        {"span_linewidths", d.span_linewidths},
        {"ensemble_classes", d.ensemble_classes},
        {"intensity_factor", d.intensity_factor},
        {"steps_per_period", d.steps_per_period}}},
      {"gates",
       {{"excited", c.gates.excited},
        {"light_shift_compensation", c.gates.light_shift_compensation},
        {"grid", c.gates.grid},
        {"qubit_peak_width", c.gates.qubit_peak_width},
        {"qubit_peak_classes", c.gates.qubit_peak_classes}}},
      {"optctrl",
       {{"bandwidth", c.optctrl.bandwidth},
        {"amplitude_cap", c.optctrl.amplitude_cap},
        {"duration", c.optctrl.duration},
        {"dt", c.optctrl.dt},
        {"target_fidelity", c.optctrl.target_fidelity},
        {"max_iterations", c.optctrl.max_iterations},
        {"starts", c.optctrl.starts},
        {"initial_taper", c.optctrl.initial_taper},
        {"study_bandwidths", c.optctrl.study_bandwidths}}},
      {"readout",
       {{"detection",
         {{"quantum_efficiency", r.detection.quantum_efficiency},
          {"collection_efficiency", r.detection.collection_efficiency},
          {"window", r.detection.window},
          {"reference_window", r.detection.reference_window},
          {"signal_mean", r.detection.signal_mean},
          {"background_mean", r.detection.background_mean},
          {"prior_one", r.detection.prior_one}}},
        {"ion",
         {{"zpl_wavelength_nm", r.ion.zpl_wavelength_nm},
          {"excited_lifetime_ns", r.ion.excited_lifetime_ns},
          {"homogeneous_linewidth", r.ion.homogeneous_linewidth},
          {"inhomogeneous_linewidth_ghz", r.ion.inhomogeneous_linewidth_ghz},
          {"transition_offset", r.ion.transition_offset}}},
        {"samples", r.samples},
        {"shift_resolution", r.shift_resolution},
        {"chain", r.chain},
        {"scaling_p", r.scaling_p},
        {"scaling_n", r.scaling_n},
        {"stark_field", r.stark_field},
        {"stark_coefficient", r.stark_coefficient}}},
  };
}

inline void ExperimentConfig::validate() const { parse_config(to_json(*this)); }

/// 64-bit FNV-1a of the canonical serialization, as 16 hex digits. The
/// output directory is excluded: it does not change any result.
inline std::string config_digest(const ExperimentConfig& c) {
  Json j = to_json(c);
  j.erase("output_dir");
  const std::string s = j.dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << h;
  return out.str();
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigInvalid(path, "cannot open config file");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigInvalid(path, std::string("malformed JSON: ") + e.what());
  }
  return parse_config(j);
}

}  // namespace reic::harness
