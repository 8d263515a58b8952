#include "owe/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include "owe/error.hpp"

namespace owe {

// ---------------------------------------------------------------------------
// Parsing

namespace {

[[noreturn]] void fail(const YAML::Node& n, const std::string& field, const std::string& msg) {
  if (n && n.Mark().line >= 0)
    throw ValidationError(fmt::format("line {}: {}: {}", n.Mark().line + 1, field, msg));
  throw ValidationError(fmt::format("{}: {}", field, msg));
}

std::string join(const std::string& where, const std::string& key) {
  return where.empty() ? key : where + "." + key;
}

void check_keys(const YAML::Node& n, const std::string& where, const std::set<std::string>& allowed) {
  if (!n.IsMap()) fail(n, where.empty() ? "<root>" : where, "expected a mapping");
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) fail(kv.first, join(where, key), "unknown key");
  }
}

template <class T>
T scalar(const YAML::Node& n, const std::string& field) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    fail(n, field, "wrong type");
  }
}

template <class T>
void opt(const YAML::Node& parent, const std::string& where, const char* key, T& out) {
  const YAML::Node n = parent[key];
  if (n) out = scalar<T>(n, join(where, key));
}

std::vector<double> num_list(const YAML::Node& n, const std::string& field, size_t expect = 0) {
  if (!n.IsSequence()) fail(n, field, "expected a list");
  std::vector<double> v;
  for (const auto& e : n) v.push_back(scalar<double>(e, field));
  if (expect && v.size() != expect) fail(n, field, fmt::format("expected {} numbers", expect));
  return v;
}

int ea_index(const YAML::Node& n, const std::string& field) {
  const int v = scalar<int>(n, field);
  if (v < 1) fail(n, field, fmt::format("EA number {} must be >= 1", v));
  return v - 1;
}

using CircuitField = std::pair<const char*, double EaCircuitParams::*>;
const std::vector<CircuitField>& circuit_fields() {
  static const std::vector<CircuitField> f{
      {"responsivity_a_per_w", &EaCircuitParams::responsivity_a_per_w},
      {"dark_current_a", &EaCircuitParams::dark_current_a},
      {"shunt_resistance_ohm", &EaCircuitParams::shunt_resistance_ohm},
      {"background_power_w", &EaCircuitParams::background_power_w},
      {"bandwidth_hz", &EaCircuitParams::bandwidth_hz},
      {"temperature_k", &EaCircuitParams::temperature_k},
      {"tia_feedback_ohm", &EaCircuitParams::tia_feedback_ohm},
      {"tia_voltage_noise_v_rthz", &EaCircuitParams::tia_voltage_noise_v_rthz},
      {"tia_current_noise_a_rthz", &EaCircuitParams::tia_current_noise_a_rthz},
      {"pa_input_ohm", &EaCircuitParams::pa_input_ohm},
      {"pa_feedback_ohm", &EaCircuitParams::pa_feedback_ohm},
      {"pa_voltage_noise_v_rthz", &EaCircuitParams::pa_voltage_noise_v_rthz},
      {"pa_current_noise_a_rthz", &EaCircuitParams::pa_current_noise_a_rthz},
      {"bias_tee_resistor_ohm", &EaCircuitParams::bias_tee_resistor_ohm},
      {"bias_tee_inductor_h", &EaCircuitParams::bias_tee_inductor_h},
      {"dcdc_peak_psd_v2_hz", &EaCircuitParams::dcdc_peak_psd_v2_hz},
      {"dcdc_floor_psd_v2_hz", &EaCircuitParams::dcdc_floor_psd_v2_hz},
      {"dcdc_switching_freq_hz", &EaCircuitParams::dcdc_switching_freq_hz},
      {"led_radiant_efficiency", &EaCircuitParams::led_radiant_efficiency},
      {"led_forward_voltage_v", &EaCircuitParams::led_forward_voltage_v},
  };
  return f;
}

NoiseCombination parse_combination(const YAML::Node& n, const std::string& field) {
  const auto v = scalar<std::string>(n, field);
  if (v == "coherent") return NoiseCombination::Coherent;
  if (v == "quadrature") return NoiseCombination::Quadrature;
  fail(n, field, fmt::format("'{}' is not coherent or quadrature", v));
}

const char* combination_name(NoiseCombination c) {
  return c == NoiseCombination::Coherent ? "coherent" : "quadrature";
}

void parse_layout(const YAML::Node& n, LayoutSpec& l) {
  const std::string w = "layout";
  check_keys(n, w, {"room", "clip_floor_to_room", "grid", "eas"});
  if (n["room"]) {
    const auto r = num_list(n["room"], "layout.room", 3);
    l.room = {r[0], r[1], r[2]};
  }
  opt(n, w, "clip_floor_to_room", l.clip_floor_to_room);
  if (n["grid"] && n["eas"]) fail(n, w, "give either grid or eas, not both");
  if (n["grid"]) {
    const YAML::Node g = n["grid"];
    check_keys(g, "layout.grid", {"rows", "cols", "spacing_m", "origin", "height_m"});
    GridSpec gs;
    opt(g, "layout.grid", "rows", gs.rows);
    opt(g, "layout.grid", "cols", gs.cols);
    opt(g, "layout.grid", "spacing_m", gs.spacing_m);
    opt(g, "layout.grid", "height_m", gs.height_m);
    if (g["origin"]) {
      const auto o = num_list(g["origin"], "layout.grid.origin", 2);
      gs.origin = {o[0], o[1]};
    }
    if (gs.rows < 1 || gs.cols < 1) fail(g, "layout.grid", "rows and cols must be >= 1");
    if (!(gs.spacing_m > 0.0)) fail(g, "layout.grid.spacing_m", "must be > 0");
    l.grid = gs;
  } else if (n["eas"]) {
    l.grid.reset();
    const YAML::Node list = n["eas"];
    if (!list.IsSequence() || list.size() == 0) fail(list, "layout.eas", "expected a non-empty list");
    for (size_t i = 0; i < list.size(); ++i) {
      const std::string f = fmt::format("layout.eas[{}]", i + 1);
      check_keys(list[i], f, {"position", "orientation"});
      EaPlacement p;
      if (!list[i]["position"]) fail(list[i], f + ".position", "required");
      const auto pos = num_list(list[i]["position"], f + ".position", 3);
      p.position = Vec3(pos[0], pos[1], pos[2]);
      if (list[i]["orientation"]) {
        const auto o = num_list(list[i]["orientation"], f + ".orientation", 3);
        p.orientation = Vec3(o[0], o[1], o[2]);
        if (p.orientation.norm() == 0.0) fail(list[i], f + ".orientation", "zero vector");
        p.orientation.normalize();
      }
      l.eas.push_back(p);
    }
  } else {
    fail(n, w, "needs grid or eas");
  }
}

void parse_links(const YAML::Node& n, std::vector<LinkSpec>& links) {
  if (!n.IsSequence()) fail(n, "links", "expected a list");
  for (size_t i = 0; i < n.size(); ++i) {
    const std::string f = fmt::format("links[{}]", i + 1);
    check_keys(n[i], f, {"entries", "entry", "photocurrent_a", "ap_ea"});
    LinkSpec l;
    if (!n[i]["ap_ea"]) fail(n[i], f + ".ap_ea", "required");
    l.ap_ea = ea_index(n[i]["ap_ea"], f + ".ap_ea");
    if (n[i]["entries"] && n[i]["entry"]) fail(n[i], f, "give either entry or entries");
    if (n[i]["entry"]) {
      EntrySpec e;
      e.ea = ea_index(n[i]["entry"], f + ".entry");
      opt(n[i], f, "photocurrent_a", e.photocurrent_a);
      l.entries.push_back(e);
    } else if (n[i]["entries"]) {
      if (n[i]["photocurrent_a"]) fail(n[i], f + ".photocurrent_a", "belongs inside each entry");
      const YAML::Node es = n[i]["entries"];
      if (!es.IsSequence() || es.size() == 0) fail(es, f + ".entries", "expected a non-empty list");
      for (size_t k = 0; k < es.size(); ++k) {
        const std::string fe = fmt::format("{}.entries[{}]", f, k + 1);
        check_keys(es[k], fe, {"ea", "photocurrent_a"});
        EntrySpec e;
        if (!es[k]["ea"]) fail(es[k], fe + ".ea", "required");
        e.ea = ea_index(es[k]["ea"], fe + ".ea");
        opt(es[k], fe, "photocurrent_a", e.photocurrent_a);
        l.entries.push_back(e);
      }
    } else {
      fail(n[i], f, "needs entry or entries");
    }
    links.push_back(l);
  }
}

}  // namespace

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Coverage: return "coverage";
    case ExperimentKind::SingleBss: return "single-bss";
    case ExperimentKind::MultiBss: return "multi-bss";
    case ExperimentKind::Sweep: return "sweep";
    case ExperimentKind::Blockage: return "blockage";
    case ExperimentKind::Probe: return "probe";
  }
  return "?";
}

ExperimentKind parse_kind(const std::string& s) {
  static const std::map<std::string, ExperimentKind> m{
      {"coverage", ExperimentKind::Coverage}, {"single-bss", ExperimentKind::SingleBss},
      {"multi-bss", ExperimentKind::MultiBss}, {"sweep", ExperimentKind::Sweep},
      {"blockage", ExperimentKind::Blockage}, {"probe", ExperimentKind::Probe}};
  auto it = m.find(s);
  if (it == m.end()) throw ValidationError(fmt::format("unknown experiment '{}'", s));
  return it->second;
}

Scenario parse_scenario(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ValidationError(fmt::format("line {}: malformed YAML: {}", e.mark.line + 1, e.msg));
  }
  if (!root || root.IsNull())
    throw ValidationError("empty scenario; required fields: version, experiment, layout");
  check_keys(root, "", {"version", "experiment", "name", "layout", "optics", "circuit", "links", "numerics",
                        "optimizer", "coverage", "sweep", "blockage", "probe"});
  std::vector<std::string> missing;
  for (const char* k : {"version", "experiment", "layout"})
    if (!root[k]) missing.push_back(k);
  if (!missing.empty()) {
    std::string m;
    for (const auto& k : missing) m += (m.empty() ? "" : ", ") + k;
    throw ValidationError(fmt::format("missing required fields: {}", m));
  }

  Scenario s;
  s.version = scalar<int>(root["version"], "version");
  if (s.version != kScenarioVersion)
    fail(root["version"], "version", fmt::format("unsupported version {} (expected {})", s.version, kScenarioVersion));
  try {
    s.kind = parse_kind(scalar<std::string>(root["experiment"], "experiment"));
  } catch (const ValidationError& e) {
    fail(root["experiment"], "experiment", e.what());
  }
  opt(root, "", "name", s.name);
  parse_layout(root["layout"], s.layout);

  if (const YAML::Node o = root["optics"]) {
    check_keys(o, "optics", {"half_power_angle_deg", "acceptance_angle_deg", "refractive_index", "receiver_area_m2",
                             "floor_reflectivity"});
    opt(o, "optics", "half_power_angle_deg", s.optics.half_power_angle_deg);
    opt(o, "optics", "acceptance_angle_deg", s.optics.acceptance_angle_deg);
    opt(o, "optics", "refractive_index", s.optics.refractive_index);
    opt(o, "optics", "receiver_area_m2", s.optics.receiver_area_m2);
    opt(o, "optics", "floor_reflectivity", s.optics.floor_reflectivity);
  }
  if (const YAML::Node c = root["circuit"]) {
    std::set<std::string> allowed;
    for (const auto& [k, _] : circuit_fields()) allowed.insert(k);
    allowed.insert("pa_gain");
    check_keys(c, "circuit", allowed);
    if (c["pa_gain"] && c["pa_feedback_ohm"]) fail(c, "circuit", "give pa_gain or pa_feedback_ohm, not both");
    for (const auto& [k, member] : circuit_fields()) opt(c, "circuit", k, s.circuit.*member);
    if (c["pa_gain"]) s.circuit = s.circuit.with_pa_gain(scalar<double>(c["pa_gain"], "circuit.pa_gain"));
  }
  if (root["links"]) parse_links(root["links"], s.links);
  if (const YAML::Node n = root["numerics"]) {
    const std::string w = "numerics";
    check_keys(n, w, {"integration_cell_m", "integration_extent_m", "margin", "noise_reference_power_w",
                      "noise_combination", "ap_noise_a"});
    opt(n, w, "integration_cell_m", s.numerics.integration_cell_m);
    opt(n, w, "integration_extent_m", s.numerics.integration_extent_m);
    opt(n, w, "margin", s.numerics.margin);
    opt(n, w, "noise_reference_power_w", s.numerics.noise_reference_power_w);
    opt(n, w, "ap_noise_a", s.numerics.ap_noise_a);
    if (n["noise_combination"])
      s.numerics.noise_combination = parse_combination(n["noise_combination"], "numerics.noise_combination");
  }
  s.optimizer.bounds.margin = s.numerics.margin;
  if (const YAML::Node n = root["optimizer"]) {
    const std::string w = "optimizer";
    check_keys(n, w, {"t0", "alpha", "t_min", "max_iter", "step_scale", "seed", "restarts", "g_max",
                      "coords_per_move", "trace"});
    auto& sc = s.optimizer.schedule;
    opt(n, w, "t0", sc.t0);
    opt(n, w, "alpha", sc.alpha);
    opt(n, w, "t_min", sc.t_min);
    opt(n, w, "max_iter", sc.max_iter);
    opt(n, w, "step_scale", sc.step_scale);
    opt(n, w, "seed", sc.rng_seed);
    opt(n, w, "restarts", sc.restarts);
    opt(n, w, "trace", sc.record_trace);
    opt(n, w, "g_max", s.optimizer.bounds.g_max);
    opt(n, w, "coords_per_move", s.optimizer.bounds.coords_per_move);
  }
  if (const YAML::Node n = root["coverage"]) {
    const std::string w = "coverage";
    check_keys(n, w, {"hops", "pa_gains", "source_power_w", "model", "noise_combination"});
    opt(n, w, "hops", s.coverage.hops);
    opt(n, w, "source_power_w", s.coverage.source_power_w);
    if (n["pa_gains"]) s.coverage.pa_gains = num_list(n["pa_gains"], "coverage.pa_gains");
    if (n["model"]) {
      const auto m = scalar<std::string>(n["model"], "coverage.model");
      if (m == "forward")
        s.coverage.model = CoverageModel::Forward;
      else if (m == "full")
        s.coverage.model = CoverageModel::Full;
      else
        fail(n["model"], "coverage.model", fmt::format("'{}' is not forward or full", m));
    }
    if (n["noise_combination"])
      s.coverage.noise_combination = parse_combination(n["noise_combination"], "coverage.noise_combination");
  }
  if (const YAML::Node n = root["sweep"]) {
    check_keys(n, "sweep", {"ratio_min", "ratio_max", "points"});
    opt(n, "sweep", "ratio_min", s.sweep.ratio_min);
    opt(n, "sweep", "ratio_max", s.sweep.ratio_max);
    opt(n, "sweep", "points", s.sweep.points);
  }
  if (const YAML::Node n = root["blockage"]) {
    check_keys(n, "blockage", {"path", "edge", "tone_a", "detection_factor", "pass_fraction"});
    if (n["path"]) {
      if (!n["path"].IsSequence()) fail(n["path"], "blockage.path", "expected a list");
      for (const auto& e : n["path"]) s.blockage.path.push_back(ea_index(e, "blockage.path"));
    }
    if (n["edge"]) {
      const YAML::Node e = n["edge"];
      if (!e.IsSequence() || e.size() != 2) fail(e, "blockage.edge", "expected two EA numbers");
      s.blockage.edge = {ea_index(e[0], "blockage.edge"), ea_index(e[1], "blockage.edge")};
    }
    opt(n, "blockage", "tone_a", s.blockage.tone_a);
    opt(n, "blockage", "detection_factor", s.blockage.detection_factor);
    opt(n, "blockage", "pass_fraction", s.blockage.pass_fraction);
  }
  if (const YAML::Node n = root["probe"]) {
    check_keys(n, "probe", {"known_gain", "tone_a", "threshold", "relative_noise"});
    opt(n, "probe", "known_gain", s.probe.known_gain);
    opt(n, "probe", "tone_a", s.probe.tone_a);
    opt(n, "probe", "relative_noise", s.probe.relative_noise);
    if (n["threshold"] && !n["threshold"].IsNull())
      s.probe.threshold = scalar<double>(n["threshold"], "probe.threshold");
  }
  s.validate();
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot read scenario file {}", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

int Scenario::ea_count() const {
  if (layout.grid) return layout.grid->rows * layout.grid->cols;
  return static_cast<int>(layout.eas.size());
}

void Scenario::validate() const {
  const int n = ea_count();
  if (n < 1) throw ValidationError("layout defines no EAs");
  if (!(layout.room[0] > 0.0 && layout.room[1] > 0.0 && layout.room[2] > 0.0))
    throw ValidationError("layout.room dimensions must be > 0");
  for (const auto& p : layout.poses()) {
    if (p.position.z() < 0.0 || p.position.z() > layout.room[2])
      throw ValidationError(fmt::format("EA height {} m outside [0, {}] m", p.position.z(), layout.room[2]));
  }
  auto check_ea = [&](int i, const std::string& field) {
    if (i < 0 || i >= n)
      throw ValidationError(fmt::format("{}: EA {} out of range 1..{}", field, i + 1, n));
  };
  for (size_t i = 0; i < links.size(); ++i) {
    const std::string f = fmt::format("links[{}]", i + 1);
    check_ea(links[i].ap_ea, f + ".ap_ea");
    if (links[i].entries.empty()) throw ValidationError(f + ": no entry EAs");
    for (const auto& e : links[i].entries) {
      check_ea(e.ea, f + ".entry");
      if (!(e.photocurrent_a >= 0.0)) throw ValidationError(f + ": photocurrent must be >= 0");
    }
    const bool joint = kind == ExperimentKind::MultiBss || kind == ExperimentKind::Sweep;
    for (size_t j = 0; joint && j < i; ++j)
      if (links[j].ap_ea == links[i].ap_ea)
        throw ValidationError(fmt::format("links[{}] and links[{}] share AP EA {}", j + 1, i + 1, links[i].ap_ea + 1));
  }
  try {
    circuit.validate();
    optimizer.schedule.validate();
    optimizer.bounds.validate();
    EmitterParams::from_half_power_angle(1.0, deg2rad(optics.half_power_angle_deg));
    floor_model(*this).validate();
  } catch (const DomainError& e) {
    throw ValidationError(e.what());
  }
  switch (kind) {
    case ExperimentKind::Coverage:
      if (coverage.hops < 1) throw ValidationError("coverage.hops must be >= 1");
      if (n != coverage.hops + 1)
        throw ValidationError(fmt::format("coverage needs hops + 1 = {} EAs, layout has {}", coverage.hops + 1, n));
      if (coverage.pa_gains.empty()) throw ValidationError("coverage.pa_gains is empty");
      for (double g : coverage.pa_gains)
        if (!(g >= 0.0)) throw ValidationError("coverage.pa_gains must be >= 0");
      break;
    case ExperimentKind::SingleBss:
    case ExperimentKind::Probe:
      if (links.empty()) throw ValidationError("links: at least one link is required");
      break;
    case ExperimentKind::MultiBss:
      if (links.size() < 2) throw ValidationError("links: multi-bss needs at least two links");
      break;
    case ExperimentKind::Sweep:
      if (links.size() != 2) throw ValidationError("links: sweep needs exactly two links");
      if (!(sweep.ratio_min > 0.0 && sweep.ratio_max >= sweep.ratio_min && sweep.points >= 1))
        throw ValidationError("sweep range must satisfy 0 < ratio_min <= ratio_max and points >= 1");
      break;
    case ExperimentKind::Blockage:
      if (links.size() != 1) throw ValidationError("links: blockage needs exactly one link");
      if (blockage.path.size() < 2) throw ValidationError("blockage.path needs at least two EAs");
      for (int i : blockage.path) check_ea(i, "blockage.path");
      if (blockage.path.back() != links[0].ap_ea)
        throw ValidationError("blockage.path must end at the link's AP EA");
      check_ea(blockage.edge.first, "blockage.edge");
      check_ea(blockage.edge.second, "blockage.edge");
      break;
  }
}

std::vector<Pose> LayoutSpec::poses() const {
  std::vector<Pose> out;
  if (grid) {
    for (int r = 0; r < grid->rows; ++r)
      for (int c = 0; c < grid->cols; ++c) {
        Pose p;
        p.position = Vec3(grid->origin[0] + c * grid->spacing_m, grid->origin[1] + r * grid->spacing_m, grid->height_m);
        out.push_back(p);
      }
  } else {
    for (const auto& e : eas) out.push_back(Pose{e.position, e.orientation});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Emission

std::string emit_scenario(const Scenario& s) {
  YAML::Emitter e;
  e.SetDoublePrecision(17);
  e << YAML::BeginMap;
  e << YAML::Key << "version" << YAML::Value << s.version;
  e << YAML::Key << "experiment" << YAML::Value << to_string(s.kind);
  e << YAML::Key << "name" << YAML::Value << s.name;

  e << YAML::Key << "layout" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "room" << YAML::Value << YAML::Flow << std::vector<double>(s.layout.room.begin(), s.layout.room.end());
  e << YAML::Key << "clip_floor_to_room" << YAML::Value << s.layout.clip_floor_to_room;
  if (s.layout.grid) {
    const auto& g = *s.layout.grid;
    e << YAML::Key << "grid" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "rows" << YAML::Value << g.rows;
    e << YAML::Key << "cols" << YAML::Value << g.cols;
    e << YAML::Key << "spacing_m" << YAML::Value << g.spacing_m;
    e << YAML::Key << "origin" << YAML::Value << YAML::Flow << std::vector<double>{g.origin[0], g.origin[1]};
    e << YAML::Key << "height_m" << YAML::Value << g.height_m;
    e << YAML::EndMap;
  } else {
    e << YAML::Key << "eas" << YAML::Value << YAML::BeginSeq;
    for (const auto& p : s.layout.eas) {
      e << YAML::BeginMap;
      e << YAML::Key << "position" << YAML::Value << YAML::Flow
        << std::vector<double>{p.position.x(), p.position.y(), p.position.z()};
      e << YAML::Key << "orientation" << YAML::Value << YAML::Flow
        << std::vector<double>{p.orientation.x(), p.orientation.y(), p.orientation.z()};
      e << YAML::EndMap;
    }
    e << YAML::EndSeq;
  }
  e << YAML::EndMap;

  e << YAML::Key << "optics" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "half_power_angle_deg" << YAML::Value << s.optics.half_power_angle_deg;
  e << YAML::Key << "acceptance_angle_deg" << YAML::Value << s.optics.acceptance_angle_deg;
  e << YAML::Key << "refractive_index" << YAML::Value << s.optics.refractive_index;
  e << YAML::Key << "receiver_area_m2" << YAML::Value << s.optics.receiver_area_m2;
  e << YAML::Key << "floor_reflectivity" << YAML::Value << s.optics.floor_reflectivity;
  e << YAML::EndMap;

  e << YAML::Key << "circuit" << YAML::Value << YAML::BeginMap;
  for (const auto& [k, member] : circuit_fields()) e << YAML::Key << k << YAML::Value << s.circuit.*member;
  e << YAML::EndMap;

  e << YAML::Key << "links" << YAML::Value << YAML::BeginSeq;
  for (const auto& l : s.links) {
    e << YAML::BeginMap << YAML::Key << "entries" << YAML::Value << YAML::BeginSeq;
    for (const auto& en : l.entries)
      e << YAML::Flow << YAML::BeginMap << YAML::Key << "ea" << YAML::Value << en.ea + 1 << YAML::Key
        << "photocurrent_a" << YAML::Value << en.photocurrent_a << YAML::EndMap;
    e << YAML::EndSeq << YAML::Key << "ap_ea" << YAML::Value << l.ap_ea + 1 << YAML::EndMap;
  }
  e << YAML::EndSeq;

  const auto& nu = s.numerics;
  e << YAML::Key << "numerics" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "integration_cell_m" << YAML::Value << nu.integration_cell_m;
  e << YAML::Key << "integration_extent_m" << YAML::Value << nu.integration_extent_m;
  e << YAML::Key << "margin" << YAML::Value << nu.margin;
  e << YAML::Key << "noise_reference_power_w" << YAML::Value << nu.noise_reference_power_w;
  e << YAML::Key << "noise_combination" << YAML::Value << combination_name(nu.noise_combination);
  e << YAML::Key << "ap_noise_a" << YAML::Value << nu.ap_noise_a;
  e << YAML::EndMap;

  const auto& sc = s.optimizer.schedule;
  e << YAML::Key << "optimizer" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "t0" << YAML::Value << sc.t0;
  e << YAML::Key << "alpha" << YAML::Value << sc.alpha;
  e << YAML::Key << "t_min" << YAML::Value << sc.t_min;
  e << YAML::Key << "max_iter" << YAML::Value << sc.max_iter;
  e << YAML::Key << "step_scale" << YAML::Value << sc.step_scale;
  e << YAML::Key << "seed" << YAML::Value << sc.rng_seed;
  e << YAML::Key << "restarts" << YAML::Value << sc.restarts;
  e << YAML::Key << "trace" << YAML::Value << sc.record_trace;
  e << YAML::Key << "g_max" << YAML::Value << s.optimizer.bounds.g_max;
  e << YAML::Key << "coords_per_move" << YAML::Value << s.optimizer.bounds.coords_per_move;
  e << YAML::EndMap;

  e << YAML::Key << "coverage" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "hops" << YAML::Value << s.coverage.hops;
  e << YAML::Key << "pa_gains" << YAML::Value << YAML::Flow << s.coverage.pa_gains;
  e << YAML::Key << "source_power_w" << YAML::Value << s.coverage.source_power_w;
  e << YAML::Key << "model" << YAML::Value << (s.coverage.model == CoverageModel::Forward ? "forward" : "full");
  e << YAML::Key << "noise_combination" << YAML::Value << combination_name(s.coverage.noise_combination);
  e << YAML::EndMap;

  e << YAML::Key << "sweep" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "ratio_min" << YAML::Value << s.sweep.ratio_min;
  e << YAML::Key << "ratio_max" << YAML::Value << s.sweep.ratio_max;
  e << YAML::Key << "points" << YAML::Value << s.sweep.points;
  e << YAML::EndMap;

  e << YAML::Key << "blockage" << YAML::Value << YAML::BeginMap;
  std::vector<int> path1;
  for (int i : s.blockage.path) path1.push_back(i + 1);
  e << YAML::Key << "path" << YAML::Value << YAML::Flow << path1;
  if (s.blockage.edge.first >= 0)
    e << YAML::Key << "edge" << YAML::Value << YAML::Flow
      << std::vector<int>{s.blockage.edge.first + 1, s.blockage.edge.second + 1};
  e << YAML::Key << "tone_a" << YAML::Value << s.blockage.tone_a;
  e << YAML::Key << "detection_factor" << YAML::Value << s.blockage.detection_factor;
  e << YAML::Key << "pass_fraction" << YAML::Value << s.blockage.pass_fraction;
  e << YAML::EndMap;

  e << YAML::Key << "probe" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "known_gain" << YAML::Value << s.probe.known_gain;
  e << YAML::Key << "tone_a" << YAML::Value << s.probe.tone_a;
  if (s.probe.threshold) e << YAML::Key << "threshold" << YAML::Value << *s.probe.threshold;
  e << YAML::Key << "relative_noise" << YAML::Value << s.probe.relative_noise;
  e << YAML::EndMap;

  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

std::string scenario_digest(const Scenario& s) {
  const std::string text = emit_scenario(s);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 computation failed");
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

// ---------------------------------------------------------------------------
// Model

FloorModel floor_model(const Scenario& s) {
  FloorModel f;
  f.reflectivity = s.optics.floor_reflectivity;
  f.integration_cell_m = s.numerics.integration_cell_m;
  f.integration_extent_m = s.numerics.integration_extent_m;
  if (s.layout.clip_floor_to_room) f.bounds = FloorBounds{0.0, s.layout.room[0], 0.0, s.layout.room[1]};
  return f;
}

Model build_model(const Scenario& s) {
  s.validate();
  Model m;
  m.poses = s.layout.poses();
  const auto emitter = EmitterParams::from_half_power_angle(1.0, deg2rad(s.optics.half_power_angle_deg));
  ReceiverParams rx;
  rx.area_m2 = s.optics.receiver_area_m2;
  rx.acceptance_angle_rad = deg2rad(s.optics.acceptance_angle_deg);
  rx.refractive_index = s.optics.refractive_index;
  m.h = build_channel_matrix(m.poses, emitter, rx, floor_model(s), s.circuit);
  const int n = m.h.n();
  m.budget = noise_budget(s.numerics.noise_reference_power_w, s.circuit);
  m.noise = NoiseVectors::uniform(n, m.budget);
  m.noise.ap_noise_a = s.numerics.ap_noise_a;
  for (const auto& l : s.links) {
    BssLink b;
    b.entry_weights = Vector::Zero(n);
    for (const auto& e : l.entries) b.entry_weights[e.ea] += e.photocurrent_a;
    b.ap_ea_index = l.ap_ea;
    m.links.push_back(b);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Experiments

namespace {

double snr_ratio(double s, double n) {
  if (s == 0.0) return 0.0;
  if (n == 0.0) return std::numeric_limits<double>::infinity();
  return (s * s) / (n * n);
}

SingleBssProblem single_problem(const Scenario& s, const Model& m, const BssLink& link) {
  SingleBssProblem p{m.h, link, m.noise, s.numerics.noise_combination, s.optimizer.bounds, s.optimizer.schedule,
                     std::nullopt};
  p.bounds.margin = s.numerics.margin;
  return p;
}

}  // namespace

CoverageResult run_coverage(const Scenario& s, const Model& m) {
  const int n = m.h.n();
  const int hops = s.coverage.hops;
  const auto comb = s.coverage.noise_combination;
  const double i_source = s.coverage.source_power_w / s.circuit.led_watts_per_amp();

  // Forward model: each EA hears every upstream EA, nothing else.
  Matrix hf = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) hf(i, j) = m.h.h(i, j);
  const ChannelMatrix fwd(hf);

  NoiseVectors noise = m.noise;
  noise.n_gain_dep[0] = 0.0;  // the source is noise-free
  noise.n_additive[0] = 0.0;

  Vector x_fwd = hf.row(0).transpose() * i_source;
  x_fwd[0] = 0.0;
  Vector x_full = m.h.h.row(0).transpose() * i_source;
  x_full[0] = 0.0;

  CoverageResult out;
  for (double pa : s.coverage.pa_gains) {
    const double G = ea_gain_for_pa_gain(pa, s.circuit);
    Vector g = Vector::Constant(n, G);
    g[0] = 0.0;

    const ChannelMatrix& primary = s.coverage.model == CoverageModel::Forward ? fwd : m.h;
    const Vector& x = s.coverage.model == CoverageModel::Forward ? x_fwd : x_full;

    std::optional<Response> full_led;
    const bool full_stable = spectral_radius(m.h, g) < 1.0;
    if (!full_stable) {
      Matrix sub = m.h.h.bottomRightCorner(n - 1, n - 1);
      const double gmax = max_equal_gain(ChannelMatrix(sub), s.numerics.margin);
      const double pa_max = gmax * s.circuit.bias_tee_resistor_ohm / s.circuit.tia_feedback_ohm;
      out.full_max_equal_pa_gain.emplace_back(pa, pa_max);
      if (s.coverage.model == CoverageModel::Full)
        throw InstabilityError(fmt::format(
            "full feedback model is unstable at PA gain {}; largest stable equal PA gain with margin {} is {:.4g}",
            pa, s.numerics.margin, pa_max));
    } else {
      full_led = led_response(m.h, g, x_full, noise, comb);
    }

    const Response led = led_response(primary, g, x, noise, comb);
    const Response pd = solve_response(primary, g, x, noise, comb);

    // Hop-by-hop recursion through the EA circuit chain.
    std::vector<double> sig(n, 0.0), nse(n, 0.0);
    sig[0] = i_source;
    for (int k = 1; k <= hops; ++k) {
      double s_in = 0.0, n_in2 = 0.0;
      for (int i = 0; i < k; ++i) {
        s_in += m.h.h(i, k) * sig[i];
        n_in2 += std::pow(m.h.h(i, k) * nse[i], 2);
      }
      const LedOutput o = led_output(s_in, G, m.budget);
      sig[k] = o.signal_a;
      nse[k] = std::sqrt(G * G * n_in2 + o.noise_a * o.noise_a);

      CoverageRow row;
      row.pa_gain = pa;
      row.hop = k;
      row.ea_gain = G;
      row.led_signal_a = led.signal[k];
      row.led_noise_a = led.noise[k];
      row.led_snr = snr_ratio(led.signal[k], led.noise[k]);
      row.pd_snr = snr_ratio(pd.signal[k], std::hypot(pd.noise[k], noise.n_gain_dep[k]));
      row.chain_snr = snr_ratio(sig[k], nse[k]);
      if (full_led) row.full_snr = snr_ratio(full_led->signal[k], full_led->noise[k]);
      out.rows.push_back(row);
    }
  }
  return out;
}

std::vector<SingleBssRow> run_single_bss(const Scenario& s, const Model& m) {
  std::vector<SingleBssRow> rows;
  for (size_t i = 0; i < m.links.size(); ++i) {
    SingleBssRow r;
    r.link = static_cast<int>(i);
    r.entry_ea = s.links[i].entries.front().ea;
    r.ap_ea = s.links[i].ap_ea;
    r.result = optimize_single_bss(single_problem(s, m, m.links[i]));
    rows.push_back(std::move(r));
  }
  return rows;
}

MultiBssOutcome run_multi_bss(const Scenario& s, const Model& m) {
  MultiBssProblem p{m.h, m.links, m.noise, s.numerics.noise_combination, s.optimizer.bounds, s.optimizer.schedule};
  p.bounds.margin = s.numerics.margin;
  MultiBssOutcome out;
  out.result = optimize_multi_bss(p);
  for (size_t i = 0; i < m.links.size(); ++i) {
    out.degradation_db.push_back(to_db(out.result.sinr.sinr[i]) - to_db(out.result.gamma_star[i]));
    const double sp = out.result.sinr.signal_power[i];
    out.interference_ratio.push_back(sp > 0.0 ? out.result.sinr.interference_power[i] / sp
                                              : std::numeric_limits<double>::infinity());
  }
  return out;
}

std::vector<SweepRow> run_power_sweep(const Scenario& s, const Model& m) {
  std::vector<SweepRow> rows;
  const int pts = s.sweep.points;
  const double v1 = m.links[0].entry_weights.sum();
  for (int k = 0; k < pts; ++k) {
    const double t = pts == 1 ? 0.0 : static_cast<double>(k) / (pts - 1);
    const double ratio = s.sweep.ratio_min * std::pow(s.sweep.ratio_max / s.sweep.ratio_min, t);
    Model mk = m;
    const double v2 = mk.links[1].entry_weights.sum();
    if (!(v2 > 0.0)) throw ValidationError("sweep: link 2 needs a nonzero photocurrent");
    mk.links[1].entry_weights *= ratio * v1 / v2;
    SweepRow r;
    r.ratio = ratio;
    r.outcome = run_multi_bss(s, mk);
    rows.push_back(std::move(r));
  }
  return rows;
}

BlockageOutcome run_blockage(const Scenario& s, const Model& m) {
  BlockageOutcome out;
  const SingleBssProblem p = single_problem(s, m, m.links[0]);
  const SingleBssResult base = optimize_single_bss(p);
  out.operating_gains = base.opt.best_gains;
  out.snr_operating = base.snr;
  const ChannelMatrix world = inject_blockage(m.h, s.blockage.edge.first, s.blockage.edge.second);
  DetectOptions d;
  d.tone_a = s.blockage.tone_a;
  d.detection_factor = s.blockage.detection_factor;
  d.pass_fraction = s.blockage.pass_fraction;
  d.combination = s.numerics.noise_combination;
  out.detection = detect_blockage(s.blockage.path, world, m.h, out.operating_gains, m.noise, d);
  if (out.detection.status == BlockageStatus::Localized)
    out.reroute = reroute_after_blockage(p, out.operating_gains, world, out.detection.edge);
  return out;
}

ChannelEstimate run_probe(const Scenario& s, const Model& m) {
  ProbeOptions o;
  o.known_gain = s.probe.known_gain;
  o.tone_a = s.probe.tone_a;
  o.threshold = s.probe.threshold;
  o.relative_noise = s.probe.relative_noise;
  o.seed = s.optimizer.schedule.rng_seed;
  return probe_from_scratch(m.h, s.links[0].ap_ea, o);
}

// ---------------------------------------------------------------------------
// Reports

std::string format_db(double linear) {
  const double d = to_db(linear);
  if (std::isinf(d)) return d > 0 ? "inf" : "-inf";
  if (std::isnan(d)) return "nan";
  return fmt::format("{:.2f}", d);
}

std::string format_raw(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return fmt::format("{:.17g}", v);
}

namespace {

std::string fmt_dbv(double db) {
  if (std::isinf(db)) return db > 0 ? "inf" : "-inf";
  return fmt::format("{:.2f}", db);
}

std::string gains_hash(const Vector& g) {
  std::uint64_t h = 1469598103934665603ull;
  for (int i = 0; i < g.size(); ++i)
    for (char c : format_raw(g[i]) + ";") {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ull;
    }
  return fmt::format("{:016x}", h);
}

Table gains_table(const std::string& name, const std::vector<std::pair<std::string, Vector>>& cols,
                  const EaCircuitParams& c) {
  Table t{name, {"ea"}, {}};
  for (const auto& [k, _] : cols) {
    t.columns.push_back(k);
    t.columns.push_back(k + "_pa");
  }
  const int n = static_cast<int>(cols.front().second.size());
  const double per_pa = c.tia_feedback_ohm / c.bias_tee_resistor_ohm;
  for (int i = 0; i < n; ++i) {
    std::vector<std::string> row{std::to_string(i + 1)};
    for (const auto& [_, g] : cols) {
      row.push_back(format_raw(g[i]));
      row.push_back(fmt::format("{:.4f}", g[i] / per_pa));
    }
    t.rows.push_back(row);
  }
  return t;
}

Table probe_log_table(const std::string& name, const std::vector<ProbeObservation>& log) {
  Table t{name, {"step", "emitting_ea", "gains_hash", "tone_a", "ap_reading_a", "expected_a", "decision"}, {}};
  for (const auto& o : log)
    t.rows.push_back({std::to_string(o.step), std::to_string(o.emitting_ea + 1), gains_hash(o.active_gains),
                      format_raw(o.tone_amplitude), format_raw(o.received_at_ap), format_raw(o.expected_at_ap), o.decision});
  return t;
}

Table trace_table(const std::vector<TraceRow>& trace) {
  Table t{"trace", {"iteration", "temperature", "objective", "accepted"}, {}};
  for (const auto& r : trace)
    t.rows.push_back({std::to_string(r.iteration), format_raw(r.temperature), format_raw(r.objective),
                      r.accepted ? "1" : "0"});
  return t;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void add_multi_rows(Table& t, const std::string& prefix, const Scenario& s, const MultiBssOutcome& o) {
  for (size_t i = 0; i < o.degradation_db.size(); ++i) {
    std::vector<std::string> row;
    if (!prefix.empty()) row.push_back(prefix);
    row.insert(row.end(), {std::to_string(i + 1), std::to_string(s.links[i].entries.front().ea + 1),
                           std::to_string(s.links[i].ap_ea + 1), format_db(o.result.gamma_star[i]),
                           format_db(o.result.sinr.sinr[i]), fmt_dbv(o.degradation_db[i]),
                           format_raw(o.interference_ratio[i]), format_raw(o.result.gamma_star[i]),
                           format_raw(o.result.sinr.sinr[i])});
    t.rows.push_back(row);
  }
}

const std::vector<std::string> kMultiCols{"link", "entry_ea", "ap_ea", "gamma_star_db", "sinr_db",
                                          "degradation_db", "interference_ratio", "gamma_star", "sinr"};

}  // namespace

RunReport run_scenario(const Scenario& s) {
  RunReport r;
  r.kind = to_string(s.kind);
  r.scenario_name = s.name;
  r.digest = scenario_digest(s);
  r.seed = s.optimizer.schedule.rng_seed;
  r.started_utc = utc_now();
  const Model m = build_model(s);
  r.summary.push_back(fmt::format("EAs: {}; noise budget at {} W: n_pd {:.4g} A, n_tia {:.4g} A, n_pa {:.4g} A, "
                                  "n_dcdc {:.4g} A",
                                  m.h.n(), s.numerics.noise_reference_power_w, m.budget.n_pd_a, m.budget.n_tia_a,
                                  m.budget.n_pa_tia_a, m.budget.n_dcdc_a));

  Table hm{"channel_matrix", {"from_ea", "to_ea", "h"}, {}};
  for (int i = 0; i < m.h.n(); ++i)
    for (int j = 0; j < m.h.n(); ++j)
      hm.rows.push_back({std::to_string(i + 1), std::to_string(j + 1), fmt::format("{:.15g}", m.h.h(i, j))});

  switch (s.kind) {
    case ExperimentKind::Coverage: {
      const CoverageResult c = run_coverage(s, m);
      Table t{"coverage",
              {"pa_gain", "hop", "ea", "ea_gain", "led_snr_db", "pd_snr_db", "chain_snr_db", "full_snr_db",
               "led_signal_a", "led_noise_a", "led_snr"},
              {}};
      for (const auto& row : c.rows)
        t.rows.push_back({format_raw(row.pa_gain), std::to_string(row.hop), std::to_string(row.hop + 1),
                          format_raw(row.ea_gain), format_db(row.led_snr), format_db(row.pd_snr),
                          format_db(row.chain_snr), row.full_snr ? format_db(*row.full_snr) : "unstable",
                          format_raw(row.led_signal_a), format_raw(row.led_noise_a), format_raw(row.led_snr)});
      for (const auto& [pa, pmax] : c.full_max_equal_pa_gain)
        r.summary.push_back(fmt::format("PA gain {}: bidirectional model unstable; largest stable equal PA gain {:.4g}",
                                        pa, pmax));
      for (double pa : s.coverage.pa_gains) {
        int last_ok = 0;
        double last = 0.0;
        for (const auto& row : c.rows)
          if (row.pa_gain == pa) {
            if (to_db(row.led_snr) > 0.0 && last_ok == row.hop - 1) last_ok = row.hop;
            last = row.led_snr;
          }
        r.summary.push_back(fmt::format("PA gain {}: SNR at hop {} = {} dB; SNR > 0 dB through hop {}", pa,
                                        s.coverage.hops, format_db(last), last_ok));
      }
      r.tables.push_back(std::move(t));
      break;
    }
    case ExperimentKind::SingleBss: {
      const auto rows = run_single_bss(s, m);
      Table t{"single_bss",
              {"entry_ea", "snr_db", "improvement_db", "ap_ea", "baseline_snr_db", "snr", "baseline_snr",
               "baseline_gain"},
              {}};
      std::vector<std::pair<std::string, Vector>> cols;
      for (const auto& row : rows) {
        const auto& res = row.result;
        t.rows.push_back({std::to_string(row.entry_ea + 1), format_db(res.snr),
                          fmt_dbv(to_db(res.snr) - to_db(res.baseline_snr)), std::to_string(row.ap_ea + 1),
                          format_db(res.baseline_snr), format_raw(res.snr), format_raw(res.baseline_snr),
                          format_raw(res.baseline_gain)});
        cols.emplace_back(fmt::format("entry{}", row.entry_ea + 1), res.opt.best_gains);
        r.summary.push_back(fmt::format("entry EA{} -> AP EA{}: SNR {} dB, equal-gain baseline {} dB", row.entry_ea + 1,
                                        row.ap_ea + 1, format_db(res.snr), format_db(res.baseline_snr)));
        if (s.optimizer.schedule.record_trace && !res.opt.trace.empty()) {
          Table tr = trace_table(res.opt.trace);
          tr.name = fmt::format("trace_entry{}", row.entry_ea + 1);
          r.tables.push_back(std::move(tr));
        }
      }
      r.tables.insert(r.tables.begin(), std::move(t));
      r.tables.push_back(gains_table("gains", cols, s.circuit));
      break;
    }
    case ExperimentKind::MultiBss: {
      const auto o = run_multi_bss(s, m);
      Table t{"multi_bss", kMultiCols, {}};
      add_multi_rows(t, "", s, o);
      for (size_t i = 0; i < o.degradation_db.size(); ++i)
        r.summary.push_back(fmt::format("link {}: SINR {} dB, degradation {} dB, interference ratio {:.3g}", i + 1,
                                        format_db(o.result.sinr.sinr[i]), fmt_dbv(o.degradation_db[i]),
                                        o.interference_ratio[i]));
      std::vector<std::pair<std::string, Vector>> cols{{"joint", o.result.opt.best_gains}};
      for (size_t i = 0; i < o.result.single_gains.size(); ++i)
        cols.emplace_back(fmt::format("single{}", i + 1), o.result.single_gains[i]);
      r.tables.push_back(std::move(t));
      r.tables.push_back(gains_table("gains", cols, s.circuit));
      break;
    }
    case ExperimentKind::Sweep: {
      const auto rows = run_power_sweep(s, m);
      std::vector<std::string> cols{"ratio"};
      cols.insert(cols.end(), kMultiCols.begin(), kMultiCols.end());
      Table t{"sweep", cols, {}};
      for (const auto& row : rows) {
        add_multi_rows(t, format_raw(row.ratio), s, row.outcome);
        r.summary.push_back(fmt::format("ratio {:.4g}: degradation {} / {} dB", row.ratio,
                                        fmt_dbv(row.outcome.degradation_db[0]), fmt_dbv(row.outcome.degradation_db[1])));
      }
      r.tables.push_back(std::move(t));
      break;
    }
    case ExperimentKind::Blockage: {
      const auto o = run_blockage(s, m);
      r.summary.push_back(fmt::format("operating SNR {} dB; detection: {}", format_db(o.snr_operating),
                                      to_string(o.detection.status)));
      if (o.detection.status != BlockageStatus::Clear)
        r.summary.push_back(fmt::format("edge (EA{}, EA{})", o.detection.edge.first + 1, o.detection.edge.second + 1));
      std::vector<std::pair<std::string, Vector>> cols{{"before", o.operating_gains}};
      if (o.reroute) {
        const auto& rr = *o.reroute;
        cols.emplace_back("after", rr.result.opt.best_gains);
        r.summary.push_back(fmt::format("SNR unblocked {} dB, old gains on blocked channel {} dB, rerouted {} dB",
                                        format_db(rr.snr_unblocked), format_db(rr.snr_old_gains),
                                        format_db(rr.snr_rerouted)));
        Table t{"reroute", {"snr_unblocked_db", "snr_old_gains_db", "snr_rerouted_db", "coverage_loss"}, {}};
        t.rows.push_back({format_db(rr.snr_unblocked), format_db(rr.snr_old_gains), format_db(rr.snr_rerouted),
                          rr.coverage_loss ? "1" : "0"});
        r.tables.push_back(std::move(t));
        if (rr.coverage_loss) {
          r.summary.push_back("coverage lost: no alternative path carries the signal");
          r.exit_code = 4;
        }
      }
      r.tables.push_back(probe_log_table("probe_log", o.detection.log));
      r.tables.push_back(gains_table("gains", cols, s.circuit));
      break;
    }
    case ExperimentKind::Probe: {
      const auto est = run_probe(s, m);
      Table t{"probe_estimate", {"from_ea", "to_ea", "layer", "status", "estimate", "truth", "relative_error"}, {}};
      int measured = 0, inferred = 0;
      for (int i = 0; i < m.h.n(); ++i)
        for (int j = 0; j < m.h.n(); ++j) {
          if (est.status[i][j] == EntryStatus::Unknown) continue;
          (est.status[i][j] == EntryStatus::Measured ? measured : inferred)++;
          const double truth = m.h.h(i, j);
          t.rows.push_back({std::to_string(i + 1), std::to_string(j + 1), std::to_string(est.layers.layer_of[i]),
                            to_string(est.status[i][j]), format_raw(est.h(i, j)), format_raw(truth),
                            format_raw(truth > 0 ? est.h(i, j) / truth - 1.0 : 0.0)});
        }
      r.summary.push_back(fmt::format("layers: {}; emissions: {}; measured entries: {}; inferred entries: {}",
                                      est.layers.depth() + 1, est.emissions(), measured, inferred));
      r.tables.push_back(std::move(t));
      r.tables.push_back(probe_log_table("probe_log", est.log));
      break;
    }
  }
  r.tables.push_back(std::move(hm));
  return r;
}

namespace {

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(fmt::format("cannot open {} for writing", tmp));
    out << content;
    out.flush();
    if (!out) throw Error(fmt::format("write to {} failed", tmp));
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(fmt::format("cannot move {} to {}: {}", tmp, path.string(), ec.message()));
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

std::string to_csv(const Table& t) {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + csv_field(cells[i]);
    out += "\n";
  };
  line(t.columns);
  for (const auto& r : t.rows) line(r);
  return out;
}

std::string to_text(const RunReport& r) {
  std::string out;
  out += fmt::format("experiment: {}\n", r.kind);
  if (!r.scenario_name.empty()) out += fmt::format("scenario: {}\n", r.scenario_name);
  out += fmt::format("scenario sha256: {}\n", r.digest);
  out += fmt::format("seed: {}\nversion: {}\nstarted: {}\nexit code: {}\n\n", r.seed, r.version, r.started_utc,
                     r.exit_code);
  for (const auto& s : r.summary) out += s + "\n";
  for (const auto& t : r.tables) {
    if (t.name == "channel_matrix" || t.name.rfind("trace", 0) == 0) continue;
    out += fmt::format("\n[{}]\n", t.name);
    std::vector<size_t> w(t.columns.size());
    for (size_t c = 0; c < w.size(); ++c) {
      w[c] = t.columns[c].size();
      for (const auto& row : t.rows) w[c] = std::max(w[c], row[c].size());
    }
    auto line = [&](const std::vector<std::string>& cells) {
      for (size_t c = 0; c < cells.size(); ++c) out += fmt::format("{:>{}}{}", cells[c], w[c], c + 1 < cells.size() ? "  " : "\n");
    };
    line(t.columns);
    for (const auto& row : t.rows) line(row);
  }
  return out;
}

}  // namespace

std::vector<std::filesystem::path> emit_report(const RunReport& r, const std::filesystem::path& dir,
                                               ReportFormat format) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(fmt::format("cannot create output directory {}: {}", dir.string(), ec.message()));
  std::vector<std::filesystem::path> written;
  if (format != ReportFormat::Text)
    for (const auto& t : r.tables) {
      const auto p = dir / (t.name + ".csv");
      write_atomic(p, to_csv(t));
      written.push_back(p);
    }
  if (format != ReportFormat::Csv) {
    const auto p = dir / "report.txt";
    write_atomic(p, to_text(r));
    written.push_back(p);
  }
  return written;
}

}  // namespace owe
