#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "owe/ea_circuit.hpp"
#include "owe/ether_core.hpp"
#include "owe/optimizer.hpp"
#include "owe/protocol.hpp"
#include "owe/radiometry.hpp"

namespace owe {

inline constexpr int kScenarioVersion = 1;
inline constexpr const char* kToolVersion = "0.3.0";

enum class ExperimentKind { Coverage, SingleBss, MultiBss, Sweep, Blockage, Probe };

struct GridSpec {
  int rows = 3;
  int cols = 3;
  double spacing_m = 1.25;
  std::array<double, 2> origin{1.25, 1.25};
  double height_m = 2.5;
};

struct EaPlacement {
  Vec3 position = Vec3::Zero();
  Vec3 orientation = Vec3(0.0, 0.0, -1.0);
};

struct LayoutSpec {
  std::array<double, 3> room{5.0, 5.0, 2.5};  // x, y, ceiling height
  bool clip_floor_to_room = true;
  std::optional<GridSpec> grid;
  std::vector<EaPlacement> eas;  // used when grid is absent

  std::vector<Pose> poses() const;
};

struct OpticsSpec {
  double half_power_angle_deg = 19.65;
  double acceptance_angle_deg = 34.21;
  double refractive_index = 1.5;
  double receiver_area_m2 = 1e-4;
  double floor_reflectivity = 0.4;
};

struct EntrySpec {
  int ea = 0;  // 0-based internally, 1-based in files
  double photocurrent_a = 26e-6;
};

struct LinkSpec {
  std::vector<EntrySpec> entries;
  int ap_ea = 0;
};

struct NumericsSpec {
  double integration_cell_m = 0.02;
  double integration_extent_m = 5.0;
  double margin = 0.05;
  double noise_reference_power_w = 52e-6;
  NoiseCombination noise_combination = NoiseCombination::Coherent;
  double ap_noise_a = 0.0;
};

enum class CoverageModel { Forward, Full };

struct CoverageSpec {
  int hops = 10;
  std::vector<double> pa_gains{70.0, 10.0};
  double source_power_w = 8.1;
  CoverageModel model = CoverageModel::Forward;
  NoiseCombination noise_combination = NoiseCombination::Quadrature;
};

struct SweepSpec {
  double ratio_min = 0.01;
  double ratio_max = 10.0;
  int points = 7;
};

struct BlockageSpec {
  std::vector<int> path;  // entry first, AP EA last
  std::pair<int, int> edge{-1, -1};
  double tone_a = 1.0;
  double detection_factor = 10.0;
  double pass_fraction = 0.8;
};

struct ProbeSpec {
  double known_gain = 1e3;
  double tone_a = 1e-3;
  std::optional<double> threshold;
  double relative_noise = 0.0;
};

struct OptimizerSpec {
  AnnealSchedule schedule;
  GainBounds bounds;
};

struct Scenario {
  int version = kScenarioVersion;
  ExperimentKind kind = ExperimentKind::SingleBss;
  std::string name;
  LayoutSpec layout;
  OpticsSpec optics;
  EaCircuitParams circuit;
  std::vector<LinkSpec> links;
  NumericsSpec numerics;
  OptimizerSpec optimizer;
  CoverageSpec coverage;
  SweepSpec sweep;
  BlockageSpec blockage;
  ProbeSpec probe;

  int ea_count() const;
  void validate() const;
};

/// Throws ValidationError with line/field diagnostics.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::filesystem::path& path);
/// Fully defaulted YAML; parse_scenario(emit_scenario(s)) reproduces s.
std::string emit_scenario(const Scenario& s);
/// SHA-256 of the canonical emitted form.
std::string scenario_digest(const Scenario& s);

std::string to_string(ExperimentKind k);
ExperimentKind parse_kind(const std::string& s);

/// Channel matrix, noise vectors and links derived from a scenario.
struct Model {
  std::vector<Pose> poses;
  ChannelMatrix h;
  NoiseBudget budget;
  NoiseVectors noise;
  std::vector<BssLink> links;
};

FloorModel floor_model(const Scenario& s);
Model build_model(const Scenario& s);

/// Per-hop coverage results for one PA gain.
struct CoverageRow {
  double pa_gain = 0.0;
  int hop = 0;
  double ea_gain = 0.0;
  double led_signal_a = 0.0;
  double led_noise_a = 0.0;
  double led_snr = 0.0;
  double pd_snr = 0.0;
  double chain_snr = 0.0;
  std::optional<double> full_snr;  // empty when the bidirectional model is unstable
};

struct CoverageResult {
  std::vector<CoverageRow> rows;
  std::vector<std::pair<double, double>> full_max_equal_pa_gain;  // (pa_gain, largest stable PA gain)
};

struct SingleBssRow {
  int link = 0;
  int entry_ea = 0;
  int ap_ea = 0;
  SingleBssResult result;
};

struct MultiBssOutcome {
  MultiBssResult result;
  std::vector<double> degradation_db;
  std::vector<double> interference_ratio;
};

struct SweepRow {
  double ratio = 0.0;
  MultiBssOutcome outcome;
};

struct BlockageOutcome {
  Vector operating_gains;
  double snr_operating = 0.0;
  BlockageResult detection;
  std::optional<RerouteResult> reroute;
};

CoverageResult run_coverage(const Scenario& s, const Model& m);
std::vector<SingleBssRow> run_single_bss(const Scenario& s, const Model& m);
MultiBssOutcome run_multi_bss(const Scenario& s, const Model& m);
std::vector<SweepRow> run_power_sweep(const Scenario& s, const Model& m);
BlockageOutcome run_blockage(const Scenario& s, const Model& m);
ChannelEstimate run_probe(const Scenario& s, const Model& m);

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

struct RunReport {
  std::string kind;
  std::string scenario_name;
  std::string digest;
  std::uint64_t seed = 0;
  std::string version = kToolVersion;
  std::string started_utc;
  std::vector<std::string> summary;
  std::vector<Table> tables;
  int exit_code = 0;
};

enum class ReportFormat { Csv, Text, Both };

/// Runs the scenario's experiment and assembles tables.
RunReport run_scenario(const Scenario& s);

/// Writes <name>.csv per table and/or report.txt into dir, atomically per file.
std::vector<std::filesystem::path> emit_report(const RunReport& r, const std::filesystem::path& dir,
                                               ReportFormat format = ReportFormat::Both);

std::string format_db(double linear);
std::string format_raw(double v);

}  // namespace owe
