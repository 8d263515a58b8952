#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <doctest.h>

#include "owe/error.hpp"
#include "owe/scenario.hpp"

using namespace owe;
namespace fs = std::filesystem;

namespace {

const fs::path kDir = OWE_SCENARIO_DIR;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string error_of(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

const char* kSmall = R"(version: 1
experiment: single-bss
layout:
  grid: {rows: 2, cols: 2}
links:
  - {entry: 1, ap_ea: 4}
optimizer: {max_iter: 300, restarts: 2}
)";

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("owe_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("circuit defaults file") {
  const Scenario s = load_scenario(kDir / "circuit_defaults.yaml");
  const EaCircuitParams d;
  const EaCircuitParams& c = s.circuit;
  CHECK(c.responsivity_a_per_w == 0.5);
  CHECK(c.dark_current_a == 2e-9);
  CHECK(c.shunt_resistance_ohm == 100e6);
  CHECK(c.background_power_w == 1e-6);
  CHECK(c.bandwidth_hz == 20e6);
  CHECK(c.tia_feedback_ohm == 10e3);
  CHECK(c.tia_voltage_noise_v_rthz == 1e-9);
  CHECK(c.tia_current_noise_a_rthz == 2.5e-12);
  CHECK(c.pa_input_ohm == 50);
  CHECK(c.pa_feedback_ohm == 2000);
  CHECK(c.pa_voltage_noise_v_rthz == 3e-9);
  CHECK(c.pa_current_noise_a_rthz == 10e-12);
  CHECK(c.bias_tee_resistor_ohm == 5);
  CHECK(c.bias_tee_inductor_h == 10e-6);
  CHECK(c.dcdc_peak_psd_v2_hz == 1e-9);
  CHECK(c.dcdc_floor_psd_v2_hz == 1e-12);
  CHECK(c.dcdc_switching_freq_hz == d.dcdc_switching_freq_hz);
  CHECK(c.led_radiant_efficiency == 0.45);
  CHECK(c.led_forward_voltage_v == 3.0);
  CHECK(s.optics.half_power_angle_deg == 19.65);
  CHECK(s.optics.acceptance_angle_deg == 34.21);
  CHECK(s.links.at(0).entries.at(0).photocurrent_a == 26e-6);
  CHECK(s.ea_count() == 9);
}

TEST_CASE("schema diagnostics") {
  CHECK(error_of("").find("version, experiment, layout") != std::string::npos);
  const std::string bad_ap = std::string(kSmall).replace(std::string(kSmall).find("ap_ea: 4"), 8, "ap_ea: 12");
  CHECK(error_of(bad_ap).find("EA 12 out of range") != std::string::npos);
  const std::string unknown = std::string(kSmall) + "numerics: {cell: 0.01}\n";
  const std::string msg = error_of(unknown);
  CHECK(msg.find("numerics.cell") != std::string::npos);
  CHECK(msg.find("line 8") != std::string::npos);
  CHECK(error_of("version: 2\nexperiment: probe\nlayout: {grid: {rows: 1}}\n").find("version") != std::string::npos);
  CHECK(error_of(std::string(kSmall) + "circuit: {bandwidth_hz: fast}\n").find("circuit.bandwidth_hz") !=
        std::string::npos);
  CHECK(error_of("version: 1\nexperiment: multi-bss\nlayout: {grid: {rows: 2, cols: 2}}\n"
                 "links: [{entry: 1, ap_ea: 4}, {entry: 2, ap_ea: 4}]\n")
            .find("share AP") != std::string::npos);
  CHECK_FALSE(error_of("version: 1\nexperiment: single-bss\nlayout: {grid: {rows: 2, cols: 2}}\n"
                       "links: [{entry: 1, ap_ea: 4}, {entry: 2, ap_ea: 4}]\n")
                  .size());
}

TEST_CASE("emit and parse round trip") {
  for (const auto& entry : fs::directory_iterator(kDir)) {
    const Scenario s = load_scenario(entry.path());
    const std::string once = emit_scenario(s);
    const Scenario back = parse_scenario(once);
    CHECK(emit_scenario(back) == once);
    CHECK(scenario_digest(back) == scenario_digest(s));
    CHECK(scenario_digest(s).size() == 64);
  }
  const Scenario a = parse_scenario(kSmall);
  Scenario b = a;
  b.optimizer.schedule.rng_seed = 2;
  CHECK(scenario_digest(a) != scenario_digest(b));
}

TEST_CASE("reports are byte-identical for the same seed") {
  const Scenario s = parse_scenario(kSmall);
  const auto d1 = scratch("r1"), d2 = scratch("r2");
  const auto f1 = emit_report(run_scenario(s), d1, ReportFormat::Csv);
  const auto f2 = emit_report(run_scenario(s), d2, ReportFormat::Csv);
  REQUIRE(f1.size() == f2.size());
  for (size_t i = 0; i < f1.size(); ++i) CHECK(slurp(f1[i]) == slurp(f2[i]));

  const auto d3 = scratch("r3");
  emit_report(run_scenario(s), d3, ReportFormat::Text);
  CHECK(slurp(d3 / "report.txt").find(scenario_digest(s)) != std::string::npos);
  CHECK_FALSE(fs::exists(d3 / "single_bss.csv"));

  // An existing file where a directory should be surfaces the path.
  const auto blocker = scratch("blocker");
  std::ofstream(blocker) << "x";
  try {
    emit_report(run_scenario(s), blocker / "sub");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find(blocker.string()) != std::string::npos);
  }
}

TEST_CASE("reported dB values match the stored linear values") {
  const Scenario s = parse_scenario(kSmall);
  const RunReport r = run_scenario(s);
  const Table& t = r.tables.front();
  REQUIRE(t.name == "single_bss");
  CHECK(t.columns[0] == "entry_ea");
  CHECK(t.columns[1] == "snr_db");
  CHECK(t.columns[2] == "improvement_db");
  for (const auto& row : t.rows) {
    const double snr = std::stod(row[5]);
    const double base = std::stod(row[6]);
    CHECK(std::abs(std::stod(row[1]) - 10 * std::log10(snr)) <= 0.005 + 1e-9);
    CHECK(std::abs(std::stod(row[4]) - 10 * std::log10(base)) <= 0.005 + 1e-9);
  }
  CHECK(format_db(1e5) == "50.00");
  CHECK(format_raw(0.1) == "0.10000000000000001");
}

TEST_CASE("coverage") {
  Scenario s = load_scenario(kDir / "coverage_line.yaml");
  s.coverage.pa_gains = {0.0};
  const Model m = build_model(s);
  const CoverageResult c = run_coverage(s, m);
  REQUIRE(c.rows.size() == 10);
  CHECK(c.rows[0].pd_snr > 0.0);
  CHECK(std::isfinite(c.rows[0].pd_snr));
  for (const auto& row : c.rows) CHECK(row.led_signal_a == 0.0);

  // Without self-channels the feedback is weak enough for the full model.
  s.coverage.pa_gains = {10.0};
  Model weak = m;
  weak.h.h.diagonal().setZero();
  const CoverageResult w = run_coverage(s, weak);
  for (int k = 0; k < 3; ++k) {
    REQUIRE(w.rows[k].full_snr.has_value());
    CHECK(std::abs(to_db(*w.rows[k].full_snr) - to_db(w.rows[k].chain_snr)) < 1.0);
  }

  s.coverage.pa_gains = {70.0};
  s.coverage.model = CoverageModel::Full;
  try {
    run_coverage(s, m);
    FAIL("expected InstabilityError");
  } catch (const InstabilityError& e) {
    CHECK(std::string(e.what()).find("largest stable equal PA gain") != std::string::npos);
  }
}

TEST_CASE("single-point sweep equals the multi-BSS run") {
  Scenario s = load_scenario(kDir / "power_sweep.yaml");
  s.optimizer.schedule.max_iter = 400;
  s.optimizer.schedule.restarts = 2;
  s.sweep.ratio_min = s.sweep.ratio_max = 1.0;
  s.sweep.points = 1;
  const Model m = build_model(s);
  const auto rows = run_power_sweep(s, m);
  const auto direct = run_multi_bss(s, m);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].outcome.degradation_db == direct.degradation_db);
  CHECK(rows[0].outcome.result.opt.best_gains == direct.result.opt.best_gains);
}

TEST_CASE("blockage runs") {
  Scenario s = load_scenario(kDir / "blockage_4x4.yaml");
  s.optimizer.schedule.restarts = 2;
  SUBCASE("edge off the active path") {
    s.blockage.edge = {2, 3};
    s.blockage.tone_a = 10.0;  // the entry EA sits three hops out
    const BlockageOutcome o = run_blockage(s, build_model(s));
    CHECK(o.detection.status == BlockageStatus::Clear);
    CHECK_FALSE(o.reroute.has_value());
  }
  SUBCASE("isolated entry loses coverage") {
    const Scenario one = load_scenario(kDir.parent_path() / "tests" / "data" / "isolated_entry.yaml");
    const BlockageOutcome o = run_blockage(one, build_model(one));
    REQUIRE(o.detection.status == BlockageStatus::Localized);
    CHECK(o.detection.edge == std::pair<int, int>{0, 1});
    REQUIRE(o.reroute.has_value());
    CHECK(o.reroute->coverage_loss);
    CHECK(run_scenario(one).exit_code == 4);
  }
}
