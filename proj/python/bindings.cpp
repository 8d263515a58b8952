#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "owe/ea_circuit.hpp"
#include "owe/error.hpp"
#include "owe/ether_core.hpp"
#include "owe/optimizer.hpp"
#include "owe/protocol.hpp"
#include "owe/radiometry.hpp"
#include "owe/scenario.hpp"

namespace py = pybind11;
using namespace owe;

namespace {

NoiseCombination combination(const std::string& s) {
  if (s == "coherent") return NoiseCombination::Coherent;
  if (s == "quadrature") return NoiseCombination::Quadrature;
  throw ValidationError("noise combination must be 'coherent' or 'quadrature'");
}

py::dict table_dict(const Table& t) {
  py::dict d;
  d["columns"] = t.columns;
  d["rows"] = t.rows;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Optical wireless ether: channel model, EA noise, gain optimisation and probing";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<InstabilityError>(m, "InstabilityError", base.ptr());
  py::register_exception<DisconnectedError>(m, "DisconnectedError", base.ptr());
  py::register_exception<ConvergenceError>(m, "ConvergenceError", base.ptr());

  m.attr("__version__") = kToolVersion;

  // Radiometry.
  m.def("lambertian_order", &lambertian_order, py::arg("half_power_angle_rad"));
  m.def("half_power_angle_for_grid", &half_power_angle_for_grid, py::arg("spacing_m"),
        py::arg("height_above_workplane_m"));
  m.def("acceptance_angle_for_coverage", &acceptance_angle_for_coverage, py::arg("radius_m"),
        py::arg("height_above_device_m"));
  m.def("deg2rad", &deg2rad);
  m.def("rad2deg", &rad2deg);

  // EA circuit.
  py::class_<EaCircuitParams>(m, "EaCircuitParams")
      .def(py::init<>())
      .def_readwrite("responsivity_a_per_w", &EaCircuitParams::responsivity_a_per_w)
      .def_readwrite("dark_current_a", &EaCircuitParams::dark_current_a)
      .def_readwrite("shunt_resistance_ohm", &EaCircuitParams::shunt_resistance_ohm)
      .def_readwrite("background_power_w", &EaCircuitParams::background_power_w)
      .def_readwrite("bandwidth_hz", &EaCircuitParams::bandwidth_hz)
      .def_readwrite("temperature_k", &EaCircuitParams::temperature_k)
      .def_readwrite("tia_feedback_ohm", &EaCircuitParams::tia_feedback_ohm)
      .def_readwrite("tia_voltage_noise_v_rthz", &EaCircuitParams::tia_voltage_noise_v_rthz)
      .def_readwrite("tia_current_noise_a_rthz", &EaCircuitParams::tia_current_noise_a_rthz)
      .def_readwrite("pa_input_ohm", &EaCircuitParams::pa_input_ohm)
      .def_readwrite("pa_feedback_ohm", &EaCircuitParams::pa_feedback_ohm)
      .def_readwrite("pa_voltage_noise_v_rthz", &EaCircuitParams::pa_voltage_noise_v_rthz)
      .def_readwrite("pa_current_noise_a_rthz", &EaCircuitParams::pa_current_noise_a_rthz)
      .def_readwrite("bias_tee_resistor_ohm", &EaCircuitParams::bias_tee_resistor_ohm)
      .def_readwrite("bias_tee_inductor_h", &EaCircuitParams::bias_tee_inductor_h)
      .def_readwrite("dcdc_peak_psd_v2_hz", &EaCircuitParams::dcdc_peak_psd_v2_hz)
      .def_readwrite("dcdc_floor_psd_v2_hz", &EaCircuitParams::dcdc_floor_psd_v2_hz)
      .def_readwrite("dcdc_switching_freq_hz", &EaCircuitParams::dcdc_switching_freq_hz)
      .def_readwrite("led_radiant_efficiency", &EaCircuitParams::led_radiant_efficiency)
      .def_readwrite("led_forward_voltage_v", &EaCircuitParams::led_forward_voltage_v)
      .def_property_readonly("pa_gain", &EaCircuitParams::pa_gain)
      .def("with_pa_gain", &EaCircuitParams::with_pa_gain, py::arg("g_pa"));

  py::class_<NoiseBudget>(m, "NoiseBudget")
      .def_readonly("pd_a", &NoiseBudget::n_pd_a)
      .def_readonly("tia_a", &NoiseBudget::n_tia_a)
      .def_readonly("pa_tia_a", &NoiseBudget::n_pa_tia_a)
      .def_readonly("dcdc_a", &NoiseBudget::n_dcdc_a)
      .def_property_readonly("gain_dependent", &NoiseBudget::gain_dependent)
      .def_property_readonly("additive", &NoiseBudget::additive);

  m.def("noise_budget", &noise_budget, py::arg("received_power_w") = 52e-6, py::arg("params") = EaCircuitParams{});
  m.def("ea_gain", &ea_gain, py::arg("params") = EaCircuitParams{});
  m.def(
      "led_output",
      [](double s, double gain, const NoiseBudget& nb) {
        const LedOutput o = led_output(s, gain, nb);
        return py::make_tuple(o.signal_a, o.noise_a, o.snr);
      },
      py::arg("signal_photocurrent_a"), py::arg("gain"), py::arg("budget"),
      "Returns (signal_a, noise_a, snr).");

  // Network.
  m.def(
      "spectral_radius", [](const Matrix& h, const Vector& g) { return spectral_radius(ChannelMatrix(h), g); },
      py::arg("h"), py::arg("gains"));
  m.def(
      "is_stable", [](const Matrix& h, const Vector& g, double margin) { return is_stable(ChannelMatrix(h), g, margin); },
      py::arg("h"), py::arg("gains"), py::arg("margin") = 0.0);
  m.def(
      "max_equal_gain", [](const Matrix& h, double margin) { return max_equal_gain(ChannelMatrix(h), margin); },
      py::arg("h"), py::arg("margin") = 0.05);
  m.def(
      "snr",
      [](const Matrix& h, const Vector& g, int entry, int ap, double photocurrent, const NoiseBudget& nb,
         const std::string& comb) {
        const ChannelMatrix cm(h);
        return snr_sa(cm, g, BssLink::single(cm.n(), entry, photocurrent, ap), NoiseVectors::uniform(cm.n(), nb),
                      combination(comb));
      },
      py::arg("h"), py::arg("gains"), py::arg("entry"), py::arg("ap"), py::arg("photocurrent_a") = 26e-6,
      py::arg("budget") = noise_budget(52e-6, EaCircuitParams{}), py::arg("combination") = "coherent",
      "Linear SNR at the AP for one entry EA (0-based indices).");

  m.def(
      "optimize_single_bss",
      [](const Matrix& h, int entry, int ap, double photocurrent, const NoiseBudget& nb, std::uint64_t seed,
         int restarts, long max_iter, double margin, double g_max) {
        SingleBssProblem p;
        p.h = ChannelMatrix(h);
        p.link = BssLink::single(p.h.n(), entry, photocurrent, ap);
        p.noise = NoiseVectors::uniform(p.h.n(), nb);
        p.schedule.rng_seed = seed;
        p.schedule.restarts = restarts;
        p.schedule.max_iter = max_iter;
        p.bounds.margin = margin;
        p.bounds.g_max = g_max;
        SingleBssResult r;
        {
          py::gil_scoped_release release;
          r = optimize_single_bss(p);
        }
        py::dict d;
        d["gains"] = r.opt.best_gains;
        d["snr"] = r.snr;
        d["baseline_gain"] = r.baseline_gain;
        d["baseline_snr"] = r.baseline_snr;
        d["best_restart"] = r.opt.best_restart;
        return d;
      },
      py::arg("h"), py::arg("entry"), py::arg("ap"), py::arg("photocurrent_a") = 26e-6,
      py::arg("budget") = noise_budget(52e-6, EaCircuitParams{}), py::arg("seed") = 1, py::arg("restarts") = 8,
      py::arg("max_iter") = 50000, py::arg("margin") = 0.05, py::arg("g_max") = 2e5);

  // Protocol.
  m.def(
      "probe_from_scratch",
      [](const Matrix& h, int ap, double known_gain, double tone_a) {
        ProbeOptions opt;
        opt.known_gain = known_gain;
        opt.tone_a = tone_a;
        const ChannelEstimate est = probe_from_scratch(ChannelMatrix(h), ap, opt);
        return py::make_tuple(est.h, est.layers.layer_of, est.emissions());
      },
      py::arg("h"), py::arg("ap"), py::arg("known_gain") = 1e3, py::arg("tone_a") = 1e-3,
      "Returns (estimate, layer per EA, emissions).");

  // Scenarios.
  py::class_<Scenario>(m, "Scenario")
      .def_static("load", &load_scenario, py::arg("path"))
      .def_static("parse", &parse_scenario, py::arg("text"))
      .def_property_readonly("kind", [](const Scenario& s) { return to_string(s.kind); })
      .def_readonly("name", &Scenario::name)
      .def_property_readonly("ea_count", &Scenario::ea_count)
      .def("emit", &emit_scenario)
      .def("digest", &scenario_digest)
      .def("channel_matrix", [](const Scenario& s) { return build_model(s).h.h; })
      .def(
          "run",
          [](const Scenario& s) {
            RunReport r;
            {
              py::gil_scoped_release release;
              r = run_scenario(s);
            }
            py::dict tables;
            for (const Table& t : r.tables) tables[py::str(t.name)] = table_dict(t);
            py::dict d;
            d["kind"] = r.kind;
            d["digest"] = r.digest;
            d["summary"] = r.summary;
            d["tables"] = tables;
            d["exit_code"] = r.exit_code;
            return d;
          },
          "Runs the experiment; returns summary lines, tables and the exit code.");
}
