#include "owe/ea_circuit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "owe/error.hpp"

namespace owe {

namespace {

double thermal(const EaCircuitParams& p) { return 4.0 * kBoltzmann * p.temperature_k * p.bandwidth_hz; }

double shot_variance(double received_power_w, const EaCircuitParams& p) {
  if (!(received_power_w >= 0.0)) throw DomainError("received power must be >= 0");
  const double i = p.responsivity_a_per_w * (received_power_w + p.background_power_w) + p.dark_current_a;
  return 2.0 * kElementaryCharge * i * p.bandwidth_hz;
}

}  // namespace

void EaCircuitParams::validate() const {
  auto pos = [](double v, const char* what) {
    if (!(v > 0.0)) throw DomainError(std::string(what) + " must be > 0");
  };
  auto nonneg = [](double v, const char* what) {
    if (!(v >= 0.0)) throw DomainError(std::string(what) + " must be >= 0");
  };
  nonneg(responsivity_a_per_w, "responsivity");
  nonneg(dark_current_a, "dark current");
  pos(shunt_resistance_ohm, "shunt resistance");
  nonneg(background_power_w, "background power");
  pos(bandwidth_hz, "bandwidth");
  nonneg(temperature_k, "temperature");
  pos(tia_feedback_ohm, "TIA feedback resistance");
  nonneg(tia_voltage_noise_v_rthz, "TIA voltage noise");
  nonneg(tia_current_noise_a_rthz, "TIA current noise");
  pos(pa_input_ohm, "PA input resistance");
  nonneg(pa_feedback_ohm, "PA feedback resistance");
  nonneg(pa_voltage_noise_v_rthz, "PA voltage noise");
  nonneg(pa_current_noise_a_rthz, "PA current noise");
  pos(bias_tee_resistor_ohm, "bias-tee resistance");
  pos(bias_tee_inductor_h, "bias-tee inductance");
  nonneg(dcdc_peak_psd_v2_hz, "DC-DC peak PSD");
  nonneg(dcdc_floor_psd_v2_hz, "DC-DC floor PSD");
  pos(dcdc_switching_freq_hz, "switching frequency");
  if (!(led_radiant_efficiency > 0.0 && led_radiant_efficiency <= 1.0))
    throw DomainError("LED radiant efficiency must lie in (0, 1]");
  pos(led_forward_voltage_v, "LED forward voltage");
}

EaCircuitParams EaCircuitParams::with_pa_gain(double g_pa) const {
  if (!(g_pa >= 0.0)) throw DomainError("PA gain must be >= 0");
  EaCircuitParams q = *this;
  q.pa_feedback_ohm = g_pa * pa_input_ohm;
  return q;
}

double pd_noise(double received_power_w, const EaCircuitParams& p) {
  double v = shot_variance(received_power_w, p);
  if (std::isfinite(p.shunt_resistance_ohm)) v += thermal(p) / p.shunt_resistance_ohm;
  return std::sqrt(v);
}

double tia_input_noise(double received_power_w, const EaCircuitParams& p) {
  const double rf = p.tia_feedback_ohm;
  const double en = p.tia_voltage_noise_v_rthz;
  const double in = p.tia_current_noise_a_rthz;
  return std::sqrt(shot_variance(received_power_w, p) + thermal(p) / rf +
                   (en * en / (rf * rf) + in * in) * p.bandwidth_hz);
}

double pa_noise_tia_referred(const EaCircuitParams& p) {
  const double g = p.pa_gain();
  if (g == 0.0) throw DomainError("PA noise is undefined for zero PA gain");
  const double z2 = p.tia_feedback_ohm * p.tia_feedback_ohm;
  const double rf = p.pa_feedback_ohm;
  const double ri = p.pa_input_ohm;
  const double noise_gain2 = ((1.0 + g) / g) * ((1.0 + g) / g);
  const double par = rf * ri / (rf + ri);
  const double en = p.pa_voltage_noise_v_rthz;
  const double in = p.pa_current_noise_a_rthz;
  const double resistors = thermal(p) * rf / (g * g * z2) + thermal(p) * ri / z2;
  const double voltage = en * en / z2 * noise_gain2 * p.bandwidth_hz;
  const double current = in * in * par * par / z2 * noise_gain2 * p.bandwidth_hz;
  return std::sqrt(resistors + voltage + current);
}

double bias_tee_cutoff_hz(const EaCircuitParams& p) {
  return p.bias_tee_resistor_ohm / (2.0 * std::numbers::pi * p.bias_tee_inductor_h);
}

double dcdc_noise(const EaCircuitParams& p) {
  const double fsw = p.dcdc_switching_freq_hz;
  const double band = p.bandwidth_hz;
  if (!(fsw > 0.0 && band > 0.0)) throw DomainError("switching frequency and bandwidth must be > 0");
  const double a = p.dcdc_peak_psd_v2_hz;
  const double b = p.dcdc_floor_psd_v2_hz;
  if (a == 0.0 && b == 0.0) return 0.0;
  const double sigma = 0.1 * fsw;
  const double fc = bias_tee_cutoff_hz(p);

  auto integrand = [&](double f) {
    double s = b;
    for (int k = 1; k <= 3; ++k) {
      const double u = (f - k * fsw) / sigma;
      s += a * std::exp(-0.5 * u * u);
    }
    const double r = f / fc;
    return s / (1.0 + r * r);
  };

  // Composite Simpson; the step resolves both the Gaussian width and the
  // bias-tee corner with 20 points each.
  const double h_target = std::min(sigma, fc) / 20.0;
  long n = static_cast<long>(std::ceil(band / h_target));
  n = std::clamp(n, 2L, 8'000'000L);
  if (n % 2) ++n;
  const double h = band / static_cast<double>(n);
  double acc = integrand(0.0) + integrand(band);
  for (long i = 1; i < n; ++i) acc += (i % 2 ? 4.0 : 2.0) * integrand(i * h);
  const double integral = acc * h / 3.0;
  return std::sqrt(integral / p.bias_tee_resistor_ohm);
}

double ea_gain(const EaCircuitParams& p) {
  return p.pa_gain() * p.tia_feedback_ohm / p.bias_tee_resistor_ohm;
}

double ea_gain_for_pa_gain(double g_pa, const EaCircuitParams& p) {
  return ea_gain(p.with_pa_gain(g_pa));
}

NoiseBudget noise_budget(double received_power_w, const EaCircuitParams& p) {
  NoiseBudget nb;
  nb.n_pd_a = pd_noise(received_power_w, p);
  nb.n_tia_a = tia_input_noise(received_power_w, p);
  nb.n_pa_tia_a = p.pa_gain() > 0.0 ? pa_noise_tia_referred(p) : 0.0;
  nb.n_dcdc_a = dcdc_noise(p);
  return nb;
}

LedOutput led_output(double signal_photocurrent_a, double gain, const NoiseBudget& nb) {
  if (!(signal_photocurrent_a >= 0.0)) throw DomainError("signal photocurrent must be >= 0");
  if (!(gain >= 0.0)) throw DomainError("gain must be >= 0");
  LedOutput out;
  out.signal_a = signal_photocurrent_a * gain;
  out.noise_a = gain * nb.gain_dependent() + nb.additive();
  if (out.signal_a == 0.0)
    out.snr = 0.0;
  else if (out.noise_a == 0.0)
    out.snr = std::numeric_limits<double>::infinity();
  else
    out.snr = (out.signal_a * out.signal_a) / (out.noise_a * out.noise_a);
  return out;
}

LedOutput led_current_and_snr(double signal_photocurrent_a, const EaCircuitParams& p) {
  const double pr = p.responsivity_a_per_w > 0.0 ? signal_photocurrent_a / p.responsivity_a_per_w : 0.0;
  return led_output(signal_photocurrent_a, ea_gain(p), noise_budget(pr, p));
}

double led_optical_power(double led_current_a, const EaCircuitParams& p) {
  return p.led_watts_per_amp() * led_current_a;
}

}  // namespace owe
