#pragma once

namespace owe {

inline constexpr double kElementaryCharge = 1.602176634e-19;
inline constexpr double kBoltzmann = 1.380649e-23;

/// Switching frequency that reproduces a 0.42 mA DC-DC noise figure with the
/// default bias tee and converter spectrum (high-frequency root).
inline constexpr double kCalibratedSwitchingFreqHz = 2.922093e6;

struct EaCircuitParams {
  double responsivity_a_per_w = 0.5;
  double dark_current_a = 2e-9;
  double shunt_resistance_ohm = 100e6;
  double background_power_w = 1e-6;
  double bandwidth_hz = 20e6;
  double temperature_k = 300.0;
  double tia_feedback_ohm = 10e3;
  double tia_voltage_noise_v_rthz = 1e-9;
  double tia_current_noise_a_rthz = 2.5e-12;
  double pa_input_ohm = 50.0;
  double pa_feedback_ohm = 2000.0;
  double pa_voltage_noise_v_rthz = 3e-9;
  double pa_current_noise_a_rthz = 10e-12;
  double bias_tee_resistor_ohm = 5.0;
  double bias_tee_inductor_h = 10e-6;
  double dcdc_peak_psd_v2_hz = 1e-9;
  double dcdc_floor_psd_v2_hz = 1e-12;
  double dcdc_switching_freq_hz = kCalibratedSwitchingFreqHz;
  double led_radiant_efficiency = 0.45;
  double led_forward_voltage_v = 3.0;

  /// Throws DomainError on non-physical values. An infinite shunt
  /// resistance is allowed and removes that thermal term.
  void validate() const;

  /// PA voltage gain R_f/R_i.
  double pa_gain() const { return pa_feedback_ohm / pa_input_ohm; }
  /// Copy with the PA feedback resistor set for the requested voltage gain.
  EaCircuitParams with_pa_gain(double g_pa) const;
  /// Optical watts per LED ampere.
  double led_watts_per_amp() const { return led_radiant_efficiency * led_forward_voltage_v; }
};

/// RMS noise components at Table I positions: the first three are referred
/// to the TIA input, n_dcdc_a is additive at the LED.
struct NoiseBudget {
  double n_pd_a = 0.0;
  double n_tia_a = 0.0;
  double n_pa_tia_a = 0.0;
  double n_dcdc_a = 0.0;

  /// Gain-dependent part, summed linearly.
  double gain_dependent() const { return n_pd_a + n_tia_a + n_pa_tia_a; }
  double additive() const { return n_dcdc_a; }
};

struct LedOutput {
  double signal_a = 0.0;
  double noise_a = 0.0;
  double snr = 0.0;
};

double pd_noise(double received_power_w, const EaCircuitParams& p);
double tia_input_noise(double received_power_w, const EaCircuitParams& p);
double pa_noise_tia_referred(const EaCircuitParams& p);
double dcdc_noise(const EaCircuitParams& p);
double bias_tee_cutoff_hz(const EaCircuitParams& p);

/// Current gain from PD photocurrent to LED current.
double ea_gain(const EaCircuitParams& p);
/// Current gain for a given PA voltage gain.
double ea_gain_for_pa_gain(double g_pa, const EaCircuitParams& p);

NoiseBudget noise_budget(double received_power_w, const EaCircuitParams& p);

/// LED signal, RMS noise and SNR for the EA's own gain setting.
LedOutput led_current_and_snr(double signal_photocurrent_a, const EaCircuitParams& p);
/// Same chain with an explicit current gain and precomputed noise budget.
LedOutput led_output(double signal_photocurrent_a, double gain, const NoiseBudget& nb);

double led_optical_power(double led_current_a, const EaCircuitParams& p);

}  // namespace owe
