#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "owe/ether_core.hpp"

namespace owe {

struct AnnealSchedule {
  double t0 = 10.0;
  double alpha = 0.995;
  double t_min = 1e-4;
  long max_iter = 50000;
  double step_scale = 0.1;
  std::uint64_t rng_seed = 1;
  int restarts = 8;
  bool record_trace = false;

  void validate() const;
};

struct GainBounds {
  double g_max = 2e5;
  double margin = 0.05;
  int coords_per_move = 1;

  void validate() const;
};

struct TraceRow {
  long iteration = 0;
  double temperature = 0.0;
  double objective = 0.0;
  bool accepted = false;
};

struct OptResult {
  Vector best_gains;
  double best_objective = 0.0;
  long accepted_moves = 0;
  long rejected_moves = 0;
  int best_restart = 0;
  std::vector<TraceRow> trace;
};

using Objective = std::function<double(const Vector&)>;
using Feasibility = std::function<bool(const Vector&)>;
using Rng = std::mt19937_64;

/// Gaussian move on `coords_per_move` random coordinates, clamped to
/// [0, g_max] and resampled up to 50 times until feasible; returns g
/// unchanged when no feasible draw is found.
Vector neighbor(const Vector& g, const AnnealSchedule& schedule, const GainBounds& bounds,
                const Feasibility& feasible, Rng& rng);

/// One Metropolis annealing run seeded with schedule.rng_seed.
/// Non-finite objective values are always rejected.
OptResult anneal_once(const Objective& objective, const Vector& g0, const AnnealSchedule& schedule,
                      const GainBounds& bounds, const Feasibility& feasible);

/// schedule.restarts independent runs seeded rng_seed + r, run concurrently
/// and reduced in restart order (lowest objective, first index on ties).
OptResult anneal(const Objective& objective, const Vector& g0, const AnnealSchedule& schedule,
                 const GainBounds& bounds, const Feasibility& feasible);

/// Largest common gain with spectral radius at most 1 - margin.
double max_equal_gain(const ChannelMatrix& h, double margin);

struct SingleBssProblem {
  ChannelMatrix h;
  BssLink link;
  NoiseVectors noise;
  NoiseCombination combination = NoiseCombination::Coherent;
  GainBounds bounds;
  AnnealSchedule schedule;
  std::optional<Vector> g0;
};

struct SingleBssResult {
  OptResult opt;
  double snr = 0.0;
  double baseline_gain = 0.0;
  double baseline_snr = 0.0;
};

/// Minimises −SNR in dB; the starting point defaults to the equal-gain baseline.
SingleBssResult optimize_single_bss(const SingleBssProblem& problem);

struct MultiBssProblem {
  ChannelMatrix h;
  std::vector<BssLink> links;
  NoiseVectors noise;
  NoiseCombination combination = NoiseCombination::Coherent;
  GainBounds bounds;
  AnnealSchedule schedule;
};

struct MultiBssResult {
  OptResult opt;
  std::vector<double> gamma_star;
  std::vector<Vector> single_gains;
  MultiSinr sinr;
};

/// γ* per link from isolated single-BSS runs, then minimises
/// 10·log10(Σ γ*/SINR).
MultiBssResult optimize_multi_bss(const MultiBssProblem& problem);

}  // namespace owe
