#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "owe/ether_core.hpp"
#include "owe/optimizer.hpp"

namespace owe {

/// BFS hop distance from the AP-attached EA over significant channels.
struct EaLayerMap {
  std::vector<int> layer_of;
  int ap = 0;

  int depth() const;
  std::vector<int> members(int layer) const;
};

/// 1e-3 × the largest off-diagonal entry.
double default_significance_threshold(const Matrix& h);

/// Edges are pairs with h_ij or h_ji strictly above the threshold.
/// Throws DisconnectedError listing every unreachable EA.
EaLayerMap layer_partition(const Matrix& h, int ap, double threshold);

struct ProbeObservation {
  int step = 0;
  int emitting_ea = 0;
  double tone_amplitude = 0.0;
  double received_at_ap = 0.0;
  double expected_at_ap = 0.0;  // blockage tests only
  Vector active_gains;
  std::string decision;
};

enum class EntryStatus { Unknown, Measured, Inferred };

struct ChannelEstimate {
  Matrix h;
  std::vector<std::vector<EntryStatus>> status;
  EaLayerMap layers;
  std::vector<int> relay_of;  // designated inward relay, -1 for layers 0 and 1
  std::vector<ProbeObservation> log;

  int emissions() const { return static_cast<int>(log.size()); }
};

struct ProbeOptions {
  double known_gain = 1e3;
  double tone_a = 1e-3;
  std::optional<double> threshold;  // defaults to default_significance_threshold
  double margin = 0.0;              // probe gains must satisfy is_stable with this margin
  double relative_noise = 0.0;      // readings scaled by a log-uniform factor in [1/(1+ε), 1+ε]
  std::uint64_t seed = 1;
};

/// Layered probing over the true world. Layer 1 is measured with every EA
/// muted; deeper EAs are inferred through one inward relay chain at a time.
ChannelEstimate probe_from_scratch(const ChannelMatrix& world, int ap, const ProbeOptions& opt = {});

enum class BlockageStatus { Clear, Localized, Inconclusive };

struct BlockageResult {
  BlockageStatus status = BlockageStatus::Clear;
  std::pair<int, int> edge{-1, -1};  // (failing EA, its inward neighbour)
  std::vector<ProbeObservation> log;
};

struct DetectOptions {
  double tone_a = 1.0;  // LED drive amplitude, comparable to operating currents
  double detection_factor = 10.0;  // threshold = factor × AP noise RMS
  double pass_fraction = 0.8;      // reading must reach this share of the expected response
  NoiseCombination combination = NoiseCombination::Coherent;
};

/// Sequential test from the EA next to the AP outward. path lists EAs from
/// the entry to the AP-attached EA.
BlockageResult detect_blockage(const std::vector<int>& path, const ChannelMatrix& world,
                               const ChannelMatrix& estimate, const Vector& gains, const NoiseVectors& noise,
                               const DetectOptions& opt = {});

/// Copy of h with both directions of the edge zeroed.
ChannelMatrix inject_blockage(const ChannelMatrix& h, int a, int b);

/// Below 0 dB after rerouting the link counts as lost.
inline constexpr double kMinUsableSnr = 1.0;

struct RerouteResult {
  SingleBssResult result;
  double snr_unblocked = 0.0;    // old gains, unblocked world
  double snr_old_gains = 0.0;    // old gains, blocked world
  double snr_rerouted = 0.0;     // new gains, blocked world
  bool coverage_loss = false;
};

/// Re-optimises on the estimate with the blocked edge zeroed and evaluates
/// the new gains on the blocked world.
RerouteResult reroute_after_blockage(const SingleBssProblem& unblocked, const Vector& old_gains,
                                     const ChannelMatrix& blocked_world, std::pair<int, int> edge);

std::string to_string(BlockageStatus s);
std::string to_string(EntryStatus s);

}  // namespace owe
