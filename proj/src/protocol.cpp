#include "owe/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>

#include <fmt/format.h>

#include "owe/error.hpp"

namespace owe {

int EaLayerMap::depth() const {
  return layer_of.empty() ? 0 : *std::max_element(layer_of.begin(), layer_of.end());
}

std::vector<int> EaLayerMap::members(int layer) const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(layer_of.size()); ++i)
    if (layer_of[i] == layer) out.push_back(i);
  return out;
}

double default_significance_threshold(const Matrix& h) {
  double m = 0.0;
  for (int i = 0; i < h.rows(); ++i)
    for (int j = 0; j < h.cols(); ++j)
      if (i != j) m = std::max(m, h(i, j));
  return 1e-3 * m;
}

namespace {

bool adjacent(const Matrix& h, int i, int j, double thr) { return h(i, j) > thr || h(j, i) > thr; }

}  // namespace

EaLayerMap layer_partition(const Matrix& h, int ap, double threshold) {
  const int n = static_cast<int>(h.rows());
  if (h.cols() != n) throw ValidationError("channel matrix must be square");
  if (ap < 0 || ap >= n) throw ValidationError(fmt::format("AP EA index {} out of range", ap));
  EaLayerMap map;
  map.ap = ap;
  map.layer_of.assign(n, -1);
  map.layer_of[ap] = 0;
  std::deque<int> queue{ap};
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (int v = 0; v < n; ++v) {
      if (map.layer_of[v] >= 0 || !adjacent(h, u, v, threshold)) continue;
      map.layer_of[v] = map.layer_of[u] + 1;
      queue.push_back(v);
    }
  }
  std::vector<int> lost;
  for (int i = 0; i < n; ++i)
    if (map.layer_of[i] < 0) lost.push_back(i);
  if (!lost.empty()) {
    std::string names;
    for (int i : lost) names += fmt::format("{}EA{}", names.empty() ? "" : ", ", i + 1);
    throw DisconnectedError(fmt::format("EAs not reachable from the AP: {}", names), lost);
  }
  return map;
}

namespace {

class ProbeDriver {
 public:
  ProbeDriver(const ChannelMatrix& world, int ap, const ProbeOptions& opt)
      : world_(world), ap_(ap), opt_(opt), rng_(opt.seed) {}

  // Tone from `ea` with the given gains; returns the AP reading.
  double emit(int ea, const Vector& gains, std::string decision, std::vector<ProbeObservation>& log) {
    if (!is_stable(world_, gains, opt_.margin))
      throw InstabilityError(fmt::format("probe gains for EA{} are unstable on the true channel", ea + 1));
    const FeedbackSystem sys(world_, gains);
    const Vector row = sys.a_row(ap_);
    double reading = world_.h.row(ea).dot(row) * opt_.tone_a;
    if (opt_.relative_noise > 0.0) {
      const double span = std::log1p(opt_.relative_noise);
      std::uniform_real_distribution<double> u(-span, span);
      reading *= std::exp(u(rng_));
    }
    log.push_back({static_cast<int>(log.size()), ea, opt_.tone_a, reading, 0.0, gains, std::move(decision)});
    return reading;
  }

 private:
  const ChannelMatrix& world_;
  int ap_;
  ProbeOptions opt_;
  Rng rng_;
};

constexpr int kSelfIterations = 100;

// Row `ap` of (I − ĤᵀG)⁻¹ on the current estimate.
Vector estimated_a_row(const Matrix& h_est, const Vector& g, int ap) {
  const int n = static_cast<int>(h_est.rows());
  const Matrix m = h_est.transpose() * g.asDiagonal();
  Eigen::PartialPivLU<Matrix> lu(Matrix::Identity(n, n) - m);
  Vector e = Vector::Zero(n);
  e[ap] = 1.0;
  return lu.transpose().solve(e);
}

}  // namespace

ChannelEstimate probe_from_scratch(const ChannelMatrix& world, int ap, const ProbeOptions& opt) {
  world.validate();
  const int n = world.n();
  if (ap < 0 || ap >= n) throw ValidationError(fmt::format("AP EA index {} out of range", ap));
  if (!(opt.known_gain > 0.0)) throw DomainError("known gain must be > 0");
  if (!(opt.tone_a > 0.0)) throw DomainError("tone amplitude must be > 0");
  if (!(opt.relative_noise >= 0.0)) throw DomainError("relative noise must be >= 0");
  const double thr = opt.threshold.value_or(default_significance_threshold(world.h));

  ChannelEstimate est;
  est.layers = layer_partition(world.h, ap, thr);
  est.h = Matrix::Zero(n, n);
  est.status.assign(n, std::vector<EntryStatus>(n, EntryStatus::Unknown));
  est.relay_of.assign(n, -1);
  ProbeDriver drv(world, ap, opt);
  const Vector muted = Vector::Zero(n);
  const double t = opt.tone_a;

  auto set = [&](int i, int j, double v, EntryStatus s) {
    est.h(i, j) = std::max(0.0, v);
    est.status[i][j] = s;
  };

  set(ap, ap, drv.emit(ap, muted, "self", est.log) / t, EntryStatus::Measured);
  // Direct responses of every EA with all gains muted.
  std::vector<double> direct(n, 0.0);
  for (int layer = 1; layer <= est.layers.depth(); ++layer)
    for (int k : est.layers.members(layer)) {
      direct[k] = drv.emit(k, muted, layer == 1 ? "measure" : "direct", est.log) / t;
      set(k, ap, direct[k], EntryStatus::Measured);
    }

  for (int layer = 2; layer <= est.layers.depth(); ++layer) {
    for (int k : est.layers.members(layer)) {
      double best = -1.0;
      int best_relay = -1;
      for (int r : est.layers.members(layer - 1)) {
        if (!adjacent(world.h, k, r, thr)) continue;
        Vector g = Vector::Zero(n);
        for (int c = r; c != ap && c >= 0; c = est.relay_of[c]) {
          g[c] = opt.known_gain;
          if (est.layers.layer_of[c] == 1) break;
        }
        if (est.status[r][r] == EntryStatus::Unknown) {
          // The relay hears its own LED; measure that loop before relying on it.
          const double reading = drv.emit(r, g, fmt::format("self EA{}", r + 1), est.log) / t;
          est.status[r][r] = EntryStatus::Inferred;
          for (int it = 0; it < kSelfIterations; ++it) {
            const Vector a = estimated_a_row(est.h, g, ap);
            if (!(a[r] > 0.0)) break;
            const double others = est.h.row(r).dot(a) - est.h(r, r) * a[r];
            const double next = std::max(0.0, (reading - others) / a[r]);
            const double prev = est.h(r, r);
            est.h(r, r) = next;
            if (std::abs(next - prev) <= 1e-15 * std::abs(next)) break;
          }
        }
        const double reading = drv.emit(k, g, fmt::format("relay EA{}", r + 1), est.log) / t;
        const Vector a = estimated_a_row(est.h, g, ap);
        if (!(a[r] > 0.0)) continue;
        const double h_kr = (reading - direct[k] * a[ap]) / a[r];
        if (h_kr > best) {
          best = h_kr;
          best_relay = r;
        }
      }
      if (best_relay < 0)
        throw DisconnectedError(fmt::format("no usable relay for EA{}", k + 1), std::vector<int>{k});
      set(k, best_relay, best, EntryStatus::Inferred);
      // Reverse link assumed reciprocal; later chains through k feed back on it.
      if (est.status[best_relay][k] == EntryStatus::Unknown) set(best_relay, k, best, EntryStatus::Inferred);
      est.relay_of[k] = best_relay;
    }
  }
  return est;
}

ChannelMatrix inject_blockage(const ChannelMatrix& h, int a, int b) {
  const int n = h.n();
  if (a < 0 || a >= n || b < 0 || b >= n || a == b)
    throw ValidationError(fmt::format("invalid blocked edge ({}, {})", a + 1, b + 1));
  ChannelMatrix out = h;
  out.h(a, b) = 0.0;
  out.h(b, a) = 0.0;
  return out;
}

BlockageResult detect_blockage(const std::vector<int>& path, const ChannelMatrix& world,
                               const ChannelMatrix& estimate, const Vector& gains, const NoiseVectors& noise,
                               const DetectOptions& opt) {
  const int n = world.n();
  if (estimate.n() != n) throw ValidationError("estimate and world sizes differ");
  if (path.size() < 2) throw ValidationError("path needs at least an entry EA and the AP EA");
  for (int i : path)
    if (i < 0 || i >= n) throw ValidationError(fmt::format("path EA index {} out of range", i + 1));
  const int ap = path.back();
  BlockageResult res;
  const BssLink silent{Vector::Zero(n), ap};

  for (int step = static_cast<int>(path.size()) - 2; step >= 0; --step) {
    const int ea = path[step];
    Vector g = gains;
    g[ea] = 0.0;
    const FeedbackSystem expected_sys(estimate, g);
    const double expected = estimate.h.row(ea).dot(expected_sys.a_row(ap)) * opt.tone_a;
    const double floor = opt.detection_factor * expected_sys.ap_received(silent, noise, opt.combination).noise;

    if (!is_stable(world, g, 0.0))
      throw InstabilityError(fmt::format("test gains for EA{} are unstable on the true channel", ea + 1));
    const FeedbackSystem world_sys(world, g);
    const double reading = world.h.row(ea).dot(world_sys.a_row(ap)) * opt.tone_a;

    ProbeObservation obs{static_cast<int>(res.log.size()), ea, opt.tone_a, reading, expected, g, ""};
    if (expected < floor) {
      obs.decision = "inconclusive";
      res.log.push_back(obs);
      res.status = BlockageStatus::Inconclusive;
      res.edge = {ea, path[step + 1]};
      return res;
    }
    if (reading >= std::max(floor, opt.pass_fraction * expected)) {
      obs.decision = "pass";
      res.log.push_back(obs);
      continue;
    }
    obs.decision = "fail";
    res.log.push_back(obs);
    res.status = BlockageStatus::Localized;
    res.edge = {ea, path[step + 1]};
    return res;
  }
  return res;
}

RerouteResult reroute_after_blockage(const SingleBssProblem& unblocked, const Vector& old_gains,
                                     const ChannelMatrix& blocked_world, std::pair<int, int> edge) {
  RerouteResult out;
  out.snr_unblocked = snr_sa(unblocked.h, old_gains, unblocked.link, unblocked.noise, unblocked.combination);
  out.snr_old_gains = snr_sa(blocked_world, old_gains, unblocked.link, unblocked.noise, unblocked.combination);
  SingleBssProblem p = unblocked;
  p.h = inject_blockage(unblocked.h, edge.first, edge.second);
  p.g0 = old_gains;
  out.result = optimize_single_bss(p);
  out.snr_rerouted = snr_sa(blocked_world, out.result.opt.best_gains, p.link, p.noise, p.combination);
  out.coverage_loss = !(out.snr_rerouted >= kMinUsableSnr);
  return out;
}

std::string to_string(BlockageStatus s) {
  switch (s) {
    case BlockageStatus::Clear: return "clear";
    case BlockageStatus::Localized: return "localized";
    case BlockageStatus::Inconclusive: return "inconclusive";
  }
  return "?";
}

std::string to_string(EntryStatus s) {
  switch (s) {
    case EntryStatus::Unknown: return "unknown";
    case EntryStatus::Measured: return "measured";
    case EntryStatus::Inferred: return "inferred";
  }
  return "?";
}

}  // namespace owe
