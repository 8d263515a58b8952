#include "owe/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "owe/error.hpp"

namespace owe {

namespace {

constexpr int kNeighborTries = 50;

// NaN and +inf candidates never enter the chain. -inf is a legitimate
// optimum (noise-free pass-through).
bool admissible(double f) { return !std::isnan(f) && f != std::numeric_limits<double>::infinity(); }

}  // namespace

void AnnealSchedule::validate() const {
  if (!(t0 > t_min && t_min > 0.0)) throw DomainError("schedule needs t0 > t_min > 0");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("cooling rate must lie in (0, 1)");
  if (max_iter < 1) throw DomainError("max_iter must be >= 1");
  if (!(step_scale >= 0.0)) throw DomainError("step_scale must be >= 0");
  if (restarts < 1) throw DomainError("restarts must be >= 1");
}

void GainBounds::validate() const {
  if (!(g_max > 0.0)) throw DomainError("g_max must be > 0");
  if (!(margin >= 0.0 && margin < 1.0)) throw DomainError("margin must lie in [0, 1)");
  if (coords_per_move < 1) throw DomainError("coords_per_move must be >= 1");
}

Vector neighbor(const Vector& g, const AnnealSchedule& schedule, const GainBounds& bounds,
                const Feasibility& feasible, Rng& rng) {
  if (schedule.step_scale == 0.0 || g.size() == 0) return g;
  const int n = static_cast<int>(g.size());
  const int k = std::min(bounds.coords_per_move, n);
  std::normal_distribution<double> step(0.0, schedule.step_scale * bounds.g_max);
  std::vector<int> idx(n);
  for (int attempt = 0; attempt < kNeighborTries; ++attempt) {
    std::iota(idx.begin(), idx.end(), 0);
    // Partial Fisher-Yates picks k distinct coordinates.
    for (int i = 0; i < k; ++i) {
      std::uniform_int_distribution<int> pick(i, n - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    Vector c = g;
    for (int i = 0; i < k; ++i) c[idx[i]] = std::clamp(c[idx[i]] + step(rng), 0.0, bounds.g_max);
    if (feasible(c)) return c;
  }
  return g;
}

OptResult anneal_once(const Objective& objective, const Vector& g0, const AnnealSchedule& schedule,
                      const GainBounds& bounds, const Feasibility& feasible) {
  schedule.validate();
  bounds.validate();
  if ((g0.array() < 0.0).any() || (g0.array() > bounds.g_max).any())
    throw DomainError("initial gains lie outside [0, g_max]");
  if (!feasible(g0)) throw InstabilityError("initial gains violate the stability constraint");

  Rng rng(schedule.rng_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  OptResult r;
  Vector cur = g0;
  double f_cur = objective(cur);
  r.best_gains = cur;
  r.best_objective = f_cur;
  double t = schedule.t0;
  for (long it = 0; it < schedule.max_iter && t > schedule.t_min; ++it) {
    Vector cand = neighbor(cur, schedule, bounds, feasible, rng);
    const double f = objective(cand);
    bool accept = false;
    if (admissible(f)) {
      const double d = f - f_cur;
      accept = d < 0.0 || unit(rng) < std::exp(-d / t);
    }
    if (accept) {
      cur = std::move(cand);
      f_cur = f;
      ++r.accepted_moves;
      if (f_cur < r.best_objective) {
        r.best_objective = f_cur;
        r.best_gains = cur;
      }
    } else {
      ++r.rejected_moves;
    }
    if (schedule.record_trace) r.trace.push_back({it, t, f_cur, accept});
    t *= schedule.alpha;
  }
  return r;
}

OptResult anneal(const Objective& objective, const Vector& g0, const AnnealSchedule& schedule,
                 const GainBounds& bounds, const Feasibility& feasible) {
  schedule.validate();
  std::vector<std::future<OptResult>> runs;
  runs.reserve(schedule.restarts);
  for (int r = 0; r < schedule.restarts; ++r) {
    AnnealSchedule s = schedule;
    s.rng_seed = schedule.rng_seed + static_cast<std::uint64_t>(r);
    runs.push_back(std::async(std::launch::async, [&, s] { return anneal_once(objective, g0, s, bounds, feasible); }));
  }
  OptResult best;
  long accepted = 0, rejected = 0;
  for (int r = 0; r < schedule.restarts; ++r) {
    OptResult o = runs[r].get();
    accepted += o.accepted_moves;
    rejected += o.rejected_moves;
    if (r == 0 || o.best_objective < best.best_objective) {
      best = std::move(o);
      best.best_restart = r;
    }
  }
  best.accepted_moves = accepted;
  best.rejected_moves = rejected;
  // Post-hoc checks, independent of the search path.
  if (!feasible(best.best_gains)) throw InstabilityError("annealer returned an infeasible point");
  const double f = objective(best.best_gains);
  if (!(f == best.best_objective) && !(std::isnan(f) && std::isnan(best.best_objective)))
    throw Error(fmt::format("objective is not reproducible ({} vs {})", f, best.best_objective));
  return best;
}

double max_equal_gain(const ChannelMatrix& h, double margin) {
  h.validate();
  if (!(margin >= 0.0 && margin < 1.0)) throw DomainError("margin must lie in [0, 1)");
  if (h.h.isZero(0.0)) throw DomainError("channel matrix is all zero");
  const int n = h.n();
  const Vector ones = Vector::Ones(n);
  const double rho1 = spectral_radius(h, ones);
  if (rho1 == 0.0) return std::numeric_limits<double>::infinity();
  const double target = 1.0 - margin;
  auto ok = [&](double gamma) { return spectral_radius(h, gamma * ones) < target; };
  const double g = target / rho1;
  double lo = g * (1.0 - 1e-6), hi = g * (1.0 + 1e-6);
  while (!ok(lo)) lo *= 0.5;
  while (ok(hi)) hi *= 2.0;
  while ((hi - lo) > 1e-9 * hi) {
    const double mid = 0.5 * (lo + hi);
    (ok(mid) ? lo : hi) = mid;
  }
  return lo;
}

namespace {

Feasibility stability_check(const ChannelMatrix& h, double margin) {
  return [&h, margin](const Vector& g) { return is_stable(h, g, margin); };
}

Vector equal_start(const ChannelMatrix& h, const GainBounds& bounds) {
  const double gamma = std::min(max_equal_gain(h, bounds.margin), bounds.g_max);
  return Vector::Constant(h.n(), gamma);
}

}  // namespace

SingleBssResult optimize_single_bss(const SingleBssProblem& p) {
  p.h.validate();
  p.link.validate(p.h.n());
  p.noise.validate(p.h.n());
  p.bounds.validate();
  const Feasibility feasible = stability_check(p.h, p.bounds.margin);
  auto snr = [&](const Vector& g) { return snr_sa(p.h, g, p.link, p.noise, p.combination); };
  const Objective objective = [&](const Vector& g) { return -to_db(snr(g)); };

  SingleBssResult out;
  const Vector base = equal_start(p.h, p.bounds);
  out.baseline_gain = base[0];
  out.baseline_snr = snr(base);
  const Vector g0 = p.g0 ? *p.g0 : base;
  out.opt = anneal(objective, g0, p.schedule, p.bounds, feasible);
  out.snr = snr(out.opt.best_gains);
  return out;
}

MultiBssResult optimize_multi_bss(const MultiBssProblem& p) {
  if (p.links.size() < 2) throw ValidationError("multi-BSS optimization needs at least two links");
  p.h.validate();
  p.bounds.validate();
  const int n = p.h.n();
  MultiBssResult out;
  for (const auto& link : p.links) {
    SingleBssProblem sp{p.h, link, p.noise, p.combination, p.bounds, p.schedule, std::nullopt};
    SingleBssResult sr = optimize_single_bss(sp);
    if (!(sr.snr > 0.0) || !std::isfinite(sr.snr))
      throw DomainError("single-BSS optimum must be finite and positive to normalise SINR");
    out.gamma_star.push_back(sr.snr);
    out.single_gains.push_back(sr.opt.best_gains);
  }

  const Feasibility feasible = stability_check(p.h, p.bounds.margin);
  const Objective objective = [&](const Vector& g) {
    return to_db(sinr_multi(p.h, g, p.links, p.noise, out.gamma_star, p.combination).objective);
  };
  // Start from whichever candidate scores best: the equal-gain baseline,
  // any single-BSS optimum or their element-wise maximum, when feasible.
  std::vector<Vector> starts = out.single_gains;
  Vector merged = out.single_gains.front();
  for (const auto& g : out.single_gains) merged = merged.cwiseMax(g);
  starts.push_back(merged);
  Vector g0 = equal_start(p.h, p.bounds);
  double f0 = objective(g0);
  for (const auto& g : starts) {
    if (g.size() != n || !feasible(g)) continue;
    const double f = objective(g);
    if (admissible(f) && (!admissible(f0) || f < f0)) {
      g0 = g;
      f0 = f;
    }
  }
  out.opt = anneal(objective, g0, p.schedule, p.bounds, feasible);
  out.sinr = sinr_multi(p.h, out.opt.best_gains, p.links, p.noise, out.gamma_star, p.combination);
  return out;
}

}  // namespace owe
