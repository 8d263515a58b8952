#include "owe/ether_core.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <limits>
#include <thread>

#include <fmt/format.h>

#include "owe/error.hpp"

namespace owe {

namespace {

constexpr int kDenseEigenLimit = 64;
constexpr int kPowerIterMax = 200000;
constexpr double kPowerIterTol = 1e-10;

double combine(const Vector& c, const Vector& e, NoiseCombination comb) {
  if (comb == NoiseCombination::Coherent) return std::abs(c.dot(e));
  return std::sqrt(c.cwiseProduct(e).squaredNorm());
}

Vector noise_sources(const Vector& g, const NoiseVectors& noise) {
  return g.cwiseProduct(noise.n_gain_dep) + noise.n_additive;
}

void check_gains(const ChannelMatrix& h, const Vector& g) {
  if (g.size() != h.n())
    throw ValidationError(fmt::format("gain vector has {} entries for {} EAs", g.size(), h.n()));
  if ((g.array() < 0.0).any() || !g.allFinite()) throw DomainError("gains must be finite and >= 0");
}

}  // namespace

ChannelMatrix::ChannelMatrix(Matrix m) : h(std::move(m)) { validate(); }

void ChannelMatrix::validate() const {
  if (h.rows() != h.cols()) throw ValidationError("channel matrix must be square");
  if (h.rows() == 0) throw ValidationError("channel matrix is empty");
  if (!h.allFinite() || (h.array() < 0.0).any())
    throw DomainError("channel entries must be finite and >= 0");
}

NoiseVectors NoiseVectors::uniform(int n, const NoiseBudget& nb) {
  NoiseVectors v;
  v.n_gain_dep = Vector::Constant(n, nb.gain_dependent());
  v.n_additive = Vector::Constant(n, nb.additive());
  return v;
}

NoiseVectors NoiseVectors::zero(int n) {
  NoiseVectors v;
  v.n_gain_dep = Vector::Zero(n);
  v.n_additive = Vector::Zero(n);
  return v;
}

void NoiseVectors::validate(int n) const {
  if (n_gain_dep.size() != n || n_additive.size() != n)
    throw ValidationError(fmt::format("noise vectors must have {} entries", n));
  if ((n_gain_dep.array() < 0.0).any() || (n_additive.array() < 0.0).any() || !(ap_noise_a >= 0.0))
    throw DomainError("noise RMS values must be >= 0");
}

BssLink BssLink::single(int n, int entry, double photocurrent_a, int ap) {
  BssLink l;
  l.entry_weights = Vector::Zero(n);
  if (entry < 0 || entry >= n) throw ValidationError(fmt::format("entry EA index {} out of range", entry));
  l.entry_weights[entry] = photocurrent_a;
  l.ap_ea_index = ap;
  l.validate(n);
  return l;
}

void BssLink::validate(int n) const {
  if (entry_weights.size() != n)
    throw ValidationError(fmt::format("entry weights must have {} entries", n));
  if ((entry_weights.array() < 0.0).any()) throw DomainError("entry photocurrents must be >= 0");
  if (ap_ea_index < 0 || ap_ea_index >= n)
    throw ValidationError(fmt::format("AP EA index {} out of range [0, {})", ap_ea_index, n));
}

ChannelMatrix build_channel_matrix(const std::vector<Pose>& poses, const EmitterParams& emitter,
                                   const ReceiverParams& receiver, const FloorModel& floor,
                                   const EaCircuitParams& circuit) {
  const int n = static_cast<int>(poses.size());
  if (n < 1) throw ValidationError("at least one EA is required");
  for (const auto& p : poses) p.validate();
  receiver.validate();
  floor.validate();
  circuit.validate();
  const double scale = circuit.responsivity_a_per_w * circuit.led_watts_per_amp();

  Matrix h(n, n);
  auto fill_row = [&](int i) {
    Transmitter tx{poses[i], emitter};
    for (int j = 0; j < n; ++j) {
      Receiver rx{poses[j], receiver};
      h(i, j) = scale * diffuse_power_gain(tx, rx, floor);
    }
  };
  const int workers = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(), 16u));
  std::vector<std::future<void>> jobs;
  std::atomic<int> next{0};
  for (int w = 0; w < workers; ++w)
    jobs.push_back(std::async(std::launch::async, [&] {
      for (int i = next++; i < n; i = next++) fill_row(i);
    }));
  for (auto& j : jobs) j.get();
  return ChannelMatrix(std::move(h));
}

double spectral_radius(const Matrix& m) {
  if (m.rows() != m.cols()) throw ValidationError("spectral radius needs a square matrix");
  const int n = static_cast<int>(m.rows());
  if (n == 0) return 0.0;
  if (m.isZero(0.0)) return 0.0;
  if (n <= kDenseEigenLimit) {
    Eigen::EigenSolver<Matrix> es(m, false);
    if (es.info() != Eigen::Success) throw ConvergenceError("eigenvalue solver failed", 0);
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
  // The shift by I makes the Perron root strictly dominant for nonnegative m.
  Vector v = Vector::Ones(n) / std::sqrt(static_cast<double>(n));
  double lambda = 0.0;
  for (int it = 1; it <= kPowerIterMax; ++it) {
    Vector w = m * v + v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    w /= norm;
    const double next = w.dot(m * w + w) - 1.0;
    if (it > 1 && std::abs(next - lambda) <= kPowerIterTol * std::max(1.0, std::abs(next))) return next;
    lambda = next;
    v = w;
  }
  throw ConvergenceError(fmt::format("power iteration did not converge in {} iterations", kPowerIterMax),
                         kPowerIterMax);
}

Matrix loop_matrix(const ChannelMatrix& h, const Vector& g) {
  check_gains(h, g);
  return h.h.transpose() * g.asDiagonal();
}

double spectral_radius(const ChannelMatrix& h, const Vector& g) { return spectral_radius(loop_matrix(h, g)); }

bool is_stable(const ChannelMatrix& h, const Vector& g, double margin) {
  if (!(margin >= 0.0 && margin < 1.0)) throw DomainError("margin must lie in [0, 1)");
  return spectral_radius(h, g) < 1.0 - margin;
}

FeedbackSystem::FeedbackSystem(const ChannelMatrix& h, const Vector& g) : h_(&h), g_(g) {
  const Matrix m = loop_matrix(h, g);
  const double rho = spectral_radius(m);
  if (!(rho < 1.0))
    throw InstabilityError(fmt::format("feedback loop is unstable (spectral radius {:.6g})", rho));
  lu_.compute(Matrix::Identity(h.n(), h.n()) - m);
}

Vector FeedbackSystem::a_row(int ap) const {
  const int n = h_->n();
  Vector e = Vector::Zero(n);
  e[ap] = 1.0;
  // Row of A = column of A^T, i.e. solve (I - M)^T z = e.
  return lu_.transpose().solve(e);
}

ApReading FeedbackSystem::ap_received(const BssLink& link, const NoiseVectors& noise,
                                      NoiseCombination comb) const {
  const int n = h_->n();
  link.validate(n);
  noise.validate(n);
  const Vector row = a_row(link.ap_ea_index);
  ApReading r;
  r.signal = row.dot(link.entry_weights);
  const Vector c = h_->h * row;  // (row · Hᵀ)ᵀ
  r.noise = combine(c, noise_sources(g_, noise), comb);
  if (noise.ap_noise_a > 0.0) r.noise = std::hypot(r.noise, noise.ap_noise_a);
  return r;
}

double FeedbackSystem::interference(const BssLink& from, const BssLink& to) const {
  const int n = h_->n();
  from.validate(n);
  to.validate(n);
  return a_row(to.ap_ea_index).dot(from.entry_weights);
}

Response solve_response(const ChannelMatrix& h, const Vector& g, const Vector& x, const NoiseVectors& noise,
                        NoiseCombination comb) {
  const int n = h.n();
  if (x.size() != n) throw ValidationError("injection vector size mismatch");
  noise.validate(n);
  const Matrix m = loop_matrix(h, g);
  const double rho = spectral_radius(m);
  if (!(rho < 1.0))
    throw InstabilityError(fmt::format("feedback loop is unstable (spectral radius {:.6g})", rho));
  Eigen::PartialPivLU<Matrix> lu(Matrix::Identity(n, n) - m);
  Response r;
  r.signal = lu.solve(x);
  const Vector e = noise_sources(g, noise);
  const Matrix c = lu.solve(Matrix(h.h.transpose()));  // A·Hᵀ
  r.noise.resize(n);
  for (int k = 0; k < n; ++k) r.noise[k] = combine(c.row(k).transpose(), e, comb);
  return r;
}

Response led_response(const ChannelMatrix& h, const Vector& g, const Vector& x, const NoiseVectors& noise,
                      NoiseCombination comb) {
  const int n = h.n();
  if (x.size() != n) throw ValidationError("injection vector size mismatch");
  noise.validate(n);
  const Matrix m = loop_matrix(h, g);
  const double rho = spectral_radius(m);
  if (!(rho < 1.0))
    throw InstabilityError(fmt::format("feedback loop is unstable (spectral radius {:.6g})", rho));
  Eigen::PartialPivLU<Matrix> lu(Matrix::Identity(n, n) - m);
  Response r;
  r.signal = g.cwiseProduct(lu.solve(x));
  const Vector e = noise_sources(g, noise);
  const Matrix c = g.asDiagonal() * lu.solve(Matrix(h.h.transpose())) + Matrix::Identity(n, n);
  r.noise.resize(n);
  for (int k = 0; k < n; ++k) r.noise[k] = combine(c.row(k).transpose(), e, comb);
  return r;
}

ApReading ap_received(const ChannelMatrix& h, const Vector& g, const BssLink& link, const NoiseVectors& noise,
                      NoiseCombination comb) {
  return FeedbackSystem(h, g).ap_received(link, noise, comb);
}

namespace {

double ratio(double s, double n) {
  if (s == 0.0) return 0.0;
  if (n == 0.0) return std::numeric_limits<double>::infinity();
  return (s * s) / (n * n);
}

}  // namespace

double snr_sa(const ChannelMatrix& h, const Vector& g, const BssLink& link, const NoiseVectors& noise,
              NoiseCombination comb) {
  const ApReading r = ap_received(h, g, link, noise, comb);
  return ratio(r.signal, r.noise);
}

double mutual_interference(const ChannelMatrix& h, const Vector& g, const BssLink& from, const BssLink& to) {
  if (from.ap_ea_index == to.ap_ea_index)
    throw ValidationError("interference is defined between distinct BSSs with distinct AP EAs");
  return FeedbackSystem(h, g).interference(from, to);
}

MultiSinr sinr_multi(const ChannelMatrix& h, const Vector& g, const std::vector<BssLink>& links,
                     const NoiseVectors& noise, const std::vector<double>& gamma_star,
                     NoiseCombination comb) {
  if (links.empty()) throw ValidationError("at least one link is required");
  if (gamma_star.size() != links.size()) throw ValidationError("one gamma* per link is required");
  for (double gs : gamma_star)
    if (!(gs > 0.0)) throw DomainError("gamma* must be > 0");
  for (size_t i = 0; i < links.size(); ++i)
    for (size_t j = i + 1; j < links.size(); ++j)
      if (links[i].ap_ea_index == links[j].ap_ea_index)
        throw ValidationError(fmt::format("links {} and {} share AP EA {}", i + 1, j + 1,
                                          links[i].ap_ea_index + 1));
  const FeedbackSystem sys(h, g);
  const size_t k = links.size();
  MultiSinr out;
  out.sinr.resize(k);
  out.signal_power.resize(k);
  out.noise_power.resize(k);
  out.interference_power.assign(k, 0.0);
  out.objective = 0.0;
  for (size_t i = 0; i < k; ++i) {
    const ApReading r = sys.ap_received(links[i], noise, comb);
    const Vector row = sys.a_row(links[i].ap_ea_index);
    for (size_t j = 0; j < k; ++j) {
      if (j == i) continue;
      const double im = row.dot(links[j].entry_weights);
      out.interference_power[i] += im * im;
    }
    out.signal_power[i] = r.signal * r.signal;
    out.noise_power[i] = r.noise * r.noise;
    const double den = out.noise_power[i] + out.interference_power[i];
    if (out.signal_power[i] == 0.0)
      out.sinr[i] = 0.0;
    else if (den == 0.0)
      out.sinr[i] = std::numeric_limits<double>::infinity();
    else
      out.sinr[i] = out.signal_power[i] / den;
    if (out.sinr[i] == 0.0)
      out.objective = std::numeric_limits<double>::infinity();
    else
      out.objective += gamma_star[i] / out.sinr[i];
  }
  return out;
}

double to_db(double linear) {
  if (linear == std::numeric_limits<double>::infinity()) return linear;
  if (linear <= 0.0) return -std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(linear);
}

}  // namespace owe
