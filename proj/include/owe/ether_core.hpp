#pragma once

#include <vector>

#include <Eigen/Dense>

#include "owe/ea_circuit.hpp"
#include "owe/radiometry.hpp"

namespace owe {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// h(i, j) is the gain from EA i's LED current to EA j's photocurrent.
struct ChannelMatrix {
  Matrix h;

  ChannelMatrix() = default;
  explicit ChannelMatrix(Matrix m);
  int n() const { return static_cast<int>(h.rows()); }
  void validate() const;
};

struct NoiseVectors {
  Vector n_gain_dep;  // ñ, referred to each EA's TIA input
  Vector n_additive;  // ñ_a, injected at each LED
  double ap_noise_a = 0.0;  // optional AP floor, off by default

  static NoiseVectors uniform(int n, const NoiseBudget& nb);
  static NoiseVectors zero(int n);
  void validate(int n) const;
};

struct BssLink {
  Vector entry_weights;  // ṽ at entry EAs, zero elsewhere
  int ap_ea_index = 0;

  static BssLink single(int n, int entry, double photocurrent_a, int ap);
  void validate(int n) const;
};

/// How independent per-EA noise sources combine into one RMS value.
enum class NoiseCombination { Coherent, Quadrature };

/// h_ij = r·η·U_LED·diffuse gain between co-ceiling EAs. Diagonal entries
/// use the co-located geometry. Rows are integrated on worker threads.
ChannelMatrix build_channel_matrix(const std::vector<Pose>& poses, const EmitterParams& emitter,
                                   const ReceiverParams& receiver, const FloorModel& floor,
                                   const EaCircuitParams& circuit);

/// Largest |eigenvalue| of an arbitrary square matrix (dense for n <= 64,
/// shifted power iteration above that, which assumes nonnegative entries).
double spectral_radius(const Matrix& m);
double spectral_radius(const ChannelMatrix& h, const Vector& g);
bool is_stable(const ChannelMatrix& h, const Vector& g, double margin);

/// Hᵀ·Diag(g).
Matrix loop_matrix(const ChannelMatrix& h, const Vector& g);

struct Response {
  Vector signal;  // A·x
  Vector noise;   // A·Hᵀ·(Gñ + ñ_a), combined per NoiseCombination
};

/// EA photocurrents for external injection x. Throws InstabilityError unless
/// the loop matrix has spectral radius below 1.
Response solve_response(const ChannelMatrix& h, const Vector& g, const Vector& x,
                        const NoiseVectors& noise,
                        NoiseCombination comb = NoiseCombination::Coherent);

/// LED drive currents: G·A·x for the signal, (G·A·Hᵀ + I)·e for the noise.
Response led_response(const ChannelMatrix& h, const Vector& g, const Vector& x,
                      const NoiseVectors& noise,
                      NoiseCombination comb = NoiseCombination::Coherent);

struct ApReading {
  double signal = 0.0;
  double noise = 0.0;
};

/// Factorization of I − HᵀG reused across several AP evaluations.
class FeedbackSystem {
 public:
  FeedbackSystem(const ChannelMatrix& h, const Vector& g);

  /// Row `ap` of A.
  Vector a_row(int ap) const;
  ApReading ap_received(const BssLink& link, const NoiseVectors& noise, NoiseCombination comb) const;
  /// Signal amplitude of `from` arriving at `to`'s AP.
  double interference(const BssLink& from, const BssLink& to) const;

 private:
  const ChannelMatrix* h_;
  Vector g_;
  Eigen::PartialPivLU<Matrix> lu_;
};

ApReading ap_received(const ChannelMatrix& h, const Vector& g, const BssLink& link,
                      const NoiseVectors& noise,
                      NoiseCombination comb = NoiseCombination::Coherent);

/// +inf when the noise vanishes and the signal does not; 0 when both vanish.
double snr_sa(const ChannelMatrix& h, const Vector& g, const BssLink& link, const NoiseVectors& noise,
              NoiseCombination comb = NoiseCombination::Coherent);

double mutual_interference(const ChannelMatrix& h, const Vector& g, const BssLink& from,
                           const BssLink& to);

struct MultiSinr {
  std::vector<double> sinr;
  std::vector<double> signal_power;
  std::vector<double> noise_power;
  /// interference_power[i] sums |I_m[j,i]|² over j != i.
  std::vector<double> interference_power;
  double objective = 0.0;
};

MultiSinr sinr_multi(const ChannelMatrix& h, const Vector& g, const std::vector<BssLink>& links,
                     const NoiseVectors& noise, const std::vector<double>& gamma_star,
                     NoiseCombination comb = NoiseCombination::Coherent);

double to_db(double linear);

}  // namespace owe
