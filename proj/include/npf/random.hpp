#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "npf/errors.hpp"
#include "npf/types.hpp"

namespace npf {

/// Deterministic, seedable random stream (xoshiro256++ seeded through a
/// SplitMix64 hash of (seed, stream_id)).
///
/// The same (seed, stream_id) pair always reproduces the same sample
/// sequence; distinct stream_ids give statistically independent streams.
/// Each concurrent task must own its stream; a stream may be handed to
/// another task only at a sequential synchronization point.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t next_u64();

  /// Uniform draw on [0, 1).
  double uniform();

  /// Standard normal draw (Box-Muller; two uniforms per call).
  double normal();

  /// Uniform integer in [0, n).
  std::size_t uniform_index(std::size_t n);

  /// Categorical draw from normalized linear weights.
  std::size_t categorical(std::span<const double> probs);

  /// Rewinds to the initial state for the same (seed, stream_id).
  void reset();

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  /// Stateless sub-seed derivation, used to key replicate/filter streams.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t key);

 private:
  std::uint64_t state_[4];
  std::uint64_t seed_ = 0;
  std::uint64_t stream_id_ = 0;
};

/// Normalized importance weights. Constructible only through normalize(),
/// so an instance always sums to 1 and is never all-zero.
class WeightVector {
 public:
  const std::vector<double>& linear() const { return w_; }
  std::size_t size() const { return w_.size(); }
  double operator[](std::size_t i) const { return w_[i]; }

  friend WeightVector normalize(std::span<const double> log_weights);

 private:
  WeightVector() = default;
  std::vector<double> w_;
};

/// Converts log-domain weights to normalized linear weights via max-shift.
/// Non-finite entries get zero weight; throws DegenerateWeightsError when no
/// entry is finite.
WeightVector normalize(std::span<const double> log_weights);

/// In-place variant used by the filters: `w` holds log weights on entry and
/// normalized linear weights on exit.
void normalize_log_inplace(std::span<double> w);

/// 1 / sum(w_i^2); in [1, N] for normalized weights.
double effective_sample_size(const WeightVector& weights);
double effective_sample_size(std::span<const double> weights);

enum class ResampleScheme { systematic, multinomial };

/// Draws `n_out` ancestor indices with expected offspring count
/// n_out * weights[i]. The systematic scheme consumes a single uniform and
/// returns nondecreasing indices.
void resample_into(std::span<const double> weights, std::span<std::uint32_t> out,
                   RngStream& stream, ResampleScheme scheme);
std::vector<std::uint32_t> resample(const WeightVector& weights,
                                    std::size_t n_out, RngStream& stream,
                                    ResampleScheme scheme = ResampleScheme::systematic);

/// Draw from N(mean, cov). cov must be symmetric PSD; a lower-triangular
/// factorization is applied to i.i.d. normals. Throws NotPsdError.
Vec sample_gaussian(RngStream& stream, const VecRef& mean, const Mat& cov);

}  // namespace npf
