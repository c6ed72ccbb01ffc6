#include "npf/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "npf/gaussian.hpp"

namespace npf {

namespace {

constexpr std::uint64_t kSplitMixGamma = 0x9e3779b97f4a7c15ULL;

std::uint64_t splitmix_next(std::uint64_t& state) {
  std::uint64_t z = (state += kSplitMixGamma);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {
  reset();
}

void RngStream::reset() {
  // Hash seed and stream id together, then expand with SplitMix64. Distinct
  // stream ids land in unrelated regions of the state space, which is what
  // lets every particle slot own an independent substream.
  std::uint64_t h = seed_;
  std::uint64_t id = stream_id_;
  h ^= splitmix_next(id);
  state_[0] = splitmix_next(h);
  state_[1] = splitmix_next(h);
  state_[2] = splitmix_next(h);
  state_[3] = splitmix_next(h);
  if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
}

std::uint64_t RngStream::next_u64() {
  // xoshiro256++
  const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
  // Box-Muller, cosine branch only, so every call consumes exactly two
  // uniforms regardless of surrounding code.
  const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t RngStream::uniform_index(std::size_t n) {
  return std::min<std::size_t>(static_cast<std::size_t>(uniform() * static_cast<double>(n)),
                               n - 1);
}

std::size_t RngStream::categorical(std::span<const double> probs) {
  const double u = uniform();
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] > 0.0) last_positive = i;
    acc += probs[i];
    if (u < acc) return i;
  }
  return last_positive;
}

std::uint64_t RngStream::derive(std::uint64_t seed, std::uint64_t key) {
  std::uint64_t h = seed;
  std::uint64_t k = key;
  h ^= splitmix_next(k);
  return splitmix_next(h);
}

void normalize_log_inplace(std::span<double> w) {
  double max_log = -std::numeric_limits<double>::infinity();
  for (double v : w) {
    if (std::isfinite(v) && v > max_log) max_log = v;
  }
  if (!std::isfinite(max_log)) {
    throw DegenerateWeightsError(
        "all log-weights are non-finite; filter has degenerated");
  }
  double sum = 0.0;
  for (double& v : w) {
    v = std::isfinite(v) ? std::exp(v - max_log) : 0.0;
    sum += v;
  }
  for (double& v : w) v /= sum;
}

WeightVector normalize(std::span<const double> log_weights) {
  WeightVector out;
  out.w_.assign(log_weights.begin(), log_weights.end());
  normalize_log_inplace(out.w_);
  return out;
}

double effective_sample_size(std::span<const double> weights) {
  double sq = 0.0;
  for (double v : weights) sq += v * v;
  return 1.0 / sq;
}

double effective_sample_size(const WeightVector& weights) {
  return effective_sample_size(std::span<const double>(weights.linear()));
}

void resample_into(std::span<const double> weights, std::span<std::uint32_t> out,
                   RngStream& stream, ResampleScheme scheme) {
  const std::size_t n_in = weights.size();
  const std::size_t n_out = out.size();
  if (scheme == ResampleScheme::systematic) {
    const double step = 1.0 / static_cast<double>(n_out);
    double position = stream.uniform() * step;
    double cumulative = weights[0];
    std::size_t i = 0;
    for (std::size_t k = 0; k < n_out; ++k) {
      while (position > cumulative && i + 1 < n_in) {
        ++i;
        cumulative += weights[i];
      }
      out[k] = static_cast<std::uint32_t>(i);
      position += step;
    }
  } else {
    for (std::size_t k = 0; k < n_out; ++k) {
      out[k] = static_cast<std::uint32_t>(stream.categorical(weights));
    }
  }
}

std::vector<std::uint32_t> resample(const WeightVector& weights,
                                    std::size_t n_out, RngStream& stream,
                                    ResampleScheme scheme) {
  std::vector<std::uint32_t> out(n_out);
  resample_into(weights.linear(), out, stream, scheme);
  return out;
}

Vec sample_gaussian(RngStream& stream, const VecRef& mean, const Mat& cov) {
  CholPsd chol(cov);
  return chol.sample(stream, mean);
}

}  // namespace npf
