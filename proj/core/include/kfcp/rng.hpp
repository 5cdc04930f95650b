#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace kfcp {

/// A deterministic random stream keyed by (master seed, path).
///
/// The key is a hash fold over the path, so `derive_stream(s, {a, b})` and
/// `derive_stream(s, {a}).child(b)` are the same stream. Every stochastic
/// unit of work (replicate, fold, model) owns a stream derived from its
/// identifiers, never from thread identity, which is what makes results
/// independent of the worker count.
///
/// Bits come from xoshiro256** seeded through splitmix64. Normals use the
/// Marsaglia polar method with the spare value cached, so sequences are
/// reproducible within one build.
///
/// Not thread-safe: a stream has a single owner.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::span<const std::uint64_t> path);

  /// Hash of (master seed, path); identifies the stream.
  [[nodiscard]] std::uint64_t stream_id() const noexcept { return key_; }

  /// The stream for `path + {id}`. Does not consume draws from this stream.
  [[nodiscard]] RngStream child(std::uint64_t id) const;

  std::uint64_t next_u64() noexcept;
  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform() noexcept;
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) noexcept;
  /// Unbiased integer in [0, n); n must be positive.
  std::size_t uniform_index(std::size_t n);
  double std_normal() noexcept;
  /// One draw of t3 / sqrt(3), the unit-variance scaled Student t.
  double scaled_t3() noexcept;

  /// Fisher-Yates shuffle of `values`.
  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  struct FromKey {};
  RngStream(FromKey, std::uint64_t key);
  void seed_state();

  std::uint64_t key_ = 0;
  std::array<std::uint64_t, 4> state_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

RngStream derive_stream(std::uint64_t master_seed, std::span<const std::uint64_t> path);
RngStream derive_stream(std::uint64_t master_seed, std::initializer_list<std::uint64_t> path);

/// `count` i.i.d. N(0, 1) draws; count must be at least 1.
std::vector<double> sample_std_normal(RngStream& stream, std::size_t count);

/// `count` i.i.d. draws of t3 / sqrt(3), built as Z / sqrt(V/3) / sqrt(3)
/// with V the sum of three squared standard normals.
std::vector<double> sample_scaled_t3(RngStream& stream, std::size_t count);

/// Stable 64-bit FNV-1a hash, used to key streams by names.
std::uint64_t hash_name(std::string_view text) noexcept;

}  // namespace kfcp
