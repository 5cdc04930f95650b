#include "kfcp/rng.hpp"

#include <cmath>

#include "kfcp/error.hpp"

namespace kfcp {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
  return (x << k) | (x >> (64 - k));
}

constexpr std::uint64_t fold_key(std::uint64_t key, std::uint64_t element) noexcept {
  return mix64(rotl(key, 23) ^ mix64(element + kGolden));
}

std::uint64_t key_for(std::uint64_t master_seed, std::span<const std::uint64_t> path) noexcept {
  std::uint64_t key = mix64(master_seed ^ 0x6A09E667F3BCC909ULL);
  for (std::uint64_t element : path) key = fold_key(key, element);
  return key;
}

}  // namespace

RngStream::RngStream(std::uint64_t master_seed, std::span<const std::uint64_t> path)
    : key_(key_for(master_seed, path)) {
  seed_state();
}

RngStream::RngStream(FromKey, std::uint64_t key) : key_(key) { seed_state(); }

void RngStream::seed_state() {
  std::uint64_t sm = key_;
  for (auto& word : state_) {
    sm += kGolden;
    word = mix64(sm);
  }
}

RngStream RngStream::child(std::uint64_t id) const {
  return RngStream(FromKey{}, fold_key(key_, id));
}

std::uint64_t RngStream::next_u64() noexcept {
  const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double RngStream::uniform() noexcept {
  // (k + 0.5) / 2^53 lies strictly inside (0, 1).
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) noexcept {
  return lo + (hi - lo) * (static_cast<double>(next_u64() >> 11) * 0x1.0p-53);
}

std::size_t RngStream::uniform_index(std::size_t n) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "uniform_index requires n > 0");
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r >= threshold) return static_cast<std::size_t>(r % bound);
  }
}

double RngStream::std_normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u = 0.0;
  double v = 0.0;
  double s = 0.0;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double factor = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * factor;
  has_spare_ = true;
  return u * factor;
}

double RngStream::scaled_t3() noexcept {
  const double z = std_normal();
  double chi2 = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double g = std_normal();
    chi2 += g * g;
  }
  return z / std::sqrt(chi2 / 3.0) / std::sqrt(3.0);
}

RngStream derive_stream(std::uint64_t master_seed, std::span<const std::uint64_t> path) {
  return RngStream(master_seed, path);
}

RngStream derive_stream(std::uint64_t master_seed, std::initializer_list<std::uint64_t> path) {
  return RngStream(master_seed, std::span<const std::uint64_t>(path.begin(), path.size()));
}

std::vector<double> sample_std_normal(RngStream& stream, std::size_t count) {
  if (count == 0) throw Error(ErrorCode::InvalidArgument, "sample count must be at least 1");
  std::vector<double> out(count);
  for (auto& value : out) value = stream.std_normal();
  return out;
}

std::vector<double> sample_scaled_t3(RngStream& stream, std::size_t count) {
  if (count == 0) throw Error(ErrorCode::InvalidArgument, "sample count must be at least 1");
  std::vector<double> out(count);
  for (auto& value : out) value = stream.scaled_t3();
  return out;
}

std::uint64_t hash_name(std::string_view text) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace kfcp
