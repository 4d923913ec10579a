#pragma once

// Seeded Gaussian sampling.
//
// Every random quantity is addressed by (seed, index): row i of an ensemble,
// trial t of a probe, iteration t of a fresh-sampling run. The index is mixed
// into the seed with SplitMix64 and drives its own std::mt19937_64, so any row
// can be regenerated on its own. Normals come from the Box-Muller transform.

#include "romrec/common.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>

namespace romrec {

/// SplitMix64 output function.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Independent sub-stream tags. Changing one factor of an experiment
/// (noise, ground truth, sensing vectors) leaves the others untouched.
enum class Stream : std::uint64_t {
  ensemble = 0x11,
  truth = 0x22,
  noise = 0x33,
  krylov = 0x44,
  trial = 0x55,
  power = 0x66,
  samples = 0x77,
};

constexpr std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t index = 0) noexcept {
  return mix64(mix64(seed ^ mix64(static_cast<std::uint64_t>(stream))) + index);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return mix64(mix64(seed) + index);
}

class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : engine_(seed) {}

  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // 53-bit uniforms; u1 in (0, 1] keeps the log finite.
    const double u1 = 1.0 - static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  void fill(std::span<double> out) {
    for (double& v : out) v = next();
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Row `row` of the Gaussian array identified by `seed`.
inline void fill_gaussian_row(std::uint64_t seed, Index row, std::span<double> out) {
  GaussianStream(derive_seed(seed, static_cast<std::uint64_t>(row))).fill(out);
}

/// rows x cols standard normal matrix, generated row by row.
inline Matrix gaussian_matrix(Index rows, Index cols, std::uint64_t seed) {
  RowMatrix out(rows, cols);
  for (Index i = 0; i < rows; ++i)
    fill_gaussian_row(seed, i, std::span<double>(out.row(i).data(), static_cast<std::size_t>(cols)));
  return out;
}

inline Vector gaussian_vector(Index n, std::uint64_t seed) {
  Vector out(n);
  GaussianStream(mix64(seed)).fill(std::span<double>(out.data(), static_cast<std::size_t>(n)));
  return out;
}

}  // namespace romrec
