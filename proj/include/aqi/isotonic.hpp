#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace aqi {

/// Pool-adjacent-violators: replaces `y` in place by its Euclidean projection
/// onto { z : z[0] >= z[1] >= ... >= z[n-1] }.
inline void isotonic_nonincreasing(std::span<double> y) {
  struct Block {
    double sum;
    std::size_t size;
    double mean() const { return sum / static_cast<double>(size); }
  };
  std::vector<Block> blocks;
  blocks.reserve(y.size());
  for (double v : y) {
    blocks.push_back({v, 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].mean() < blocks.back().mean()) {
      const Block top = blocks.back();
      blocks.pop_back();
      blocks.back().sum += top.sum;
      blocks.back().size += top.size;
    }
  }
  std::size_t k = 0;
  for (const auto& b : blocks) {
    const double m = b.mean();
    for (std::size_t i = 0; i < b.size; ++i) y[k++] = m;
  }
}

/// Projection onto the cone where w[chain[0]] >= w[chain[1]] >= ...; indices
/// not named in `chain` are left untouched.
inline void project_chain(std::span<double> w, std::span<const std::size_t> chain) {
  std::vector<double> seq(chain.size());
  for (std::size_t i = 0; i < chain.size(); ++i) seq[i] = w[chain[i]];
  isotonic_nonincreasing(seq);
  for (std::size_t i = 0; i < chain.size(); ++i) w[chain[i]] = seq[i];
}

}  // namespace aqi
