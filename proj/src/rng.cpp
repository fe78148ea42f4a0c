#include "tsgan/rng.hpp"

#include <numeric>

#include "tsgan/common.hpp"

namespace tsgan {

std::vector<std::size_t> Rng::sample_indices(std::size_t n, std::size_t k) {
  if (k > n) throw ValueError("sample_indices: k=" + std::to_string(k) + " exceeds n=" + std::to_string(n));
  // Partial Fisher-Yates over an index table.
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + index(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

}  // namespace tsgan
