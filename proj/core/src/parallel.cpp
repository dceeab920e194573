#include "mpmorph/parallel.hpp"

#include <algorithm>
#include <cmath>

#include <omp.h>

namespace mpmorph {

void set_num_threads(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

int num_threads() { return omp_get_max_threads(); }

template <int Dim>
void ParticleBinning<Dim>::build(const VecField<Dim>& x, double dx, int res) {
  const int blocks_per_axis = (res + kBlock - 1) / kBlock;
  std::size_t block_count = 1;
  for (int a = 0; a < Dim; ++a) block_count *= static_cast<std::size_t>(blocks_per_axis);

  const std::size_t n = x.size();
  std::vector<int> block_of(n);
  for (std::size_t p = 0; p < n; ++p) {
    int id = 0;
    for (int a = 0; a < Dim; ++a) {
      const int base = static_cast<int>(std::floor(x[p][a] / dx)) - 1;
      const int b = std::clamp(base, 0, res - 1) / kBlock;
      id = id * blocks_per_axis + b;
    }
    block_of[p] = id;
  }

  // Stable counting sort keeps ascending particle index inside each block.
  block_start_.assign(block_count + 1, 0);
  for (int b : block_of) ++block_start_[static_cast<std::size_t>(b) + 1];
  for (std::size_t b = 0; b < block_count; ++b) block_start_[b + 1] += block_start_[b];
  order_.resize(n);
  std::vector<std::size_t> cursor(block_start_.begin(), block_start_.end() - 1);
  for (std::size_t p = 0; p < n; ++p) order_[cursor[block_of[p]]++] = p;

  color_blocks_.assign(kColors, {});
  for (std::size_t b = 0; b < block_count; ++b) {
    if (block_start_[b] == block_start_[b + 1]) continue;
    int color = 0;
    std::size_t rem = b;
    for (int a = Dim - 1; a >= 0; --a) {
      const int coord = static_cast<int>(rem % static_cast<std::size_t>(blocks_per_axis));
      rem /= static_cast<std::size_t>(blocks_per_axis);
      color |= (coord & 1) << a;
    }
    color_blocks_[color].push_back(static_cast<int>(b));
  }
}

template <int Dim>
void ParticleBinning<Dim>::for_each_colored(const std::function<void(std::size_t)>& fn) const {
  for (const auto& blocks : color_blocks_) {
    const int count = static_cast<int>(blocks.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (int k = 0; k < count; ++k) {
      const std::size_t b = static_cast<std::size_t>(blocks[k]);
      for (std::size_t q = block_start_[b]; q < block_start_[b + 1]; ++q) fn(order_[q]);
    }
  }
}

double deterministic_sum(std::size_t n, const std::function<double(std::size_t)>& f) {
  constexpr std::size_t kChunk = 1024;
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  std::vector<double> partial(chunks, 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
    const std::size_t lo = static_cast<std::size_t>(c) * kChunk;
    const std::size_t hi = std::min(n, lo + kChunk);
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += f(i);
    partial[static_cast<std::size_t>(c)] = s;
  }
  double total = 0.0;
  for (double s : partial) total += s;
  return total;
}

template class ParticleBinning<2>;
template class ParticleBinning<3>;

}  // namespace mpmorph
