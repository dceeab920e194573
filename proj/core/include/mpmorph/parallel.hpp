#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "mpmorph/types.hpp"

namespace mpmorph {

/// Sets the OpenMP thread count used by every parallel loop (<= 0 keeps the
/// runtime default).
void set_num_threads(int threads);
int num_threads();

/// Groups particles into blocks of 4 nodes per axis and colours the blocks by
/// coordinate parity. Blocks of one colour never touch a common node, so a
/// colour can be scattered in parallel without atomics, and the order in
/// which any node receives contributions is independent of the thread count.
template <int Dim>
class ParticleBinning {
 public:
  static constexpr int kBlock = 4;
  static constexpr int kColors = 1 << Dim;

  void build(const VecField<Dim>& x, double dx, int res);

  /// Calls fn(p) for every particle. Within one colour, blocks run in
  /// parallel; particles of a block run in ascending index order.
  void for_each_colored(const std::function<void(std::size_t)>& fn) const;

  std::size_t particle_count() const { return order_.size(); }

 private:
  std::vector<std::size_t> order_;         // particle indices sorted by block
  std::vector<std::size_t> block_start_;   // CSR offsets into order_
  std::vector<std::vector<int>> color_blocks_;
};

/// Sum of f(i) for i in [0, n) accumulated in fixed-size chunks whose partial
/// sums are combined in chunk order. Same bits at any thread count.
double deterministic_sum(std::size_t n, const std::function<double(std::size_t)>& f);

}  // namespace mpmorph
