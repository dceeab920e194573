#pragma once

#include <vector>

#include "mpmorph/types.hpp"

namespace mpmorph {

/// One persisted animation frame: positions and a [0, 1] loss channel.
template <int Dim>
struct FrameRecord {
  int index = 0;
  VecField<Dim> positions;
  std::vector<double> loss;
};

}  // namespace mpmorph
