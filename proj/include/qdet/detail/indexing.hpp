#pragma once

// Internal index arithmetic for composite-space operations. Factor 0 is the
// most significant digit of the linear index (Kronecker convention).

#include <algorithm>
#include <string>
#include <vector>

#include "qdet/errors.hpp"
#include "qdet/hilbert.hpp"

namespace qdet::detail {

// Linear offsets of every combination of the given factor positions, in the
// order the positions are listed (first position = most significant digit).
inline std::vector<int> combination_offsets(const SpaceLayout& layout,
                                            const std::vector<int>& positions) {
  std::vector<int> offsets{0};
  for (int pos : positions) {
    const int d = layout.factor(pos).dim;
    const int stride = layout.stride(pos);
    std::vector<int> next;
    next.reserve(offsets.size() * d);
    for (int base : offsets)
      for (int k = 0; k < d; ++k) next.push_back(base + k * stride);
    offsets = std::move(next);
  }
  return offsets;
}

inline std::vector<int> positions_of(const SpaceLayout& layout,
                                     const std::vector<std::string>& labels) {
  std::vector<int> pos;
  pos.reserve(labels.size());
  for (const auto& l : labels) pos.push_back(layout.index_of(l));
  return pos;
}

inline std::vector<int> complement_positions(const SpaceLayout& layout,
                                             const std::vector<int>& positions) {
  std::vector<bool> taken(layout.factor_count(), false);
  for (int p : positions) {
    if (taken[p]) throw ValidationError("duplicate factor label in target list");
    taken[p] = true;
  }
  std::vector<int> rest;
  for (int i = 0; i < layout.factor_count(); ++i)
    if (!taken[i]) rest.push_back(i);
  return rest;
}

}  // namespace qdet::detail
