#include "swformer/sparse_bev.hpp"

#include <algorithm>

#include "swformer/error.hpp"

namespace swformer {

std::optional<std::size_t> SparseBEV::find(Coord c) const {
  auto it = std::lower_bound(coords.begin(), coords.end(), c);
  if (it == coords.end() || *it != c) return std::nullopt;
  return static_cast<std::size_t>(it - coords.begin());
}

void SparseBEV::validate() const {
  if (features.rank() != 2 || features.dim(0) != coords.size()) {
    throw ContractError("sparse BEV has " + std::to_string(coords.size()) + " coordinates but features " +
                        shape_str(features.shape()));
  }
  for (std::size_t i = 0; i < coords.size(); ++i) {
    if (!grid.contains(coords[i])) throw ContractError("sparse BEV coordinate outside grid");
    if (i > 0 && !(coords[i - 1] < coords[i])) throw ContractError("sparse BEV coordinates not sorted/unique");
  }
  if (stride < 1) throw ContractError("sparse BEV stride must be positive");
}

}  // namespace swformer
