#include "swformer/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace swformer {

Tensor finite_difference_gradient(const std::function<double()>& f, Tensor& x, double h) {
  auto values = x.mutable_values();
  std::vector<double> grad(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + h;
    const double up = f();
    values[i] = saved - h;
    const double down = f();
    values[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return Tensor(x.shape(), std::move(grad));
}

double relative_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace swformer
