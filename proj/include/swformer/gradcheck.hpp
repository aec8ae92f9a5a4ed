#pragma once

#include <functional>

#include "swformer/tensor.hpp"

namespace swformer {

// Central differences of a scalar function with respect to every element of
// the leaf `x`, which is perturbed in place and restored.
Tensor finite_difference_gradient(const std::function<double()>& f, Tensor& x, double h = 1e-6);

// |a - b| / max(|a|, |b|, floor)
double relative_error(double a, double b, double floor = 1e-8);

}  // namespace swformer
