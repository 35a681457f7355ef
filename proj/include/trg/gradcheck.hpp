#pragma once

#include <functional>
#include <vector>

#include "trg/tensor.hpp"

namespace trg {

/// Max over elements of |analytic - central difference| / max(1, |analytic|) for the
/// gradient of scalar f at x. f must be deterministic.
double finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                         double eps = 1e-5);

/// Same measure over every element of every parameter in `params`; the parameters are
/// perturbed in place and restored. Existing gradients on them are cleared.
double finite_diff_check(const std::function<Tensor()>& f, const std::vector<Tensor>& params,
                         double eps = 1e-5);

}  // namespace trg
