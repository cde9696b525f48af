#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "specmesh/autodiff/diff_op.hpp"
#include "specmesh/core/error.hpp"
#include "specmesh/core/rng.hpp"

namespace specmesh {

struct GradCheckOptions {
  double eps = 1e-5;
  bool check_input = true;
  bool check_params = true;
  std::size_t max_coords_per_tensor = 0;  // 0 checks every coordinate
  std::uint64_t seed = 0x5eed;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t excluded = 0;  // coordinates whose perturbation crossed a declared kink
  std::string worst;         // "<tensor>[<index>]"
};

/// Compares analytic gradients of <r, op(x)> for a random projection r with
/// central differences, over the input and every parameter of op. Relative
/// error uses the denominator max(|analytic|, |numeric|, 1e-8).
inline GradCheckResult finite_difference_check(DiffOp<double>& op, Tensor<double> x,
                                               const GradCheckOptions& opt = {}) {
  Rng rng(opt.seed);
  const Tensor<double> y0 = op.forward(x);
  if (!y0.all_finite()) throw NumericError(op.name() + ": non-finite forward output in gradient check");
  const std::uint64_t sig0 = op.kink_signature();

  Tensor<double> r(y0.shape());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = rng.uniform(-1.0, 1.0);

  const auto params = op.parameters();
  for (auto* p : params) p->grad.fill(0.0);
  const Tensor<double> gx = op.backward(r);

  // Snapshot BN running statistics so repeated forwards leave no trace.
  std::vector<Tensor<double>> saved;
  for (auto* p : params) saved.push_back(p->value);
  auto restore_buffers = [&] {
    for (std::size_t i = 0; i < params.size(); ++i)
      if (!params[i]->trainable) params[i]->value = saved[i];
  };
  restore_buffers();

  auto projected = [&](std::uint64_t& sig) {
    const Tensor<double> y = op.forward(x);
    if (!y.all_finite()) throw NumericError(op.name() + ": non-finite forward output in gradient check");
    sig = op.kink_signature();
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += r[i] * y[i];
    restore_buffers();
    return s;
  };

  GradCheckResult res;
  auto check_tensor = [&](const std::string& label, Tensor<double>& target, const Tensor<double>& analytic) {
    std::vector<std::size_t> coords(target.size());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    if (opt.max_coords_per_tensor > 0 && coords.size() > opt.max_coords_per_tensor) {
      auto perm = rng.permutation(coords.size());
      perm.resize(opt.max_coords_per_tensor);
      std::sort(perm.begin(), perm.end());
      coords = std::move(perm);
    }
    for (std::size_t i : coords) {
      const double orig = target[i];
      std::uint64_t sp = 0, sm = 0;
      target[i] = orig + opt.eps;
      const double fp = projected(sp);
      target[i] = orig - opt.eps;
      const double fm = projected(sm);
      target[i] = orig;
      if (sp != sig0 || sm != sig0) {
        ++res.excluded;
        continue;
      }
      const double numeric = (fp - fm) / (2.0 * opt.eps);
      const double a = analytic[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      ++res.checked;
      if (rel > res.max_rel_error || res.worst.empty()) {
        res.max_rel_error = rel;
        res.worst = label + "[" + std::to_string(i) + "]";
      }
    }
  };

  if (opt.check_input) check_tensor("input", x, gx);
  if (opt.check_params)
    for (auto* p : params)
      if (p->trainable) {
        const Tensor<double> analytic = p->grad;
        check_tensor(p->name, p->value, analytic);
      }
  // Leave the op consumable again and gradients clean.
  for (auto* p : params) p->grad.fill(0.0);
  return res;
}

}  // namespace specmesh
