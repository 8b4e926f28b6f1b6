#include "exattn/numerics/gradcheck.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "exattn/errors.hpp"

namespace exattn::num {
namespace {

double evaluate(const std::function<Var()>& build) {
  NoGradGuard guard;
  return build().item();
}

}  // namespace

GradCheckResult finite_difference_check(const std::function<Var()>& build, std::span<Parameter* const> params,
                                        double h) {
  if (!(h > 0.0) || h > 1e-2) throw std::invalid_argument("finite_difference_check: h must lie in (0, 1e-2]");

  for (Parameter* p : params) p->zero_grad();
  const Var loss = build();
  const double first = loss.item();
  if (evaluate(build) != first) throw FailedCheck("finite_difference_check: loss builder is not deterministic");
  backward(loss);

  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params) analytic.push_back(p->gradient());

  GradCheckResult result;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto values = params[k]->value().values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = evaluate(build);
      values[i] = saved - h;
      const double down = evaluate(build);
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[k][i];
      const double rel = std::abs(a - numeric) / (std::abs(a) + 1e-8);
      ++result.coordinates;
      if (rel > result.max_relative_error || !std::isfinite(rel)) {
        result.max_relative_error = rel;
        result.worst_parameter = params[k]->name();
        result.worst_index = i;
      }
    }
  }
  for (Parameter* p : params) p->zero_grad();
  return result;
}

}  // namespace exattn::num
