// Copyright 2026 The molct Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "molct/adam.hpp"

#include <cmath>

#include "molct/errors.hpp"

namespace molct::ad {

void AdamState::init(const std::vector<const Tensor*>& params, AdamHyper h) {
  hp = h;
  step_count = 0;
  first_moment.clear();
  second_moment.clear();
  for (const Tensor* p : params) {
    first_moment.emplace_back(p->rows(), p->cols());
    second_moment.emplace_back(p->rows(), p->cols());
  }
}

void adam_step(const std::vector<Tensor*>& params,
               const std::vector<const Tensor*>& grads,
               const std::vector<std::string>& names, AdamState& state) {
  if (params.size() != grads.size() ||
      params.size() != state.first_moment.size())
    throw NumericError("adam_step: parameter/gradient count mismatch");
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!params[p]->same_shape(*grads[p]))
      throw NumericError("adam_step: shape mismatch for parameter " +
                         (p < names.size() ? names[p] : std::to_string(p)));
    if (!grads[p]->all_finite())
      throw NumericError(
          "adam_step: non-finite gradient for parameter " +
          (p < names.size() ? names[p] : std::to_string(p)) +
          "; step rejected");
  }
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(state.hp.beta1, t);
  const double bc2 = 1.0 - std::pow(state.hp.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& w = *params[p];
    const Tensor& g = *grads[p];
    Tensor& m = state.first_moment[p];
    Tensor& v = state.second_moment[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = state.hp.beta1 * m[i] + (1.0 - state.hp.beta1) * g[i];
      v[i] = state.hp.beta2 * v[i] + (1.0 - state.hp.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= state.hp.lr * mhat / (std::sqrt(vhat) + state.hp.epsilon);
    }
  }
}

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f,
                        const Tensor& x, double step) {
  Tensor g(x.rows(), x.cols());
  Tensor xp = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = xp[i];
    xp[i] = orig + step;
    const double fp = f(xp);
    xp[i] = orig - step;
    const double fm = f(xp);
    xp[i] = orig;
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

double max_rel_err(const Tensor& a, const Tensor& b, double floor) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom =
        std::max(std::max(std::fabs(a[i]), std::fabs(b[i])), floor);
    worst = std::max(worst, std::fabs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace molct::ad
