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

#ifndef MOLCT_ADAM_HPP
#define MOLCT_ADAM_HPP

#include <functional>
#include <string>
#include <vector>

#include "molct/tensor.hpp"

namespace molct::ad {

struct AdamHyper {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Moment buffers for a fixed list of parameters; shapes are pinned at init.
struct AdamState {
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  long step_count = 0;
  AdamHyper hp;

  void init(const std::vector<const Tensor*>& params, AdamHyper h);
};

// One bias-corrected Adam update over all parameters. A non-finite gradient
// rejects the whole step and reports the offending parameter by name.
void adam_step(const std::vector<Tensor*>& params,
               const std::vector<const Tensor*>& grads,
               const std::vector<std::string>& names, AdamState& state);

// Central finite differences (f(x+h) - f(x-h)) / 2h, componentwise.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f,
                        const Tensor& x, double step);

// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor); the comparison metric used by
// every gradient check in the test suites.
double max_rel_err(const Tensor& a, const Tensor& b, double floor = 1e-6);

}  // namespace molct::ad

#endif  // MOLCT_ADAM_HPP
