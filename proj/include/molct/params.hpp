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

#ifndef MOLCT_PARAMS_HPP
#define MOLCT_PARAMS_HPP

#include <string>
#include <vector>

#include "molct/adam.hpp"
#include "molct/graph.hpp"
#include "molct/rng.hpp"
#include "molct/tensor.hpp"

namespace molct {

using ParamId = int;

// All trainable tensors of a model, addressed by stable integer handles and
// dotted names (e.g. "niu0.ea.mha.wq0"). Gradient slots live here; the
// optimizer is the only writer of values between batches.
class ParameterStore {
 public:
  ParamId add(const std::string& name, ad::Tensor value);

  // Initializers used at model build time.
  ParamId add_xavier(const std::string& name, std::size_t rows,
                     std::size_t cols, Rng& rng);
  ParamId add_zeros(const std::string& name, std::size_t rows,
                    std::size_t cols);
  ParamId add_normal(const std::string& name, std::size_t rows,
                     std::size_t cols, double stddev, Rng& rng);

  std::size_t count() const { return values_.size(); }
  const std::string& name(ParamId id) const { return names_[id]; }
  const ad::Tensor& value(ParamId id) const { return values_[id]; }
  ad::Tensor& mutable_value(ParamId id) { return values_[id]; }
  ad::Tensor& grad(ParamId id) { return grads_[id]; }
  const ad::Tensor& grad(ParamId id) const { return grads_[id]; }
  ParamId find(const std::string& name) const;  // -1 when absent

  std::size_t scalar_count() const;
  std::size_t scalar_count_prefix(const std::string& prefix) const;

  void zero_grads();
  // Divides every gradient slot by n (batch averaging).
  void scale_grads(double inv_n);

  void adam_init(ad::AdamHyper hp);
  void adam_update();  // consumes grad slots
  long adam_steps() const { return adam_.step_count; }

  // Graph hookup: makes a leaf carrying the current value, tagged with the
  // parameter id so harvest_grads() can route gradients back.
  ad::NodeId make_leaf(ad::Graph& g, ParamId id) const {
    return g.leaf(values_[id], id);
  }
  // Reads gradient nodes produced by Graph::backward into local buffers
  // (grads_-shaped); used per-sample, then accumulated by the caller.
  void harvest_grads(const ad::Graph& g, const std::vector<ad::NodeId>& grad,
                     std::vector<ad::Tensor>& out) const;
  std::vector<ad::Tensor> make_grad_buffers() const;
  void accumulate(const std::vector<ad::Tensor>& sample_grads);

 private:
  std::vector<std::string> names_;
  std::vector<ad::Tensor> values_;
  std::vector<ad::Tensor> grads_;
  ad::AdamState adam_;
};

}  // namespace molct

#endif  // MOLCT_PARAMS_HPP
