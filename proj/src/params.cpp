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

#include "molct/params.hpp"

#include <cmath>

#include "molct/errors.hpp"

namespace molct {

ParamId ParameterStore::add(const std::string& name, ad::Tensor value) {
  names_.push_back(name);
  grads_.emplace_back(value.rows(), value.cols());
  values_.push_back(std::move(value));
  return static_cast<ParamId>(values_.size() - 1);
}

ParamId ParameterStore::add_xavier(const std::string& name, std::size_t rows,
                                   std::size_t cols, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  ad::Tensor t(rows, cols);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-a, a);
  return add(name, std::move(t));
}

ParamId ParameterStore::add_zeros(const std::string& name, std::size_t rows,
                                  std::size_t cols) {
  return add(name, ad::Tensor(rows, cols));
}

ParamId ParameterStore::add_normal(const std::string& name, std::size_t rows,
                                   std::size_t cols, double stddev, Rng& rng) {
  ad::Tensor t(rows, cols);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal(0.0, stddev);
  return add(name, std::move(t));
}

ParamId ParameterStore::find(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return static_cast<ParamId>(i);
  return -1;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

std::size_t ParameterStore::scalar_count_prefix(
    const std::string& prefix) const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i].rfind(prefix, 0) == 0) n += values_[i].size();
  return n;
}

void ParameterStore::zero_grads() {
  for (auto& g : grads_) g.fill(0.0);
}

void ParameterStore::scale_grads(double inv_n) {
  for (auto& g : grads_) g.scale_inplace(inv_n);
}

void ParameterStore::adam_init(ad::AdamHyper hp) {
  std::vector<const ad::Tensor*> ptrs;
  for (const auto& v : values_) ptrs.push_back(&v);
  adam_.init(ptrs, hp);
}

void ParameterStore::adam_update() {
  std::vector<ad::Tensor*> ps;
  std::vector<const ad::Tensor*> gs;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    ps.push_back(&values_[i]);
    gs.push_back(&grads_[i]);
  }
  ad::adam_step(ps, gs, names_, adam_);
}

void ParameterStore::harvest_grads(const ad::Graph& g,
                                   const std::vector<ad::NodeId>& grad,
                                   std::vector<ad::Tensor>& out) const {
  for (std::size_t id = 0; id < grad.size(); ++id) {
    if (grad[id] == ad::kNoNode) continue;
    const auto& node = g.node(static_cast<ad::NodeId>(id));
    if (node.op != ad::Op::leaf || node.param_id < 0) continue;
    out[node.param_id].add_inplace(g.value(grad[id]));
  }
}

std::vector<ad::Tensor> ParameterStore::make_grad_buffers() const {
  std::vector<ad::Tensor> out;
  out.reserve(values_.size());
  for (const auto& v : values_) out.emplace_back(v.rows(), v.cols());
  return out;
}

void ParameterStore::accumulate(const std::vector<ad::Tensor>& sample_grads) {
  for (std::size_t i = 0; i < grads_.size(); ++i)
    grads_[i].add_inplace(sample_grads[i]);
}

}  // namespace molct

