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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "molct/adam.hpp"
#include "molct/attention.hpp"
#include "molct/errors.hpp"
#include "molct/rng.hpp"

using namespace molct;
using ad::Graph;
using ad::NodeId;
using ad::Tensor;

namespace {

Tensor rand_tensor(Rng& rng, std::size_t r, std::size_t c) {
  Tensor t(r, c);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
  return t;
}

}  // namespace

TEST_CASE("single-row attention returns the value row times its decay") {
  Graph g;
  NodeId q = g.constant(Tensor::from(1, 3, {0.2, -0.1, 0.5}));
  NodeId k = g.constant(Tensor::from(1, 3, {1.0, 2.0, 3.0}));
  NodeId v = g.constant(Tensor::from(1, 3, {7.0, -2.0, 0.25}));
  AttnMaskSpec mask;
  mask.allowed = {true};
  mask.decay = g.constant(Tensor::scalar(0.6));
  AttnOut out = dot_attention(g, q, k, v, mask);
  CHECK(g.value(out.alpha)[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(g.value(out.out)[0] == doctest::Approx(0.6 * 7.0));
  CHECK(g.value(out.out)[2] == doctest::Approx(0.6 * 0.25));
}

TEST_CASE("identical keys give uniform coefficients") {
  Graph g;
  NodeId q = g.constant(Tensor::from(1, 2, {1.0, -1.0}));
  NodeId k = g.constant(Tensor::full(4, 2, 0.3));
  Rng rng(1);
  NodeId v = g.constant(rand_tensor(rng, 4, 2));
  AttnOut out = dot_attention(g, q, k, v, {});
  for (std::size_t j = 0; j < 4; ++j)
    CHECK(g.value(out.alpha)[j] == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("two-row case matches a hand softmax") {
  // Q = [1,0], K = I, V = I, width 2: logits = [1/sqrt(2), 0].
  Graph g;
  NodeId q = g.constant(Tensor::from(1, 2, {1.0, 0.0}));
  NodeId k = g.constant(Tensor::identity(2));
  NodeId v = g.constant(Tensor::identity(2));
  AttnOut out = dot_attention(g, q, k, v, {});
  const double l0 = 1.0 / std::sqrt(2.0);
  const double a0 = std::exp(l0) / (std::exp(l0) + 1.0);
  CHECK(g.value(out.alpha)[0] == doctest::Approx(a0).epsilon(1e-14));
  CHECK(g.value(out.alpha)[1] == doctest::Approx(1.0 - a0).epsilon(1e-14));
}

TEST_CASE("coefficients sum to one over allowed rows before decay") {
  Rng rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + rng.below(6);
    Graph g;
    NodeId q = g.constant(rand_tensor(rng, 1, 4));
    NodeId k = g.constant(rand_tensor(rng, n, 4));
    NodeId v = g.constant(rand_tensor(rng, n, 4));
    AttnMaskSpec mask;
    mask.allowed.assign(n, false);
    mask.allowed[0] = true;
    for (std::size_t j = 1; j < n; ++j) mask.allowed[j] = rng.uniform() < 0.6;
    Tensor decay(n, 1);
    for (std::size_t j = 0; j < n; ++j) decay.at(j, 0) = rng.uniform();
    mask.decay = g.constant(decay);
    AttnOut out = dot_attention(g, q, k, v, mask);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double a = g.value(out.alpha_raw)[j];
      CHECK(a >= 0.0);
      CHECK(a <= 1.0);
      if (!mask.allowed[j]) CHECK(a == 0.0);
      sum += a;
    }
    CHECK(std::fabs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("masked rows contribute exactly zero") {
  Rng rng(9);
  Graph g;
  NodeId q = g.constant(rand_tensor(rng, 1, 3));
  NodeId k = g.constant(rand_tensor(rng, 3, 3));
  Tensor v1 = rand_tensor(rng, 3, 3);
  Tensor v2 = v1;
  // Arbitrary (finite) values on the masked row must not matter.
  for (std::size_t c = 0; c < 3; ++c) v2.at(1, c) = 1e18;
  AttnMaskSpec mask;
  mask.allowed = {true, false, true};
  AttnOut a = dot_attention(g, q, k, g.constant(v1), mask);
  AttnOut b = dot_attention(g, q, k, g.constant(v2), mask);
  CHECK(ad::max_abs_diff(g.value(a.out), g.value(b.out)) == 0.0);
}

TEST_CASE("all rows disallowed is a contract error") {
  Graph g;
  NodeId q = g.constant(Tensor(1, 2));
  NodeId k = g.constant(Tensor(2, 2));
  AttnMaskSpec mask;
  mask.allowed = {false, false};
  CHECK_THROWS_AS(dot_attention(g, q, k, k, mask), NumericError);
}

TEST_CASE("decay sweep is continuous and vanishes at zero") {
  Rng rng(11);
  Graph g;
  NodeId q = g.constant(rand_tensor(rng, 1, 3));
  NodeId k = g.constant(rand_tensor(rng, 4, 3));
  Tensor vbase = rand_tensor(rng, 4, 3);

  auto out_with = [&](double w, const Tensor& v) {
    Tensor decay = Tensor::full(4, 1, 1.0);
    decay.at(2, 0) = w;
    AttnMaskSpec mask;
    mask.decay = g.constant(decay);
    return g.value(dot_attention(g, q, k, g.constant(v), mask).out);
  };

  Tensor prev = out_with(1.0, vbase);
  for (double w = 0.95; w >= -1e-9; w -= 0.05) {
    Tensor cur = out_with(std::max(w, 0.0), vbase);
    CHECK(ad::max_abs_diff(prev, cur) < 0.06 * g.value(q).cols() * 10);
    prev = cur;
  }
  // At zero the swept row is inert: its values no longer matter.
  Tensor vmod = vbase;
  for (std::size_t c = 0; c < 3; ++c) vmod.at(2, c) = -999.0;
  CHECK(ad::max_abs_diff(out_with(0.0, vbase), out_with(0.0, vmod)) == 0.0);
}

TEST_CASE("mha with zero output projection returns zero") {
  Rng rng(13);
  ParameterStore store;
  MhaParams p = MhaParams::create(store, "mha", 8, 2, rng);
  store.mutable_value(p.wo).fill(0.0);
  Graph g;
  LeafMap leaf(g, store);
  NodeId q = g.constant(rand_tensor(rng, 1, 8));
  NodeId kv = g.constant(rand_tensor(rng, 3, 8));
  NodeId out = mha(g, q, kv, kv, p, leaf, {});
  CHECK(g.value(out).max_abs() == 0.0);
}

TEST_CASE("single-head mha with identity projections equals dot attention") {
  Rng rng(15);
  ParameterStore store;
  MhaParams p = MhaParams::create(store, "mha", 4, 1, rng);
  store.mutable_value(p.wq[0]) = Tensor::identity(4);
  store.mutable_value(p.wk[0]) = Tensor::identity(4);
  store.mutable_value(p.wv[0]) = Tensor::identity(4);
  store.mutable_value(p.wo) = Tensor::identity(4);
  Graph g;
  LeafMap leaf(g, store);
  NodeId q = g.constant(rand_tensor(rng, 1, 4));
  NodeId kv = g.constant(rand_tensor(rng, 5, 4));
  NodeId a = mha(g, q, kv, kv, p, leaf, {});
  AttnOut b = dot_attention(g, q, kv, kv, {});
  CHECK(ad::max_abs_diff(g.value(a), g.value(b.out)) < 1e-14);
}

TEST_CASE("eight heads produce a 1xD row") {
  Rng rng(17);
  ParameterStore store;
  MhaParams p = MhaParams::create(store, "mha", 32, 8, rng);
  Graph g;
  LeafMap leaf(g, store);
  NodeId q = g.constant(rand_tensor(rng, 1, 32));
  NodeId kv = g.constant(rand_tensor(rng, 6, 32));
  NodeId out = mha(g, q, kv, kv, p, leaf, {});
  CHECK(g.value(out).rows() == 1);
  CHECK(g.value(out).cols() == 32);
}

TEST_CASE("head count must divide the width") {
  Rng rng(19);
  ParameterStore store;
  CHECK_THROWS_AS(MhaParams::create(store, "mha", 10, 3, rng), NumericError);
}

TEST_CASE("mha is invariant under joint key/value/mask permutation") {
  Rng rng(21);
  ParameterStore store;
  MhaParams p = MhaParams::create(store, "mha", 8, 2, rng);
  const std::size_t n = 6;
  Tensor kv = rand_tensor(rng, n, 8);
  Tensor qrow = rand_tensor(rng, 1, 8);
  Tensor decay(n, 1);
  std::vector<bool> allowed(n);
  for (std::size_t j = 0; j < n; ++j) {
    decay.at(j, 0) = rng.uniform();
    allowed[j] = j == 0 || rng.uniform() < 0.7;
  }

  auto run = [&](const Tensor& kvm, const std::vector<bool>& al,
                 const Tensor& dc) {
    Graph g;
    LeafMap leaf(g, store);
    AttnMaskSpec mask;
    mask.allowed = al;
    mask.decay = g.constant(dc);
    return g.value(
        mha(g, g.constant(qrow), g.constant(kvm), g.constant(kvm), p, leaf,
            mask));
  };
  Tensor base = run(kv, allowed, decay);

  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::size_t> perm(n);
    for (std::size_t j = 0; j < n; ++j) perm[j] = j;
    rng.shuffle(perm);
    Tensor kvp(n, 8), dcp(n, 1);
    std::vector<bool> alp(n);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t c = 0; c < 8; ++c) kvp.at(perm[j], c) = kv.at(j, c);
      dcp.at(perm[j], 0) = decay.at(j, 0);
      alp[perm[j]] = allowed[j];
    }
    worst = std::max(worst, ad::max_abs_diff(base, run(kvp, alp, dcp)));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("position-wise ffn") {
  Rng rng(23);
  ParameterStore store;
  MlpParams ffn = make_position_wise_ffn(store, "ffn", 6, 12, rng);
  SUBCASE("zero weights give zero output") {
    ParameterStore zs;
    Rng r2(1);
    MlpParams zf = make_position_wise_ffn(zs, "ffn", 6, 12, r2);
    for (ParamId p = 0; p < static_cast<ParamId>(zs.count()); ++p)
      zs.mutable_value(p).fill(0.0);
    Graph g;
    LeafMap leaf(g, zs);
    NodeId out = position_wise_ffn(g, g.constant(rand_tensor(rng, 3, 6)), zf,
                                   leaf);
    CHECK(g.value(out).max_abs() == 0.0);
  }
  SUBCASE("equal rows map to equal rows") {
    Graph g;
    LeafMap leaf(g, store);
    Tensor x(2, 6);
    for (std::size_t c = 0; c < 6; ++c)
      x.at(0, c) = x.at(1, c) = rng.normal();
    NodeId out = position_wise_ffn(g, g.constant(x), ffn, leaf);
    for (std::size_t c = 0; c < 6; ++c)
      CHECK(g.value(out).at(0, c) == g.value(out).at(1, c));
  }
  SUBCASE("gradient matches finite differences") {
    Tensor x = rand_tensor(rng, 1, 6);
    Tensor probe = rand_tensor(rng, 1, 6);
    Graph g;
    LeafMap leaf(g, store);
    NodeId xl = g.leaf(x);
    NodeId out = g.sum_all(
        g.mul(position_wise_ffn(g, xl, ffn, leaf), g.constant(probe)));
    auto grads = g.backward(out);
    Tensor analytic = g.value(grads[xl]);
    Tensor numeric = ad::finite_diff_grad(
        [&](const Tensor& xt) {
          Graph h;
          LeafMap lf(h, store);
          return h.value(h.sum_all(h.mul(
              position_wise_ffn(h, h.constant(xt), ffn, lf),
              h.constant(probe))))[0];
        },
        x, 1e-5);
    CHECK(ad::max_rel_err(analytic, numeric) < 1e-5);
  }
}
