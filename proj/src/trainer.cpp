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

#include "molct/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "molct/errors.hpp"

namespace molct {

namespace fs = std::filesystem;
using ad::Graph;
using ad::NodeId;
using ad::Tensor;

namespace {

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw UsageError("config: bad boolean value '" + v + "'");
}

double parse_double(const std::string& v) {
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw UsageError("config: bad numeric value '" + v + "'");
  }
}

std::size_t parse_size(const std::string& v) {
  const double d = parse_double(v);
  if (d < 0 || d != std::floor(d))
    throw UsageError("config: expected non-negative integer, got '" + v + "'");
  return static_cast<std::size_t>(d);
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}
std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "data") data = value;
  else if (key == "bonds") bonds = value;
  else if (key == "out_dir") out_dir = value;
  else if (key == "seeds") {
    seeds.clear();
    std::stringstream ss(value);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      tok = trim(tok);
      if (!tok.empty()) seeds.push_back(parse_size(tok));
    }
    if (seeds.empty()) throw UsageError("config: seeds list is empty");
  }
  else if (key == "split_seed") split_seed = parse_size(value);
  else if (key == "n_train") n_train = parse_size(value);
  else if (key == "n_val") n_val = parse_size(value);
  else if (key == "node_dim") node_dim = parse_size(value);
  else if (key == "edge_dim") edge_dim = parse_size(value);
  else if (key == "heads") heads = parse_size(value);
  else if (key == "rme_blocks") rme_blocks = parse_size(value);
  else if (key == "operator") op = value;
  else if (key == "blocks") blocks = parse_size(value);
  else if (key == "iterations") iterations = static_cast<int>(parse_size(value));
  else if (key == "use_ffn") use_ffn = parse_bool(value);
  else if (key == "ffn_hidden") ffn_hidden = parse_size(value);
  else if (key == "cfc_filters") cfc_filters = parse_size(value);
  else if (key == "ponder_hidden") ponder_hidden = parse_size(value);
  else if (key == "halt_epsilon") halt_epsilon = parse_double(value);
  else if (key == "ponder_weight") ponder_weight = parse_double(value);
  else if (key == "lambda") lambda = parse_double(value);
  else if (key == "r_min") r_min = parse_double(value);
  else if (key == "r_cut") r_cut = parse_double(value);
  else if (key == "sigma") sigma = parse_double(value);
  else if (key == "featurization") featurization = value;
  else if (key == "species_vocab") species_vocab = parse_size(value);
  else if (key == "relation_vocab") relation_vocab = parse_size(value);
  else if (key == "artificial_species") artificial_species = parse_bool(value);
  else if (key == "lr") lr = parse_double(value);
  else if (key == "beta1") beta1 = parse_double(value);
  else if (key == "beta2") beta2 = parse_double(value);
  else if (key == "epsilon") epsilon = parse_double(value);
  else if (key == "batch_size") batch_size = parse_size(value);
  else if (key == "steps") steps = parse_size(value);
  else if (key == "val_every") val_every = parse_size(value);
  else if (key == "threads") threads = parse_size(value);
  else throw UsageError("config: unknown key '" + key + "'");
}

void RunConfig::validate() const {
  if (op != "ea" && op != "cfc" && op != "niu")
    throw UsageError("config: operator must be ea, cfc or niu");
  if (featurization != "logr" && featurization != "r")
    throw UsageError("config: featurization must be logr or r");
  if (lambda < 0.0 || lambda > 1.0)
    throw UsageError("config: lambda must lie in [0, 1]");
  if (halt_epsilon <= 0.0 || halt_epsilon >= 0.5)
    throw UsageError("config: halt_epsilon must lie in (0, 0.5)");
  if (iterations < 1) throw UsageError("config: iterations must be >= 1");
  if (blocks < 1) throw UsageError("config: blocks must be >= 1");
  if (batch_size < 1) throw UsageError("config: batch_size must be >= 1");
  if (val_every < 1) throw UsageError("config: val_every must be >= 1");
  if (heads < 1 || node_dim % heads != 0)
    throw UsageError("config: node_dim must be divisible by heads");
  featurizer().validate();
}

FeaturizerConfig RunConfig::featurizer() const {
  FeaturizerConfig f;
  f.edge_dim = edge_dim;
  f.r_min = r_min;
  f.r_cut = r_cut;
  f.sigma = sigma;
  f.log_scale = featurization == "logr";
  f.node_dim = node_dim;
  f.species_vocab = species_vocab;
  f.relation_vocab = relation_vocab;
  return f;
}

std::size_t RunConfig::effective_threads() const {
  if (threads > 0) return threads;
  if (const char* env = std::getenv("MOLCT_THREADS")) {
    const long v = std::atol(env);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

RunConfig parse_config_string(const std::string& text,
                              const std::string& origin) {
  RunConfig cfg;
  std::stringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError(origin + ":" + std::to_string(lineno) +
                       ": expected key = value");
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_string(ss.str(), path);
}

std::string config_to_string(const RunConfig& c) {
  std::ostringstream o;
  o << "data = " << c.data << "\n";
  o << "bonds = " << c.bonds << "\n";
  o << "out_dir = " << c.out_dir << "\n";
  o << "seeds = ";
  for (std::size_t i = 0; i < c.seeds.size(); ++i)
    o << (i ? "," : "") << c.seeds[i];
  o << "\n";
  o << "split_seed = " << c.split_seed << "\n";
  o << "n_train = " << c.n_train << "\n";
  o << "n_val = " << c.n_val << "\n";
  o << "node_dim = " << c.node_dim << "\n";
  o << "edge_dim = " << c.edge_dim << "\n";
  o << "heads = " << c.heads << "\n";
  o << "rme_blocks = " << c.rme_blocks << "\n";
  o << "operator = " << c.op << "\n";
  o << "blocks = " << c.blocks << "\n";
  o << "iterations = " << c.iterations << "\n";
  o << "use_ffn = " << (c.use_ffn ? "true" : "false") << "\n";
  o << "ffn_hidden = " << c.ffn_hidden << "\n";
  o << "cfc_filters = " << c.cfc_filters << "\n";
  o << "ponder_hidden = " << c.ponder_hidden << "\n";
  o << "halt_epsilon = " << fmt17(c.halt_epsilon) << "\n";
  o << "ponder_weight = " << fmt17(c.ponder_weight) << "\n";
  o << "lambda = " << fmt17(c.lambda) << "\n";
  o << "r_min = " << fmt17(c.r_min) << "\n";
  o << "r_cut = " << fmt17(c.r_cut) << "\n";
  o << "sigma = " << fmt17(c.sigma) << "\n";
  o << "featurization = " << c.featurization << "\n";
  o << "species_vocab = " << c.species_vocab << "\n";
  o << "relation_vocab = " << c.relation_vocab << "\n";
  o << "artificial_species = " << (c.artificial_species ? "true" : "false")
    << "\n";
  o << "lr = " << fmt17(c.lr) << "\n";
  o << "beta1 = " << fmt17(c.beta1) << "\n";
  o << "beta2 = " << fmt17(c.beta2) << "\n";
  o << "epsilon = " << fmt17(c.epsilon) << "\n";
  o << "batch_size = " << c.batch_size << "\n";
  o << "steps = " << c.steps << "\n";
  o << "val_every = " << c.val_every << "\n";
  o << "threads = " << c.threads << "\n";
  return o.str();
}

BuiltModel build_model(const RunConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  BuiltModel bm;
  bm.config = cfg;
  Rng rng(seed);
  MolCtModel& m = bm.model;
  ParameterStore& store = bm.store;

  const std::size_t D = cfg.node_dim;
  const std::size_t d = cfg.edge_dim;
  const std::size_t ffn_hidden = cfg.ffn_hidden ? cfg.ffn_hidden : 2 * D;
  const std::size_t filters = cfg.cfc_filters ? cfg.cfc_filters : 2 * D;
  const std::size_t ponder_hidden =
      cfg.ponder_hidden ? cfg.ponder_hidden
                        : std::max<std::size_t>(2, D / 8);

  m.fcfg = cfg.featurizer();
  m.heads = cfg.heads;
  m.iterations = cfg.iterations;
  m.halt_epsilon = cfg.halt_epsilon;
  m.ponder_cost_weight = cfg.ponder_weight;
  m.artificial_species = cfg.artificial_species;

  m.species_table =
      store.add_normal("embed.species", cfg.species_vocab, D, 0.1, rng);
  m.relation_table =
      store.add_normal("embed.relations", cfg.relation_vocab, d, 0.1, rng);

  for (std::size_t b = 0; b < cfg.rme_blocks; ++b)
    m.rme.push_back(RmeBlockParams::create(store, "rme" + std::to_string(b),
                                           D, d, cfg.heads, ffn_hidden, rng));

  if (cfg.op == "ea") {
    m.op = OperatorKind::ea;
    for (std::size_t b = 0; b < cfg.blocks; ++b)
      m.ea_blocks.push_back(EaParams::create(store, "ea" + std::to_string(b),
                                             D, d, cfg.heads, cfg.use_ffn,
                                             ffn_hidden, rng));
  } else if (cfg.op == "cfc") {
    m.op = OperatorKind::cfc;
    for (std::size_t b = 0; b < cfg.blocks; ++b)
      m.cfc_blocks.push_back(CfcParams::create(store, "cfc" + std::to_string(b),
                                               D, d, filters, ffn_hidden, rng));
  } else {
    m.op = OperatorKind::niu;
    for (std::size_t b = 0; b < cfg.blocks; ++b)
      m.nius.push_back(NiuParams::create(store, "niu" + std::to_string(b), D,
                                         d, cfg.heads, cfg.use_ffn, ffn_hidden,
                                         ponder_hidden, rng));
  }
  m.readout = ReadoutParams::create(store, "readout", D, d, rng);
  return bm;
}

namespace {

// Per-sample forward + loss (+ gradients). Labels enter in standardized
// units; reported errors are converted back to dataset units.
struct SampleEval {
  double loss = 0.0;
  double e_abs_err = 0.0;       // dataset units
  double f_abs_err_sum = 0.0;   // dataset units, summed over components
  double f_sq_err_sum = 0.0;    // standardized units, summed over components
  std::size_t f_comps = 0;
  double ponder = 0.0;
  double e_pred = 0.0;  // dataset units
  std::vector<double> force_err_norm;  // per atom, dataset units
  std::vector<std::vector<int>> halt_steps;
  std::vector<Tensor> alpha;
  std::vector<Tensor> grads;
};

SampleEval eval_sample(const MolCtModel& model, const ParameterStore& store,
                       const LabeledSample& s, double lambda,
                       double ponder_weight, bool want_grads,
                       const ForwardOptions& opt = {}) {
  Graph g;
  g.reserve(4096);
  EnergyForcesNodes efn = build_energy_forces(g, s.graph, model, store, opt);
  const std::size_t n = s.graph.n_particles();

  const double e0_std = (s.energy - model.energy_shift) / model.scale;
  Tensor f0_std = s.forces;
  f0_std.scale_inplace(1.0 / model.scale);

  NodeId e_err = g.sub(efn.energy, g.constant(Tensor::scalar(e0_std)));
  NodeId f_err = g.sub(efn.forces, g.constant(f0_std));
  NodeId loss = g.add(g.scale(g.mul(e_err, e_err), 1.0 - lambda),
                      g.scale(g.sum_all(g.mul(f_err, f_err)), lambda));
  if (ponder_weight > 0.0 && efn.forward.ponder_cost != ad::kNoNode)
    loss = g.add(loss, g.scale(efn.forward.ponder_cost, ponder_weight));

  SampleEval ev;
  ev.loss = g.value(loss)[0];
  ev.e_abs_err = std::fabs(g.value(e_err)[0]) * model.scale;
  const Tensor& fe = g.value(f_err);
  ev.force_err_norm.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      const double d = fe.at(i, c);
      ev.f_abs_err_sum += std::fabs(d) * model.scale;
      ev.f_sq_err_sum += d * d;
      sq += d * d;
    }
    ev.force_err_norm[i] = std::sqrt(sq) * model.scale;
  }
  ev.f_comps = 3 * n;
  ev.ponder = efn.forward.mean_ponder_steps;
  ev.e_pred = g.value(efn.energy)[0] * model.scale + model.energy_shift;
  ev.halt_steps = efn.forward.halt_steps;
  ev.alpha = efn.forward.attention;

  if (want_grads) {
    auto grad = g.backward(loss);
    ev.grads = store.make_grad_buffers();
    store.harvest_grads(g, grad, ev.grads);
  }
  return ev;
}

void run_batch(const MolCtModel& model, const ParameterStore& store,
               const std::vector<LabeledSample>& data,
               const std::vector<std::size_t>& ids, double lambda,
               double ponder_weight, bool want_grads, std::size_t n_threads,
               std::vector<SampleEval>& out) {
  out.resize(ids.size());
  if (n_threads <= 1 || ids.size() <= 1) {
    for (std::size_t k = 0; k < ids.size(); ++k)
      out[k] = eval_sample(model, store, data[ids[k]], lambda, ponder_weight,
                           want_grads);
    return;
  }
  std::vector<std::thread> pool;
  std::size_t next = 0;
  std::mutex mtx;
  const std::size_t workers = std::min(n_threads, ids.size());
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&]() {
      for (;;) {
        std::size_t k;
        {
          std::lock_guard<std::mutex> lock(mtx);
          if (next >= ids.size()) return;
          k = next++;
        }
        out[k] = eval_sample(model, store, data[ids[k]], lambda, ponder_weight,
                             want_grads);
      }
    });
  for (auto& t : pool) t.join();
}

struct MetricRow {
  std::size_t step;
  std::string split;
  Metrics m;
};

void append_row(std::ofstream& csv, const MetricRow& r) {
  csv << r.step << "," << r.split << "," << fmt(r.m.loss) << ","
      << fmt(r.m.energy_mae) << "," << fmt(r.m.force_mae) << ","
      << fmt(r.m.mean_ponder) << "\n";
  csv.flush();
}

Metrics reduce_metrics(const std::vector<SampleEval>& evals) {
  Metrics m;
  double f_abs = 0.0, f_sq = 0.0;
  std::size_t f_comps = 0;
  for (const auto& e : evals) {
    m.loss += e.loss;
    m.energy_mae += e.e_abs_err;
    f_abs += e.f_abs_err_sum;
    f_sq += e.f_sq_err_sum;
    f_comps += e.f_comps;
    m.mean_ponder += e.ponder;
  }
  const double n = static_cast<double>(evals.size());
  m.loss /= n;
  m.energy_mae /= n;
  m.force_mae = f_comps ? f_abs / static_cast<double>(f_comps) : 0.0;
  m.force_mse_std = f_comps ? f_sq / static_cast<double>(f_comps) : 0.0;
  m.mean_ponder /= n;
  return m;
}

void standardize_from(const std::vector<LabeledSample>& train,
                      MolCtModel& model) {
  double e_sum = 0.0, f_sq = 0.0;
  std::size_t f_n = 0;
  for (const auto& s : train) {
    e_sum += s.energy;
    for (std::size_t i = 0; i < s.forces.size(); ++i)
      f_sq += s.forces[i] * s.forces[i];
    f_n += s.forces.size();
  }
  model.energy_shift = e_sum / static_cast<double>(train.size());
  const double rms = f_n ? std::sqrt(f_sq / static_cast<double>(f_n)) : 0.0;
  model.scale = rms > 1e-12 ? rms : 1.0;
}

void build_remap(const std::vector<LabeledSample>& train, MolCtModel& model,
                 std::size_t vocab) {
  model.species_remap.clear();
  for (const auto& s : train)
    for (std::size_t i = 0; i < s.graph.n_particles(); ++i) {
      const std::string sig = species_signature(s.graph, i);
      if (!model.species_remap.count(sig)) {
        const auto id = static_cast<std::uint32_t>(model.species_remap.size());
        if (id >= vocab)
          throw DataError("artificial species: more environments than "
                          "species_vocab rows");
        model.species_remap.emplace(sig, id);
      }
    }
}

}  // namespace

Metrics evaluate_model(const MolCtModel& model, const ParameterStore& store,
                       const std::vector<LabeledSample>& data, double lambda,
                       double ponder_weight, const std::string& pred_csv,
                       const std::string& diag_csv) {
  if (data.empty()) throw DataError("evaluate: empty dataset");
  std::vector<std::size_t> ids(data.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  const bool want_diag = !diag_csv.empty();
  std::vector<SampleEval> evals(data.size());
  if (want_diag) {
    ForwardOptions opt;
    opt.collect_diagnostics = true;
    for (std::size_t i = 0; i < data.size(); ++i)
      evals[i] = eval_sample(model, store, data[i], lambda, ponder_weight,
                             false, opt);
  } else {
    const unsigned hw = std::thread::hardware_concurrency();
    run_batch(model, store, data, ids, lambda, ponder_weight, false,
              hw ? hw : 1, evals);
  }
  Metrics m = reduce_metrics(evals);

  if (!pred_csv.empty()) {
    std::ofstream out(pred_csv);
    if (!out) throw DataError("cannot write '" + pred_csv + "'");
    out << "sample_id,E_pred,E_label,force_err_norm\n";
    for (std::size_t i = 0; i < evals.size(); ++i) {
      double norm = 0.0;
      for (double v : evals[i].force_err_norm) norm += v;
      norm /= static_cast<double>(evals[i].force_err_norm.size());
      out << i << "," << fmt17(evals[i].e_pred) << "," << fmt17(data[i].energy)
          << "," << fmt(norm) << "\n";
    }
  }
  if (want_diag) {
    std::ofstream out(diag_csv);
    if (!out) throw DataError("cannot write '" + diag_csv + "'");
    out << "sample_id,niu,node_index,halt_step,attention_row\n";
    for (std::size_t i = 0; i < evals.size(); ++i)
      for (std::size_t u = 0; u < evals[i].halt_steps.size(); ++u)
        for (std::size_t a = 0; a < evals[i].halt_steps[u].size(); ++a) {
          out << i << "," << u << "," << a << ","
              << evals[i].halt_steps[u][a] << ",";
          if (u + 1 == evals[i].halt_steps.size() && a < evals[i].alpha.size()) {
            const Tensor& row = evals[i].alpha[a];
            for (std::size_t c = 0; c < row.size(); ++c)
              out << (c ? ";" : "") << fmt(row[c]);
          }
          out << "\n";
        }
  }
  return m;
}

namespace {

SeedOutcome run_one_seed(const RunConfig& cfg,
                         const std::vector<LabeledSample>& train_set,
                         const std::vector<LabeledSample>& val_set,
                         std::uint64_t seed, std::size_t batch_threads,
                         std::vector<MetricRow>& rows_out) {
  SeedOutcome outcome;
  outcome.seed = seed;

  BuiltModel bm = build_model(cfg, seed);
  if (cfg.artificial_species)
    build_remap(train_set, bm.model, cfg.species_vocab);
  standardize_from(train_set, bm.model);
  bm.store.adam_init({cfg.lr, cfg.beta1, cfg.beta2, cfg.epsilon});

  const fs::path dir(cfg.out_dir);
  const std::string metrics_path =
      (dir / ("metrics_seed" + std::to_string(seed) + ".csv")).string();
  std::ofstream csv(metrics_path);
  if (!csv) throw DataError("cannot write '" + metrics_path + "'");
  csv << "step,split,loss,energy_mae,force_mae,mean_ponder_steps\n";

  Rng shuffle_rng(seed ^ 0x5DEECE66DULL);
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  shuffle_rng.shuffle(order);
  std::size_t cursor = 0;

  std::vector<SampleEval> evals;
  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    std::vector<std::size_t> batch;
    batch.reserve(cfg.batch_size);
    while (batch.size() < cfg.batch_size) {
      if (cursor >= order.size()) {
        shuffle_rng.shuffle(order);
        cursor = 0;
      }
      batch.push_back(order[cursor++]);
    }
    Metrics m;
    try {
      run_batch(bm.model, bm.store, train_set, batch, cfg.lambda,
                cfg.ponder_weight, true, batch_threads, evals);
      m = reduce_metrics(evals);
      if (!std::isfinite(m.loss)) throw NumericError("NaN loss");
      bm.store.zero_grads();
      for (const auto& e : evals) bm.store.accumulate(e.grads);
      bm.store.scale_grads(1.0 / static_cast<double>(evals.size()));
      bm.store.adam_update();
    } catch (const NumericError& err) {
      std::ostringstream what;
      what << err.what() << " at step " << step << " (batch ids";
      for (auto b : batch) what << " " << b;
      what << ")";
      outcome.failure = what.str();
      return outcome;
    }

    MetricRow row{step, "train", m};
    rows_out.push_back(row);
    append_row(csv, row);
    outcome.final_train_loss = m.loss;
    if (!val_set.empty() &&
        (step % cfg.val_every == 0 || step == cfg.steps)) {
      Metrics vm = evaluate_model(bm.model, bm.store, val_set, cfg.lambda,
                                  cfg.ponder_weight);
      MetricRow vrow{step, "val", vm};
      rows_out.push_back(vrow);
      append_row(csv, vrow);
      outcome.final_val_loss = vm.loss;
    }
  }

  // Final losses from full, deterministic evaluations (batch rows are noisy).
  outcome.final_train_loss =
      evaluate_model(bm.model, bm.store, train_set, cfg.lambda,
                     cfg.ponder_weight)
          .loss;
  if (!val_set.empty())
    outcome.final_val_loss = evaluate_model(bm.model, bm.store, val_set,
                                            cfg.lambda, cfg.ponder_weight)
                                 .loss;
  outcome.model_path =
      (dir / ("model_seed" + std::to_string(seed) + ".molct")).string();
  save_model(outcome.model_path, bm.model, bm.store, cfg);
  outcome.completed = true;
  return outcome;
}

void write_aggregate(const RunConfig& cfg,
                     const std::vector<std::vector<MetricRow>>& per_seed) {
  // Only steps logged by every completed seed enter the aggregate.
  std::map<std::pair<std::size_t, std::string>, std::vector<Metrics>> cells;
  for (const auto& rows : per_seed)
    for (const auto& r : rows) cells[{r.step, r.split}].push_back(r.m);
  const fs::path out_path = fs::path(cfg.out_dir) / "aggregate.csv";
  std::ofstream out(out_path);
  if (!out) throw DataError("cannot write '" + out_path.string() + "'");
  out << "step,split,loss_mean,loss_std,energy_mae_mean,energy_mae_std,"
         "force_mae_mean,force_mae_std,mean_ponder_steps_mean,"
         "mean_ponder_steps_std\n";
  auto stats = [](const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size());
    return std::make_pair(mean, std::sqrt(var));
  };
  for (const auto& [key, ms] : cells) {
    if (ms.size() != per_seed.size()) continue;
    std::vector<double> loss, emae, fmae, ponder;
    for (const auto& m : ms) {
      loss.push_back(m.loss);
      emae.push_back(m.energy_mae);
      fmae.push_back(m.force_mae);
      ponder.push_back(m.mean_ponder);
    }
    auto [lm, ls] = stats(loss);
    auto [em, es] = stats(emae);
    auto [fm, fsd] = stats(fmae);
    auto [pm, ps] = stats(ponder);
    out << key.first << "," << key.second << "," << fmt(lm) << "," << fmt(ls)
        << "," << fmt(em) << "," << fmt(es) << "," << fmt(fm) << ","
        << fmt(fsd) << "," << fmt(pm) << "," << fmt(ps) << "\n";
  }
}

}  // namespace

TrainResult train(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.data.empty()) throw UsageError("train: config needs data = <path>");
  auto dataset = parse_extxyz(cfg.data);
  if (!cfg.bonds.empty())
    attach_bonds(dataset,
                 parse_bonds(cfg.bonds, dataset.front().graph.n_particles()));
  auto [train_set, val_set] =
      split(dataset, cfg.n_train, cfg.n_val, cfg.split_seed);

  fs::create_directories(cfg.out_dir);

  TrainResult result;
  result.seeds.resize(cfg.seeds.size());
  std::vector<std::vector<MetricRow>> rows(cfg.seeds.size());

  const std::size_t n_threads = cfg.effective_threads();
  if (cfg.seeds.size() > 1) {
    // One thread per seed (capped); batches inside a seed stay serial.
    std::vector<std::thread> pool;
    std::size_t next = 0;
    std::mutex mtx;
    const std::size_t workers = std::min(n_threads, cfg.seeds.size());
    std::vector<std::string> errors(cfg.seeds.size());
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&]() {
        for (;;) {
          std::size_t k;
          {
            std::lock_guard<std::mutex> lock(mtx);
            if (next >= cfg.seeds.size()) return;
            k = next++;
          }
          try {
            result.seeds[k] = run_one_seed(cfg, train_set, val_set,
                                           cfg.seeds[k], 1, rows[k]);
          } catch (const std::exception& e) {
            result.seeds[k].seed = cfg.seeds[k];
            result.seeds[k].failure = e.what();
          }
        }
      });
    for (auto& t : pool) t.join();
  } else {
    result.seeds[0] =
        run_one_seed(cfg, train_set, val_set, cfg.seeds[0], n_threads,
                     rows[0]);
  }

  std::vector<std::vector<MetricRow>> completed_rows;
  for (std::size_t k = 0; k < result.seeds.size(); ++k)
    if (result.seeds[k].completed) completed_rows.push_back(rows[k]);
  if (!completed_rows.empty()) {
    RunConfig agg_cfg = cfg;
    write_aggregate(agg_cfg, completed_rows);
  }
  return result;
}

RunConfig variant_config(const RunConfig& base, const std::string& variant) {
  RunConfig v = base;
  v.out_dir = (fs::path(base.out_dir) / variant).string();
  if (variant == "cfc-r") {
    v.op = "cfc";
    v.featurization = "r";
    v.rme_blocks = 0;
  } else if (variant == "cfc-logr") {
    v.op = "cfc";
    v.featurization = "logr";
    v.rme_blocks = 0;
  } else if (variant == "ea-tied") {
    v.op = "ea";
    v.blocks = 1;
  } else if (variant == "ea-stacked") {
    v.op = "ea";
    v.blocks = 3;
    v.iterations = 1;
  } else if (variant == "niu-1") {
    v.op = "niu";
    v.blocks = 1;
  } else if (variant == "niu-3") {
    v.op = "niu";
    v.blocks = 3;
  } else if (variant == "rme-on") {
    v.rme_blocks = std::max<std::size_t>(1, base.rme_blocks);
  } else if (variant == "rme-off") {
    v.rme_blocks = 0;
  } else if (variant == "artificial-atom-types") {
    v.op = "cfc";
    v.rme_blocks = 0;
    v.artificial_species = true;
  } else {
    throw UsageError(
        "unknown ablation variant '" + variant +
        "'; valid: cfc-r, cfc-logr, ea-tied, ea-stacked, niu-1, niu-3, "
        "rme-on, rme-off, artificial-atom-types");
  }
  return v;
}

std::vector<AblateRow> ablate(const RunConfig& cfg,
                              const std::vector<std::string>& variants) {
  if (variants.empty()) throw UsageError("ablate: no variants given");
  std::vector<AblateRow> table;
  fs::create_directories(cfg.out_dir);
  for (const auto& name : variants) {
    RunConfig vcfg = variant_config(cfg, name);
    ParamCountReport pc = param_count(vcfg);
    TrainResult tr = train(vcfg);
    AblateRow row;
    row.variant = name;
    row.param_total = pc.total;
    std::vector<double> tl, vl;
    for (const auto& s : tr.seeds) {
      if (!s.completed)
        throw NumericError("ablate: variant " + name + " seed " +
                           std::to_string(s.seed) + " failed: " + s.failure);
      tl.push_back(s.final_train_loss);
      vl.push_back(s.final_val_loss);
    }
    auto stats = [](const std::vector<double>& v) {
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double var = 0.0;
      for (double x : v) var += (x - mean) * (x - mean);
      return std::make_pair(mean, std::sqrt(var / static_cast<double>(v.size())));
    };
    std::tie(row.train_loss_mean, row.train_loss_std) = stats(tl);
    std::tie(row.val_loss_mean, row.val_loss_std) = stats(vl);
    table.push_back(row);
  }
  const fs::path out_path = fs::path(cfg.out_dir) / "ablation_summary.csv";
  std::ofstream out(out_path);
  if (!out) throw DataError("cannot write '" + out_path.string() + "'");
  out << "variant,params,train_loss_mean,train_loss_std,val_loss_mean,"
         "val_loss_std\n";
  for (const auto& r : table)
    out << r.variant << "," << r.param_total << "," << fmt(r.train_loss_mean)
        << "," << fmt(r.train_loss_std) << "," << fmt(r.val_loss_mean) << ","
        << fmt(r.val_loss_std) << "\n";
  return table;
}

ParamCountReport param_count(const RunConfig& cfg) {
  BuiltModel bm = build_model(cfg, 1);
  ParamCountReport rep;
  std::map<std::string, std::size_t> groups;
  for (std::size_t i = 0; i < bm.store.count(); ++i) {
    const std::string& name = bm.store.name(static_cast<ParamId>(i));
    const std::string group = name.substr(0, name.find('.'));
    groups[group] += bm.store.value(static_cast<ParamId>(i)).size();
  }
  for (const auto& [g, c] : groups) {
    rep.groups.push_back({g, c});
    rep.total += c;
  }
  return rep;
}

GradcheckReport gradcheck(const RunConfig* cfg_in) {
  RunConfig cfg;
  if (cfg_in) {
    cfg = *cfg_in;
  } else {
    cfg.node_dim = 8;
    cfg.edge_dim = 8;
    cfg.heads = 2;
    cfg.rme_blocks = 1;
    cfg.op = "niu";
    cfg.blocks = 1;
    cfg.iterations = 2;
  }
  cfg.validate();

  BuiltModel bm = build_model(cfg, 42);
  // Keep halting probabilities far below threshold: finite differences must
  // not step across a halting boundary.
  for (const auto& unit : bm.model.nius)
    bm.store.mutable_value(unit.ponder.biases.back()).fill(-4.0);

  // Random small molecule with bonds so every parameter group is on-path.
  ToyMmTemplate tmpl = witness_template();
  Rng jitter(7);
  MolecularGraph mol = tmpl.graph;
  for (std::size_t i = 0; i < mol.coords.size(); ++i)
    mol.coords[i] += jitter.normal(0.0, 0.05);

  LabeledSample sample;
  sample.graph = mol;
  auto [e, f] = toy_mm_energy_forces(mol, tmpl.ff);
  sample.energy = e;
  sample.forces = f;
  standardize_from({sample}, bm.model);

  GradcheckReport rep;

  auto energy_at = [&](const ParameterStore& store, const Tensor& coords) {
    Graph g;
    MolecularGraph m2 = mol;
    m2.coords = coords;
    EnergyForcesNodes efn = build_energy_forces(g, m2, bm.model, store);
    return g.value(efn.energy)[0];
  };

  // Suite 1: forces against central differences of the energy.
  {
    Graph g;
    EnergyForcesNodes efn = build_energy_forces(g, mol, bm.model, bm.store);
    Tensor analytic = g.value(efn.forces);
    Tensor numeric = ad::finite_diff_grad(
        [&](const Tensor& c) { return energy_at(bm.store, c); }, mol.coords,
        1e-4);
    numeric.scale_inplace(-1.0);
    rep.force_err = ad::max_rel_err(analytic, numeric);
  }

  // Shared picks: a few scalars from every parameter group.
  Rng pick_rng(1357);
  std::vector<std::pair<ParamId, std::size_t>> picks;
  {
    std::set<std::string> groups;
    for (std::size_t p = 0; p < bm.store.count(); ++p)
      groups.insert(bm.store.name(static_cast<ParamId>(p)).substr(
          0, bm.store.name(static_cast<ParamId>(p)).find('.')));
    for (const auto& grp : groups) {
      std::vector<ParamId> members;
      for (std::size_t p = 0; p < bm.store.count(); ++p)
        if (bm.store.name(static_cast<ParamId>(p)).rfind(grp + ".", 0) == 0 ||
            bm.store.name(static_cast<ParamId>(p)) == grp)
          members.push_back(static_cast<ParamId>(p));
      for (int k = 0; k < 3 && !members.empty(); ++k) {
        ParamId pid = members[pick_rng.below(members.size())];
        picks.emplace_back(pid,
                           pick_rng.below(bm.store.value(pid).size()));
      }
    }
  }

  // Suite 2: first-order parameter gradients of the energy.
  {
    Graph g;
    EnergyForcesNodes efn = build_energy_forces(g, mol, bm.model, bm.store);
    auto grads = g.backward(efn.energy);
    auto gbuf = bm.store.make_grad_buffers();
    bm.store.harvest_grads(g, grads, gbuf);
    double worst = 0.0;
    for (auto [pid, idx] : picks) {
      ParameterStore probe = bm.store;
      const double h = 1e-5;
      const double orig = probe.value(pid)[idx];
      probe.mutable_value(pid)[idx] = orig + h;
      const double ep = energy_at(probe, mol.coords);
      probe.mutable_value(pid)[idx] = orig - h;
      const double em = energy_at(probe, mol.coords);
      probe.mutable_value(pid)[idx] = orig;
      const double numeric = (ep - em) / (2.0 * h);
      const double analytic = gbuf[pid][idx];
      const double denom = std::max(
          {std::fabs(analytic), std::fabs(numeric), 1e-6});
      worst = std::max(worst, std::fabs(analytic - numeric) / denom);
    }
    rep.param_first_err = worst;
  }

  // Suite 3: parameter gradients of the full loss, whose force term requires
  // differentiating through the inner coordinate gradient.
  {
    auto loss_at = [&](const ParameterStore& store) {
      SampleEval ev = eval_sample(bm.model, store, sample, cfg.lambda,
                                  cfg.ponder_weight, false);
      return ev.loss;
    };
    SampleEval ev = eval_sample(bm.model, bm.store, sample, cfg.lambda,
                                cfg.ponder_weight, true);
    double worst = 0.0;
    for (auto [pid, idx] : picks) {
      ParameterStore probe = bm.store;
      const double h = 1e-4;
      const double orig = probe.value(pid)[idx];
      probe.mutable_value(pid)[idx] = orig + h;
      const double lp = loss_at(probe);
      probe.mutable_value(pid)[idx] = orig - h;
      const double lm = loss_at(probe);
      probe.mutable_value(pid)[idx] = orig;
      const double numeric = (lp - lm) / (2.0 * h);
      const double analytic = ev.grads[pid][idx];
      const double denom = std::max(
          {std::fabs(analytic), std::fabs(numeric), 1e-6});
      worst = std::max(worst, std::fabs(analytic - numeric) / denom);
    }
    rep.param_second_err = worst;
  }

  rep.pass = rep.force_err < 1e-5 && rep.param_first_err < 1e-5 &&
             rep.param_second_err < 1e-4;
  return rep;
}

void featurize_export(const std::string& data_path,
                      const std::string& bonds_path,
                      const std::string& out_csv, const RunConfig& cfg) {
  auto dataset = parse_extxyz(data_path);
  if (!bonds_path.empty())
    attach_bonds(dataset,
                 parse_bonds(bonds_path, dataset.front().graph.n_particles()));
  FeaturizerConfig f = cfg.featurizer();
  f.validate();
  std::ofstream out(out_csv);
  if (!out) throw DataError("cannot write '" + out_csv + "'");
  out << "frame,i,j,r,cutoff";
  for (std::size_t k = 0; k < f.edge_dim; ++k) out << ",e_" << k;
  out << "\n";
  for (std::size_t s = 0; s < dataset.size(); ++s) {
    const auto& g = dataset[s].graph;
    for (std::size_t i = 0; i < g.n_particles(); ++i)
      for (std::size_t j = i + 1; j < g.n_particles(); ++j) {
        double r = 0.0;
        for (std::size_t c = 0; c < 3; ++c) {
          const double d = g.coords.at(i, c) - g.coords.at(j, c);
          r += d * d;
        }
        r = std::sqrt(r);
        out << s << "," << i << "," << j << "," << fmt17(r) << ","
            << fmt17(cutoff_weight(r, f.r_cut));
        Tensor e = log_rbf(r, f);
        for (std::size_t k = 0; k < f.edge_dim; ++k)
          out << "," << fmt17(e[k]);
        out << "\n";
      }
  }
}

void gen_toymm_files(const std::string& out_dir, std::uint64_t seed,
                     std::size_t n_samples, double noise) {
  fs::create_directories(out_dir);
  ToyMmTemplate tmpl = witness_template();
  GenResult gen = gen_toy_mm_dataset(tmpl, n_samples, noise, seed);
  write_extxyz((fs::path(out_dir) / "toymm.xyz").string(), gen.samples);
  write_bonds((fs::path(out_dir) / "toymm_bonds.txt").string(),
              tmpl.graph.relational_edges);
  write_forcefield((fs::path(out_dir) / "toymm_ff.txt").string(), tmpl.ff);
}

}  // namespace molct
