#include "core/federation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace fednod {

std::uint64_t local_train_seed(std::uint64_t run_seed, int round, int client_id) {
  return derive_seed(run_seed, 0x7a, static_cast<std::uint64_t>(round),
                     static_cast<std::uint64_t>(client_id));
}

namespace {

struct EpochMetrics {
  double loss = 0.0;
  double accuracy = 0.0;
};

// One pass of seeded mini-batch Adam; metrics average the epoch's batches.
EpochMetrics train_epoch(ModelSpec& model, AdamState& opt, const SampleSet& data,
                         const Hyperparameters& hyper, Rng& rng, int client_id) {
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);

  double loss_sum = 0.0;
  std::int64_t correct = 0;
  const std::size_t bs = static_cast<std::size_t>(hyper.batch_size);

  ForwardCache cache;
  ParamGrads grads;
  for (std::size_t first = 0; first < order.size(); first += bs) {
    const std::size_t count = std::min(bs, order.size() - first);
    std::vector<int> labels;
    Tensor batch = data.make_batch(order, first, count, &labels);
    Tensor logits = model_forward(model, batch, /*training=*/true, &rng, &cache);
    CrossEntropyResult ce = softmax_cross_entropy(logits, labels);
    if (!std::isfinite(ce.loss)) {
      throw DivergedError("client " + std::to_string(client_id) +
                          ": non-finite training loss");
    }
    loss_sum += ce.loss * static_cast<double>(count);
    for (std::size_t i = 0; i < count; ++i) {
      const int pred = argmax_row(logits.ptr() + static_cast<std::int64_t>(i) * 3, 3);
      if (pred == labels[i]) ++correct;
    }
    model_backward(model, cache, ce.grad_logits, grads);

    std::vector<Tensor*> params;
    std::vector<const Tensor*> gptrs;
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
      if (!model.layers[li].has_params()) continue;
      params.push_back(&model.layers[li].weight);
      gptrs.push_back(&grads.weight[li]);
      params.push_back(&model.layers[li].bias);
      gptrs.push_back(&grads.bias[li]);
    }
    adam_step(params, gptrs, opt, hyper);
  }

  EpochMetrics m;
  if (!order.empty()) {
    m.loss = loss_sum / static_cast<double>(order.size());
    m.accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
  }
  return m;
}

}  // namespace

ClientUpdate local_train(const ModelSpec& arch, const ModelWeights& global,
                         const SampleSet& shard, int client_id,
                         const Hyperparameters& hyper, int local_epochs,
                         std::uint64_t seed) {
  if (shard.empty()) {
    throw DataError("client " + std::to_string(client_id) + ": empty shard");
  }
  hyper.validate();
  if (local_epochs < 0) {
    throw ConfigError("local_epochs must be >= 0, got " + std::to_string(local_epochs));
  }

  ClientUpdate up;
  up.client_id = client_id;
  up.n_samples = static_cast<std::int64_t>(shard.size());

  if (local_epochs == 0) {
    up.weights = global;
    up.weights.arch_name = arch.name;
    return up;
  }

  ModelSpec model = arch;
  weights_load(model, global);
  AdamState opt;
  EpochMetrics last{};
  for (int e = 0; e < local_epochs; ++e) {
    Rng rng(derive_seed(seed, 0x3c, static_cast<std::uint64_t>(e)));
    try {
      last = train_epoch(model, opt, shard, hyper, rng, client_id);
    } catch (const DivergedError& e2) {
      throw DivergedError(std::string(e2.what()) + " (client " + std::to_string(client_id) +
                          ")");
    }
  }
  up.weights = weights_extract(model);
  up.train_loss = last.loss;
  up.train_accuracy = last.accuracy;
  return up;
}

ModelWeights fedavg_aggregate(const std::vector<ClientUpdate>& updates) {
  if (updates.empty()) {
    throw AggregationError("fedavg_aggregate: no client updates");
  }
  std::vector<const ClientUpdate*> by_id;
  by_id.reserve(updates.size());
  double total = 0.0;
  for (const ClientUpdate& u : updates) {
    if (u.n_samples <= 0) {
      throw AggregationError("fedavg_aggregate: client " + std::to_string(u.client_id) +
                             " reports n_samples = " + std::to_string(u.n_samples));
    }
    total += static_cast<double>(u.n_samples);
    by_id.push_back(&u);
  }
  std::sort(by_id.begin(), by_id.end(), [](const ClientUpdate* a, const ClientUpdate* b) {
    return a->client_id < b->client_id;
  });

  const ModelWeights& first = by_id.front()->weights;
  for (const ClientUpdate* u : by_id) {
    if (u->weights.tensors.size() != first.tensors.size()) {
      throw IncompatibleWeightsError("fedavg_aggregate: client " +
                                     std::to_string(u->client_id) + " sent " +
                                     std::to_string(u->weights.tensors.size()) +
                                     " tensors, expected " +
                                     std::to_string(first.tensors.size()));
    }
    for (std::size_t t = 0; t < first.tensors.size(); ++t) {
      if (u->weights.tensors[t].name != first.tensors[t].name ||
          u->weights.tensors[t].tensor.shape != first.tensors[t].tensor.shape) {
        throw IncompatibleWeightsError("fedavg_aggregate: tensor " +
                                       std::to_string(t) + " mismatch from client " +
                                       std::to_string(u->client_id));
      }
    }
  }

  ModelWeights out;
  out.arch_name = first.arch_name;
  out.tensors.reserve(first.tensors.size());
  std::vector<double> acc;
  for (std::size_t t = 0; t < first.tensors.size(); ++t) {
    const std::int64_t n = first.tensors[t].tensor.numel();
    acc.assign(static_cast<std::size_t>(n), 0.0);
    for (const ClientUpdate* u : by_id) {
      const double coef = static_cast<double>(u->n_samples) / total;
      const float* src = u->weights.tensors[t].tensor.ptr();
      for (std::int64_t i = 0; i < n; ++i) {
        acc[static_cast<std::size_t>(i)] += coef * static_cast<double>(src[i]);
      }
    }
    NamedTensor nt;
    nt.name = first.tensors[t].name;
    nt.tensor = Tensor(first.tensors[t].tensor.shape);
    for (std::int64_t i = 0; i < n; ++i) {
      nt.tensor.ptr()[i] = static_cast<float>(acc[static_cast<std::size_t>(i)]);
    }
    out.tensors.push_back(std::move(nt));
  }
  return out;
}

Confusion confusion_from_predictions(const std::vector<int>& predicted,
                                     const std::vector<int>& labels) {
  if (predicted.size() != labels.size()) {
    throw DimensionError("confusion: " + std::to_string(predicted.size()) +
                         " predictions vs " + std::to_string(labels.size()) + " labels");
  }
  Confusion c{};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    c[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(predicted[i])] += 1;
  }
  return c;
}

std::int64_t confusion_total(const Confusion& c) {
  std::int64_t n = 0;
  for (const auto& row : c) {
    for (std::int64_t v : row) n += v;
  }
  return n;
}

double confusion_accuracy(const Confusion& c) {
  const std::int64_t n = confusion_total(c);
  const std::int64_t tr = c[0][0] + c[1][1] + c[2][2];
  return n == 0 ? 0.0 : static_cast<double>(tr) / static_cast<double>(n);
}

EvalResult evaluate(const ModelSpec& arch, const ModelWeights& weights,
                    const SampleSet& test_set) {
  if (test_set.empty()) throw DataError("evaluate: empty test set");
  ModelSpec model = arch;
  weights_load(model, weights);

  std::vector<std::size_t> order(test_set.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<int> preds(test_set.size());
  std::vector<int> labels(test_set.size());
  double loss_sum = 0.0;
  const std::size_t bs = 64;
  for (std::size_t first = 0; first < order.size(); first += bs) {
    const std::size_t count = std::min(bs, order.size() - first);
    std::vector<int> batch_labels;
    Tensor batch = test_set.make_batch(order, first, count, &batch_labels);
    Tensor logits = model_forward(model, batch, /*training=*/false, nullptr, nullptr);
    for (std::size_t i = 0; i < count; ++i) {
      const float* row = logits.ptr() + static_cast<std::int64_t>(i) * 3;
      preds[first + i] = argmax_row(row, 3);
      labels[first + i] = batch_labels[i];
      loss_sum += ce_loss_row(row, 3, batch_labels[i]);
    }
  }

  EvalResult r;
  r.confusion = confusion_from_predictions(preds, labels);
  r.accuracy = confusion_accuracy(r.confusion);
  r.loss = loss_sum / static_cast<double>(test_set.size());
  return r;
}

void run_round(ServerState& state, const ModelSpec& arch,
               const std::vector<SampleSet>& shards, const SampleSet& test_set,
               const Hyperparameters& hyper, int local_epochs, std::uint64_t run_seed) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<ClientUpdate> updates;
  updates.reserve(shards.size());
  for (std::size_t c = 0; c < shards.size(); ++c) {
    try {
      updates.push_back(local_train(arch, state.global, shards[c], static_cast<int>(c),
                                    hyper, local_epochs,
                                    local_train_seed(run_seed, state.round,
                                                     static_cast<int>(c))));
    } catch (const DivergedError& e) {
      throw DivergedError("round " + std::to_string(state.round) + ": " + e.what());
    }
  }
  state.global = fedavg_aggregate(updates);
  EvalResult ev = evaluate(arch, state.global, test_set);

  RoundReport rep;
  rep.round = state.round;
  rep.test_accuracy = ev.accuracy;
  rep.test_loss = ev.loss;
  rep.confusion = ev.confusion;
  rep.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  state.history.push_back(rep);
  state.round += 1;
}

ModelWeights centralized_train(const ModelSpec& arch, const ModelWeights& init,
                               const SampleSet& data, const Hyperparameters& hyper,
                               int rounds, int local_epochs, std::uint64_t run_seed,
                               int client_id) {
  ModelSpec model = arch;
  weights_load(model, init);
  for (int r = 0; r < rounds; ++r) {
    AdamState opt;  // same optimizer lifecycle as a federated client
    for (int e = 0; e < local_epochs; ++e) {
      Rng rng(derive_seed(local_train_seed(run_seed, r, client_id), 0x3c,
                          static_cast<std::uint64_t>(e)));
      train_epoch(model, opt, data, hyper, rng, client_id);
    }
  }
  return weights_extract(model);
}

}  // namespace fednod
