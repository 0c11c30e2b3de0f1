#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "core/dataset.hpp"
#include "core/model.hpp"

namespace fednod {

using Confusion = std::array<std::array<std::int64_t, 3>, 3>;  // [true][pred]

struct ClientUpdate {
  int client_id = 0;
  ModelWeights weights;
  std::int64_t n_samples = 0;  // FedAvg weighting mass
  double train_loss = 0.0;
  double train_accuracy = 0.0;
};

struct RoundReport {
  int round = 0;
  double test_accuracy = 0.0;
  double test_loss = 0.0;
  Confusion confusion{};
  double wall_time_s = 0.0;
};

struct EvalResult {
  double accuracy = 0.0;
  double loss = 0.0;
  Confusion confusion{};
};

struct ServerState {
  int round = 0;
  ModelWeights global;
  std::vector<RoundReport> history;
};

// Seed for one client's local pass in one round; shared by the simulator,
// the networked runtime, and the centralized reference path.
std::uint64_t local_train_seed(std::uint64_t run_seed, int round, int client_id);

// local_epochs passes of mini-batch Adam over the shard, starting from the
// global weights with a fresh optimizer. Shuffling and dropout derive from
// `seed`. Returned metrics average over the final epoch's batches;
// local_epochs == 0 returns the global weights untouched with zero metrics.
ClientUpdate local_train(const ModelSpec& arch, const ModelWeights& global,
                         const SampleSet& shard, int client_id,
                         const Hyperparameters& hyper, int local_epochs,
                         std::uint64_t seed);

// Sample-count-weighted mean of the updates, accumulated in double in
// client_id order.
ModelWeights fedavg_aggregate(const std::vector<ClientUpdate>& updates);

// Dropout disabled; argmax ties resolve to the lowest class; loss is the
// double-accumulated mean cross-entropy in sample order, so results do not
// depend on evaluation batch size.
EvalResult evaluate(const ModelSpec& arch, const ModelWeights& weights,
                    const SampleSet& test_set);

Confusion confusion_from_predictions(const std::vector<int>& predicted,
                                     const std::vector<int>& labels);
double confusion_accuracy(const Confusion& c);
std::int64_t confusion_total(const Confusion& c);

// One federated round: broadcast, local-train every shard, aggregate in
// client_id order, evaluate, append a RoundReport.
void run_round(ServerState& state, const ModelSpec& arch,
               const std::vector<SampleSet>& shards, const SampleSet& test_set,
               const Hyperparameters& hyper, int local_epochs, std::uint64_t run_seed);

// Reference trainer: the same per-round schedule with the federation layer
// removed. A single-client federated run must match it bit for bit.
ModelWeights centralized_train(const ModelSpec& arch, const ModelWeights& init,
                               const SampleSet& data, const Hyperparameters& hyper,
                               int rounds, int local_epochs, std::uint64_t run_seed,
                               int client_id = 0);

}  // namespace fednod
