#ifndef KVMEMNN_TRAIN_H_
#define KVMEMNN_TRAIN_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "kvmemnn/memory_store.h"
#include "kvmemnn/model.h"
#include "kvmemnn/params.h"

namespace kvmemnn {

// One featurized question with its pre-hashed memory. Hashing happens once
// per question, never between hops.
struct Instance {
  SparseVec question;
  std::vector<std::uint32_t> memory;  // slot ids into the store
  std::vector<std::uint32_t> gold;    // candidate indices
  std::vector<std::uint32_t> pool;    // candidate indices; empty = all
  std::string qtype;
};

enum class ModelKind { kKeyValue, kSupervisedEmbeddings };

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean over the epoch's examples
  double dev_hits1 = 0.0;   // percent
  double dev_mrr = 0.0;
  std::size_t clipped = 0;
};

struct TrainOptions {
  ModelKind kind = ModelKind::kKeyValue;
  bool select_by_mrr = false;  // sentence-selection mode
  std::size_t first_epoch = 0;  // resume offset; seeds depend on the absolute epoch
  std::function<void(const EpochStats&)> on_epoch;
};

struct TrainResult {
  ModelParams best;
  ModelParams last;
  std::vector<EpochStats> curve;
  std::size_t best_epoch = 0;
};

// Drops each entry independently with probability `rate`; weights of the
// survivors are left unscaled.
SparseVec WordDropout(const SparseVec& v, double rate, std::mt19937_64& rng);

// Eval-time forward pass for one instance (no dropout).
HopTrace ForwardInstance(const ModelParams& params, const Instance& inst, const MemoryStore& store,
                         const CandidateSet& candidates, ModelKind kind);

std::vector<RankedCandidate> PredictInstance(const ModelParams& params, const Instance& inst,
                                             const MemoryStore& store,
                                             const CandidateSet& candidates, ModelKind kind);

// Single-example SGD over seeded shuffles, keeping the params with the best
// dev metric. Throws NumericalError when the loss stops being finite.
TrainResult Train(ModelParams params, const std::vector<Instance>& train,
                  const std::vector<Instance>& dev, const MemoryStore& store,
                  const CandidateSet& candidates, const HyperParams& hyper,
                  const TrainOptions& options = {});

// Mean hits@1 (percent) and MRR of the model over a set of instances.
struct DevMetrics {
  double hits1 = 0.0;
  double mrr = 0.0;
};
DevMetrics EvaluateInstances(const ModelParams& params, const std::vector<Instance>& data,
                             const MemoryStore& store, const CandidateSet& candidates,
                             ModelKind kind);

}  // namespace kvmemnn

#endif  // KVMEMNN_TRAIN_H_
