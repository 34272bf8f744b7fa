#include "kvmemnn/train.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>

#include "kvmemnn/evaluation.h"

namespace kvmemnn {

SparseVec WordDropout(const SparseVec& v, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return v;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<SparseVec::Entry> kept;
  kept.reserve(v.nnz());
  for (const auto& e : v.entries()) {
    if (unit(rng) >= rate) kept.push_back(e);
  }
  return SparseVec::FromUnsorted(v.dim(), std::move(kept));
}

HopTrace ForwardInstance(const ModelParams& params, const Instance& inst, const MemoryStore& store,
                         const CandidateSet& candidates, ModelKind kind) {
  if (kind == ModelKind::kSupervisedEmbeddings) {
    return SupervisedEmbeddingsForward(params, inst.question, candidates, inst.pool);
  }
  return Forward(params, inst.question, MemoryView::Of(store, inst.memory), candidates, inst.pool);
}

std::vector<RankedCandidate> PredictInstance(const ModelParams& params, const Instance& inst,
                                             const MemoryStore& store,
                                             const CandidateSet& candidates, ModelKind kind) {
  return Rank(ForwardInstance(params, inst, store, candidates, kind), candidates);
}

DevMetrics EvaluateInstances(const ModelParams& params, const std::vector<Instance>& data,
                             const MemoryStore& store, const CandidateSet& candidates,
                             ModelKind kind) {
  std::vector<std::vector<std::uint32_t>> rankings;
  std::vector<std::vector<std::uint32_t>> golds;
  rankings.reserve(data.size());
  golds.reserve(data.size());
  for (const auto& inst : data) {
    std::vector<std::uint32_t> ids;
    for (const auto& r : PredictInstance(params, inst, store, candidates, kind)) ids.push_back(r.id);
    rankings.push_back(std::move(ids));
    std::vector<std::uint32_t> gold_ids;
    for (std::uint32_t g : inst.gold) gold_ids.push_back(candidates.id(g));
    golds.push_back(std::move(gold_ids));
  }
  DevMetrics m;
  if (data.empty()) return m;
  m.hits1 = HitsAt1(rankings, golds);
  m.mrr = MapMrr(rankings, golds).mrr;
  return m;
}

namespace {

// Dense d x D gradient buffer that remembers which columns were written so
// clearing costs only the touched columns.
class ColumnAccumulator {
 public:
  ColumnAccumulator(std::size_t rows, std::size_t cols)
      : grad_(rows, cols), marked_(cols, 0) {}

  void Add(const GradientTerm& term) {
    for (const auto& [j, w] : term.phi->entries()) {
      if (!marked_[j]) {
        marked_[j] = 1;
        touched_.push_back(j);
      }
      for (std::size_t i = 0; i < grad_.rows(); ++i) grad_(i, j) += w * term.vec[i];
    }
  }

  // <G, u g^T> over the touched columns.
  double OuterDot(const DenseVec& u, const DenseVec& g) const {
    double s = 0.0;
    for (std::uint32_t j : touched_) {
      if (g[j] == 0.0) continue;
      double col = 0.0;
      for (std::size_t i = 0; i < grad_.rows(); ++i) col += grad_(i, j) * u[i];
      s += g[j] * col;
    }
    return s;
  }

  double SquaredNorm() const {
    double s = 0.0;
    for (std::uint32_t j : touched_) {
      for (std::size_t i = 0; i < grad_.rows(); ++i) s += grad_(i, j) * grad_(i, j);
    }
    return s;
  }

  // target -= step * grad over touched columns, then reset.
  void ApplyAndClear(DenseMat& target, double step) {
    for (std::uint32_t j : touched_) {
      for (std::size_t i = 0; i < grad_.rows(); ++i) {
        target(i, j) -= step * grad_(i, j);
        grad_(i, j) = 0.0;
      }
      marked_[j] = 0;
    }
    touched_.clear();
  }

 private:
  DenseMat grad_;
  std::vector<char> marked_;
  std::vector<std::uint32_t> touched_;
};

double SquaredNorm(const DenseVec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

// target -= step * u g^T
void ApplyOuter(DenseMat& target, const DenseVec& u, const DenseVec& g, double step) {
  for (std::size_t i = 0; i < target.rows(); ++i) {
    const double a = step * u[i];
    double* row = &target(i, 0);
    for (std::size_t j = 0; j < target.cols(); ++j) row[j] -= a * g[j];
  }
}

std::uint64_t EpochSeed(std::uint64_t seed, std::size_t epoch) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (epoch + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<std::uint32_t> GoldPositions(const Instance& inst) {
  if (inst.pool.empty()) return inst.gold;
  std::vector<std::uint32_t> pos;
  for (std::uint32_t g : inst.gold) {
    auto it = std::find(inst.pool.begin(), inst.pool.end(), g);
    if (it != inst.pool.end()) pos.push_back(static_cast<std::uint32_t>(it - inst.pool.begin()));
  }
  return pos;
}

}  // namespace

TrainResult Train(ModelParams params, const std::vector<Instance>& train,
                  const std::vector<Instance>& dev, const MemoryStore& store,
                  const CandidateSet& candidates, const HyperParams& hyper,
                  const TrainOptions& options) {
  hyper.Validate();
  if (train.empty()) throw DataError("train: empty training set");
  const bool use_memory = options.kind == ModelKind::kKeyValue;

  std::vector<std::vector<std::uint32_t>> gold_positions;
  gold_positions.reserve(train.size());
  for (const auto& inst : train) {
    auto pos = GoldPositions(inst);
    if (pos.empty()) throw DataError("train: instance without a gold candidate in its pool");
    if (use_memory && inst.memory.empty()) throw DataError("train: instance with empty memory");
    gold_positions.push_back(std::move(pos));
  }

  const std::size_t d = params.dim();
  const std::size_t features = params.features();
  ColumnAccumulator acc_a(d, features);

  const bool dropout = hyper.dropout_question > 0 || hyper.dropout_memory > 0 ||
                       hyper.dropout_answer > 0;
  std::optional<CandidateSet> dropped_candidates;
  if (hyper.dropout_answer > 0) dropped_candidates = candidates;

  TrainResult result;
  double best_metric = -1.0;
  result.best = params;

  std::vector<std::size_t> order(train.size());
  for (std::size_t e = 0; e < hyper.epochs; ++e) {
    const std::size_t epoch = options.first_epoch + e;
    std::mt19937_64 rng(EpochSeed(hyper.seed, epoch));
    std::iota(order.begin(), order.end(), 0u);
    std::shuffle(order.begin(), order.end(), rng);

    EpochStats stats;
    stats.epoch = epoch;
    double loss_sum = 0.0;
    for (std::size_t idx : order) {
      const Instance& inst = train[idx];

      SparseVec question;
      std::vector<SparseVec> keys, values;
      HopTrace trace;
      if (!dropout) {
        trace = ForwardInstance(params, inst, store, candidates, options.kind);
      } else {
        question = WordDropout(inst.question, hyper.dropout_question, rng);
        const CandidateSet* cands = &candidates;
        if (dropped_candidates) {
          for (std::size_t c = 0; c < candidates.size(); ++c) {
            dropped_candidates->mutable_features(c) =
                WordDropout(candidates.features(c), hyper.dropout_answer, rng);
          }
          cands = &*dropped_candidates;
        }
        if (use_memory) {
          MemoryView view;
          keys.reserve(inst.memory.size());
          values.reserve(inst.memory.size());
          for (std::uint32_t id : inst.memory) {
            keys.push_back(WordDropout(store.slot(id).key, hyper.dropout_memory, rng));
            values.push_back(WordDropout(store.slot(id).value, hyper.dropout_memory, rng));
          }
          for (std::size_t i = 0; i < keys.size(); ++i) {
            view.keys.push_back(&keys[i]);
            view.values.push_back(&values[i]);
          }
          trace = Forward(params, question, view, *cands, inst.pool);
        } else {
          trace = SupervisedEmbeddingsForward(params, question, *cands, inst.pool);
        }
      }

      GradientTerms terms = BackwardTerms(params, trace, gold_positions[idx]);
      if (!std::isfinite(terms.loss)) {
        throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch) +
                             " (question type '" + inst.qtype + "')");
      }
      loss_sum += terms.loss;

      for (const auto& t : terms.a_terms) acc_a.Add(t);
      const double outer = SquaredNorm(terms.b_query) * SquaredNorm(terms.b_features);
      double sq = acc_a.SquaredNorm() + outer;
      if (params.tied) sq += 2.0 * acc_a.OuterDot(terms.b_query, terms.b_features);
      for (const auto& r : terms.dR) {
        for (double v : r.data()) sq += v * v;
      }
      if (!std::isfinite(sq)) throw NumericalError("non-finite gradient norm");
      double step = hyper.lr;
      const double norm = std::sqrt(sq);
      if (hyper.clip_norm > 0 && norm > hyper.clip_norm) {
        step *= hyper.clip_norm / norm;
        ++stats.clipped;
      }
      acc_a.ApplyAndClear(params.A, step);
      ApplyOuter(params.tied ? params.A : params.B, terms.b_query, terms.b_features, step);
      for (std::size_t h = 0; h < terms.dR.size(); ++h) {
        auto rd = params.R[h].data();
        auto gd = terms.dR[h].data();
        for (std::size_t i = 0; i < rd.size(); ++i) rd[i] -= step * gd[i];
      }
    }
    stats.train_loss = loss_sum / static_cast<double>(train.size());
    if (!std::isfinite(stats.train_loss)) {
      throw NumericalError("non-finite mean training loss at epoch " + std::to_string(epoch));
    }

    double metric = 0.0;
    if (!dev.empty()) {
      const DevMetrics m = EvaluateInstances(params, dev, store, candidates, options.kind);
      stats.dev_hits1 = m.hits1;
      stats.dev_mrr = m.mrr;
      metric = options.select_by_mrr ? m.mrr : m.hits1;
    }
    if (dev.empty() || metric > best_metric) {
      best_metric = metric;
      result.best = params;
      result.best_epoch = epoch;
    }
    result.curve.push_back(stats);
    if (options.on_epoch) options.on_epoch(stats);
  }
  result.last = std::move(params);
  return result;
}

}  // namespace kvmemnn
