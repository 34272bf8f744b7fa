#ifndef KVMEMNN_MODEL_H_
#define KVMEMNN_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "kvmemnn/memory_store.h"
#include "kvmemnn/numerics.h"
#include "kvmemnn/params.h"

namespace kvmemnn {

// Possible outputs y_i with their feature maps Phi_Y(y_i).
class CandidateSet {
 public:
  enum class Mode { kEntity, kSentence };

  CandidateSet() = default;
  explicit CandidateSet(Mode mode) : mode_(mode) {}

  // Throws ConfigError on a duplicate id or empty features.
  void Add(std::uint32_t id, SparseVec features);

  Mode mode() const { return mode_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  std::uint32_t id(std::size_t index) const { return ids_[index]; }
  const SparseVec& features(std::size_t index) const { return features_[index]; }
  // Unchecked write access (word dropout may leave a candidate empty).
  SparseVec& mutable_features(std::size_t index) { return features_[index]; }
  const std::vector<std::uint32_t>& ids() const { return ids_; }
  // Index of a candidate id, or -1.
  std::int64_t IndexOf(std::uint32_t id) const;

 private:
  Mode mode_ = Mode::kEntity;
  std::vector<std::uint32_t> ids_;
  std::vector<SparseVec> features_;
  std::unordered_map<std::uint32_t, std::size_t> index_;
};

// Non-owning view of the addressed memories: parallel key/value features.
struct MemoryView {
  std::vector<const SparseVec*> keys;
  std::vector<const SparseVec*> values;

  static MemoryView Of(const MemoryStore& store, std::span<const std::uint32_t> slot_ids);
  static MemoryView Of(const std::vector<MemorySlot>& slots);
  std::size_t size() const { return keys.size(); }
};

// Everything the forward pass computed, kept for backward and inspection.
// Holds pointers into the inputs passed to Forward; they must outlive it.
struct HopTrace {
  std::size_t dim = 0;
  std::vector<DenseVec> queries;     // q_1 .. q_{H+1}
  std::vector<DenseVec> addressing;  // per hop, sums to 1
  std::vector<DenseVec> outputs;     // o per hop
  DenseVec logits;                   // q_{H+1} . B Phi_Y(y) per candidate
  DenseVec distribution;             // softmax(logits)
  std::vector<std::uint32_t> candidates;  // indices into the CandidateSet

  const SparseVec* question = nullptr;
  std::vector<const SparseVec*> keys;
  std::vector<const SparseVec*> values;
  std::vector<const SparseVec*> candidate_features;
  std::vector<double> key_embeddings;    // N x d
  std::vector<double> value_embeddings;  // N x d
  DenseVec feature_scores;               // B^T q_{H+1}, one entry per feature

  std::size_t hops() const { return addressing.size(); }
  // Position (within `candidates`) of the highest score; ties to the lowest id.
  std::size_t ArgMax(const CandidateSet& set) const;
};

// Key-value memory forward pass over params.hops() hops. `pool` restricts
// the candidates (indices into `candidates`); empty means all of them.
// Throws ConfigError on empty memory or an empty candidate pool.
HopTrace Forward(const ModelParams& params, const SparseVec& question, const MemoryView& memory,
                 const CandidateSet& candidates, std::span<const std::uint32_t> pool = {});

// Same computation with the hop loop skipped: q_1 is scored directly.
HopTrace SupervisedEmbeddingsForward(const ModelParams& params, const SparseVec& question,
                                     const CandidateSet& candidates,
                                     std::span<const std::uint32_t> pool = {});

// Loss of a trace for gold positions (indices into trace.candidates),
// computed from the logits with log-sum-exp.
double TraceLoss(const HopTrace& trace, std::span<const std::uint32_t> gold_positions);

// Vector-level gradients: each term pairs a feature vector with the gradient
// of its embedding. Scattering term.vec * phi[j] into column j of A yields
// the matrix gradient. The output side is a rank-one matrix:
// dB = b_query * b_features^T.
struct GradientTerm {
  const SparseVec* phi;
  DenseVec vec;
};
struct GradientTerms {
  std::vector<GradientTerm> a_terms;
  DenseVec b_query;     // q_{H+1}
  DenseVec b_features;  // sum_c dL/dz_c * Phi_Y(y_c)
  std::vector<DenseMat> dR;
  double loss = 0.0;
};
GradientTerms BackwardTerms(const ModelParams& params, const HopTrace& trace,
                            std::span<const std::uint32_t> gold_positions);

// Exact gradient of TraceLoss w.r.t. A, B and every R_j. For tied params
// dA and dB are still reported separately; the shared gradient is dA + dB.
GradientSet Backward(const ModelParams& params, const HopTrace& trace,
                     std::span<const std::uint32_t> gold_positions);

struct RankedCandidate {
  std::uint32_t id;
  double score;  // final softmax probability
};

// Candidates by probability descending, ties by id ascending.
std::vector<RankedCandidate> Rank(const HopTrace& trace, const CandidateSet& candidates);

// Hashes the question, runs the forward pass and ranks.
std::vector<RankedCandidate> Predict(const ModelParams& params, const SparseVec& question,
                                     const MemoryStore& store, const CandidateSet& candidates,
                                     bool use_hashing = true);

}  // namespace kvmemnn

#endif  // KVMEMNN_MODEL_H_
