#include "kvmemnn/model.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace kvmemnn {

void CandidateSet::Add(std::uint32_t id, SparseVec features) {
  if (index_.contains(id)) throw ConfigError("duplicate candidate id " + std::to_string(id));
  if (features.empty()) throw ConfigError("candidate " + std::to_string(id) + " has no features");
  index_.emplace(id, ids_.size());
  ids_.push_back(id);
  features_.push_back(std::move(features));
}

std::int64_t CandidateSet::IndexOf(std::uint32_t id) const {
  auto it = index_.find(id);
  return it == index_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

MemoryView MemoryView::Of(const MemoryStore& store, std::span<const std::uint32_t> slot_ids) {
  MemoryView view;
  view.keys.reserve(slot_ids.size());
  view.values.reserve(slot_ids.size());
  for (std::uint32_t id : slot_ids) {
    const auto& s = store.slot(id);
    view.keys.push_back(&s.key);
    view.values.push_back(&s.value);
  }
  return view;
}

MemoryView MemoryView::Of(const std::vector<MemorySlot>& slots) {
  MemoryView view;
  for (const auto& s : slots) {
    view.keys.push_back(&s.key);
    view.values.push_back(&s.value);
  }
  return view;
}

std::size_t HopTrace::ArgMax(const CandidateSet& set) const {
  std::size_t best = 0;
  for (std::size_t c = 1; c < logits.size(); ++c) {
    if (logits[c] > logits[best] ||
        (logits[c] == logits[best] && set.id(candidates[c]) < set.id(candidates[best]))) {
      best = c;
    }
  }
  return best;
}

namespace {

// out[0..d) = M * phi
void EmbedTo(const DenseMat& m, const SparseVec& phi, double* out) {
  if (phi.dim() != m.cols()) {
    throw ConfigError("embed: feature dim " + std::to_string(phi.dim()) +
                      " does not match matrix cols " + std::to_string(m.cols()));
  }
  const std::size_t d = m.rows();
  std::fill(out, out + d, 0.0);
  for (const auto& [j, w] : phi.entries()) {
    for (std::size_t i = 0; i < d; ++i) out[i] += m(i, j) * w;
  }
}

HopTrace RunForward(const ModelParams& params, std::size_t hops, const SparseVec& question,
                    const MemoryView& memory, const CandidateSet& candidates,
                    std::span<const std::uint32_t> pool) {
  if (candidates.empty()) throw ConfigError("forward: empty candidate set");
  if (hops > 0 && memory.size() == 0) throw ConfigError("forward: no memory slots to address");
  if (hops > params.R.size()) throw ConfigError("forward: fewer R matrices than hops");

  const std::size_t d = params.dim();
  const DenseMat& A = params.A;
  const DenseMat& B = params.output_embedding();

  HopTrace t;
  t.dim = d;
  t.question = &question;
  t.keys = memory.keys;
  t.values = memory.values;
  if (pool.empty()) {
    t.candidates.resize(candidates.size());
    std::iota(t.candidates.begin(), t.candidates.end(), 0u);
  } else {
    t.candidates.assign(pool.begin(), pool.end());
  }

  const std::size_t n = hops > 0 ? memory.size() : 0;
  t.key_embeddings.resize(n * d);
  t.value_embeddings.resize(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    EmbedTo(A, *memory.keys[i], &t.key_embeddings[i * d]);
    EmbedTo(A, *memory.values[i], &t.value_embeddings[i * d]);
  }

  t.queries.push_back(Embed(A, question));
  for (std::size_t h = 0; h < hops; ++h) {
    const DenseVec& q = t.queries.back();
    DenseVec scores(n);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = Dot(q, std::span<const double>(&t.key_embeddings[i * d], d));
    }
    DenseVec p = Softmax(scores);
    DenseVec o(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* v = &t.value_embeddings[i * d];
      for (std::size_t k = 0; k < d; ++k) o[k] += p[i] * v[k];
    }
    DenseVec sum(d);
    for (std::size_t k = 0; k < d; ++k) sum[k] = q[k] + o[k];
    t.queries.push_back(MatVec(params.R[h], sum));
    t.addressing.push_back(std::move(p));
    t.outputs.push_back(std::move(o));
  }

  // z_c = q . B phi_c = (B^T q) . phi_c; B^T q walks B row by row.
  t.feature_scores = MatTransposeVec(B, t.queries.back());
  const std::size_t c_count = t.candidates.size();
  t.candidate_features.resize(c_count);
  t.logits.resize(c_count);
  for (std::size_t c = 0; c < c_count; ++c) {
    if (t.candidates[c] >= candidates.size()) {
      throw ConfigError("forward: candidate pool index out of range");
    }
    const SparseVec& phi = candidates.features(t.candidates[c]);
    if (phi.dim() != B.cols()) throw ConfigError("forward: candidate feature dim mismatch");
    t.candidate_features[c] = &phi;
    double z = 0.0;
    for (const auto& [j, w] : phi.entries()) z += w * t.feature_scores[j];
    t.logits[c] = z;
  }
  t.distribution = Softmax(t.logits);
  return t;
}

double LogSumExp(std::span<const double> z, std::span<const std::uint32_t> which) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::uint32_t i : which) mx = std::max(mx, z[i]);
  double s = 0.0;
  for (std::uint32_t i : which) s += std::exp(z[i] - mx);
  return mx + std::log(s);
}

std::vector<std::uint32_t> UniquePositions(std::span<const std::uint32_t> gold, std::size_t n) {
  if (gold.empty()) throw DataError("loss: empty gold set");
  std::vector<std::uint32_t> g(gold.begin(), gold.end());
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  if (g.back() >= n) throw DataError("loss: gold position out of range");
  return g;
}

}  // namespace

HopTrace Forward(const ModelParams& params, const SparseVec& question, const MemoryView& memory,
                 const CandidateSet& candidates, std::span<const std::uint32_t> pool) {
  return RunForward(params, params.hops(), question, memory, candidates, pool);
}

HopTrace SupervisedEmbeddingsForward(const ModelParams& params, const SparseVec& question,
                                     const CandidateSet& candidates,
                                     std::span<const std::uint32_t> pool) {
  return RunForward(params, 0, question, MemoryView{}, candidates, pool);
}

double TraceLoss(const HopTrace& trace, std::span<const std::uint32_t> gold_positions) {
  const auto gold = UniquePositions(gold_positions, trace.logits.size());
  std::vector<std::uint32_t> all(trace.logits.size());
  std::iota(all.begin(), all.end(), 0u);
  return LogSumExp(trace.logits, all) - LogSumExp(trace.logits, gold);
}

GradientTerms BackwardTerms(const ModelParams& params, const HopTrace& trace,
                            std::span<const std::uint32_t> gold_positions) {
  const std::size_t d = trace.dim;
  const std::size_t hops = trace.hops();
  const std::size_t n = trace.keys.size();
  const std::size_t c_count = trace.candidates.size();
  const auto gold = UniquePositions(gold_positions, c_count);

  GradientTerms g;
  g.loss = TraceLoss(trace, gold);
  for (std::size_t h = 0; h < hops; ++h) g.dR.emplace_back(d, d);

  // dL/dz_c = p_c - [c in gold] p_c / P(gold)
  const double lse_gold = LogSumExp(trace.logits, gold);
  DenseVec dz = trace.distribution;
  for (std::uint32_t c : gold) dz[c] -= std::exp(trace.logits[c] - lse_gold);

  // dz flows to B through the summed candidate features g: dB = q g^T and
  // dq = B g.
  const DenseMat& B = params.output_embedding();
  DenseVec feat(B.cols(), 0.0);
  for (std::size_t c = 0; c < c_count; ++c) {
    if (dz[c] == 0.0) continue;
    for (const auto& [j, w] : trace.candidate_features[c]->entries()) feat[j] += dz[c] * w;
  }
  DenseVec dq = MatVec(B, feat);
  g.b_query = trace.queries.back();
  g.b_features = std::move(feat);

  std::vector<double> dkeys(n * d, 0.0);
  std::vector<double> dvalues(n * d, 0.0);
  for (std::size_t h = hops; h-- > 0;) {
    const DenseVec& q = trace.queries[h];
    const DenseVec& o = trace.outputs[h];
    const DenseVec& p = trace.addressing[h];
    const DenseMat& R = params.R[h];
    // q_{h+1} = R (q_h + o_h)
    DenseMat& dR = g.dR[h];
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) dR(i, j) += dq[i] * (q[j] + o[j]);
    }
    const DenseVec dsum = MatTransposeVec(R, dq);

    // o = sum_i p_i V_i, p = softmax(q . K_i)
    DenseVec dp(n);
    double weighted = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* v = &trace.value_embeddings[i * d];
      double* dv = &dvalues[i * d];
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        dv[k] += p[i] * dsum[k];
        acc += dsum[k] * v[k];
      }
      dp[i] = acc;
      weighted += p[i] * acc;
    }
    DenseVec next = dsum;
    for (std::size_t i = 0; i < n; ++i) {
      const double ds = p[i] * (dp[i] - weighted);
      if (ds == 0.0) continue;
      const double* key = &trace.key_embeddings[i * d];
      double* dk = &dkeys[i * d];
      for (std::size_t k = 0; k < d; ++k) {
        next[k] += ds * key[k];
        dk[k] += ds * q[k];
      }
    }
    dq = std::move(next);
  }

  g.a_terms.reserve(1 + 2 * n);
  g.a_terms.push_back({trace.question, std::move(dq)});
  for (std::size_t i = 0; i < n; ++i) {
    g.a_terms.push_back({trace.keys[i], DenseVec(dkeys.begin() + i * d, dkeys.begin() + (i + 1) * d)});
    g.a_terms.push_back(
        {trace.values[i], DenseVec(dvalues.begin() + i * d, dvalues.begin() + (i + 1) * d)});
  }
  return g;
}

GradientSet Backward(const ModelParams& params, const HopTrace& trace,
                     std::span<const std::uint32_t> gold_positions) {
  GradientTerms terms = BackwardTerms(params, trace, gold_positions);
  GradientSet g = GradientSet::ZerosLike(params);
  for (const auto& term : terms.a_terms) {
    for (const auto& [j, w] : term.phi->entries()) {
      for (std::size_t i = 0; i < g.dA.rows(); ++i) g.dA(i, j) += w * term.vec[i];
    }
  }
  for (std::size_t i = 0; i < g.dB.rows(); ++i) {
    for (std::size_t j = 0; j < g.dB.cols(); ++j) g.dB(i, j) += terms.b_query[i] * terms.b_features[j];
  }
  for (std::size_t h = 0; h < terms.dR.size(); ++h) g.dR[h] = std::move(terms.dR[h]);
  return g;
}

std::vector<RankedCandidate> Rank(const HopTrace& trace, const CandidateSet& candidates) {
  std::vector<std::size_t> order(trace.candidates.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (trace.logits[a] != trace.logits[b]) return trace.logits[a] > trace.logits[b];
    return candidates.id(trace.candidates[a]) < candidates.id(trace.candidates[b]);
  });
  std::vector<RankedCandidate> ranked;
  ranked.reserve(order.size());
  for (std::size_t c : order) {
    ranked.push_back({candidates.id(trace.candidates[c]), trace.distribution[c]});
  }
  return ranked;
}

std::vector<RankedCandidate> Predict(const ModelParams& params, const SparseVec& question,
                                     const MemoryStore& store, const CandidateSet& candidates,
                                     bool use_hashing) {
  const auto ids = use_hashing ? store.Hash(question).slots : store.AllSlots();
  return Rank(Forward(params, question, MemoryView::Of(store, ids), candidates), candidates);
}

}  // namespace kvmemnn
