#include "kvmemnn/memory_store.h"

#include <algorithm>
#include <numeric>
#include <string>

namespace kvmemnn {

MemoryStore MemoryStore::Build(std::vector<MemorySlot> slots, std::size_t base_dim,
                               std::size_t freq_threshold, std::size_t max_hashed) {
  if (freq_threshold < 1) throw ConfigError("frequency threshold F must be >= 1");
  if (max_hashed < 1) throw ConfigError("max hashed slots must be >= 1");
  if (base_dim < 1) throw ConfigError("memory store needs a nonempty dictionary");
  MemoryStore store;
  store.slots_ = std::move(slots);
  store.base_dim_ = base_dim;
  store.freq_threshold_ = freq_threshold;
  store.max_hashed_ = max_hashed;
  store.key_frequency_.assign(base_dim, 0);
  store.postings_.assign(base_dim, {});

  for (const auto& slot : store.slots_) {
    for (const auto& [id, w] : slot.key.entries()) {
      store.key_frequency_[store.Base(id)] += static_cast<std::uint64_t>(std::max(1.0, w));
    }
  }
  for (std::uint32_t s = 0; s < store.slots_.size(); ++s) {
    for (std::uint32_t token : store.DistinctBaseTokens(store.slots_[s].key)) {
      if (store.key_frequency_[token] < freq_threshold) store.postings_[token].push_back(s);
    }
  }
  return store;
}

MemoryStore MemoryStore::FromParts(std::vector<MemorySlot> slots, std::size_t base_dim,
                                   std::size_t freq_threshold, std::size_t max_hashed,
                                   std::vector<std::uint64_t> key_frequency,
                                   std::vector<std::vector<std::uint32_t>> postings) {
  if (key_frequency.size() != base_dim || postings.size() != base_dim) {
    throw DataError("memory store: index tables do not match dictionary size");
  }
  for (const auto& list : postings) {
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (list[i] >= slots.size() || (i > 0 && list[i] <= list[i - 1])) {
        throw DataError("memory store: corrupt postings list");
      }
    }
  }
  MemoryStore store;
  store.slots_ = std::move(slots);
  store.base_dim_ = base_dim;
  store.freq_threshold_ = freq_threshold;
  store.max_hashed_ = max_hashed;
  store.key_frequency_ = std::move(key_frequency);
  store.postings_ = std::move(postings);
  return store;
}

std::vector<std::uint32_t> MemoryStore::DistinctBaseTokens(const SparseVec& v) const {
  std::vector<std::uint32_t> out;
  out.reserve(v.nnz());
  for (const auto& [id, w] : v.entries()) out.push_back(Base(id));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::uint32_t> MemoryStore::TopByOverlap(
    const std::vector<std::uint32_t>& counts) const {
  std::vector<std::uint32_t> hit;
  for (std::uint32_t s = 0; s < counts.size(); ++s) {
    if (counts[s] > 0) hit.push_back(s);
  }
  if (hit.size() > max_hashed_) {
    std::stable_sort(hit.begin(), hit.end(), [&counts](std::uint32_t a, std::uint32_t b) {
      return counts[a] > counts[b];
    });
    hit.resize(max_hashed_);
    std::sort(hit.begin(), hit.end());
  }
  return hit;
}

HashResult MemoryStore::Hash(const SparseVec& question) const {
  const auto tokens = DistinctBaseTokens(question);
  std::vector<std::uint32_t> counts(slots_.size(), 0);
  for (std::uint32_t t : tokens) {
    for (std::uint32_t s : postings_[t]) ++counts[s];
  }
  HashResult result;
  result.slots = TopByOverlap(counts);
  if (!result.slots.empty()) return result;

  result.fallback = true;
  std::fill(counts.begin(), counts.end(), 0);
  for (std::uint32_t s = 0; s < slots_.size(); ++s) {
    const auto key_tokens = DistinctBaseTokens(slots_[s].key);
    for (std::uint32_t t : tokens) {
      if (std::binary_search(key_tokens.begin(), key_tokens.end(), t)) ++counts[s];
    }
  }
  result.slots = TopByOverlap(counts);
  if (result.slots.empty()) {
    result.slots.resize(std::min(max_hashed_, slots_.size()));
    std::iota(result.slots.begin(), result.slots.end(), 0u);
  }
  return result;
}

std::vector<std::uint32_t> MemoryStore::AllSlots() const {
  std::vector<std::uint32_t> all(slots_.size());
  std::iota(all.begin(), all.end(), 0u);
  return all;
}

double HashRecall(const MemoryStore& store, const std::vector<SparseVec>& questions,
                  const std::vector<std::vector<std::uint32_t>>& gold_slots) {
  if (questions.size() != gold_slots.size()) {
    throw ConfigError("hash_recall: questions and gold annotations differ in length");
  }
  if (questions.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    const auto hashed = store.Hash(questions[i]).slots;
    for (std::uint32_t g : gold_slots[i]) {
      if (std::binary_search(hashed.begin(), hashed.end(), g)) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(questions.size());
}

}  // namespace kvmemnn
