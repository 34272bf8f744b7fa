#ifndef KVMEMNN_MEMORY_STORE_H_
#define KVMEMNN_MEMORY_STORE_H_

#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "kvmemnn/featurize.h"
#include "kvmemnn/numerics.h"

namespace kvmemnn {

inline constexpr std::size_t kNoFrequencyFilter = std::numeric_limits<std::size_t>::max();

struct HashResult {
  std::vector<std::uint32_t> slots;  // ascending slot ids
  bool fallback = false;             // no sub-threshold word was shared
};

// All memory slots plus an inverted index from base token id to the slots
// whose key contains it. Tokens whose key-corpus frequency is >= F carry no
// postings. Center-bank ids are folded onto their base token.
class MemoryStore {
 public:
  MemoryStore() = default;

  static MemoryStore Build(std::vector<MemorySlot> slots, std::size_t base_dim,
                           std::size_t freq_threshold, std::size_t max_hashed);

  // Restores a serialized store. Throws DataError if a postings list is
  // unsorted, duplicated or references a missing slot.
  static MemoryStore FromParts(std::vector<MemorySlot> slots, std::size_t base_dim,
                               std::size_t freq_threshold, std::size_t max_hashed,
                               std::vector<std::uint64_t> key_frequency,
                               std::vector<std::vector<std::uint32_t>> postings);

  // Slots sharing at least one indexed word with the question, capped at
  // max_hashed by overlap count (ties to the lower id). Falls back to
  // unfiltered overlap, then to the first max_hashed slots.
  HashResult Hash(const SparseVec& question) const;

  // Every slot id; used when hashing is disabled.
  std::vector<std::uint32_t> AllSlots() const;

  const std::vector<MemorySlot>& slots() const { return slots_; }
  const MemorySlot& slot(std::uint32_t id) const { return slots_.at(id); }
  std::size_t size() const { return slots_.size(); }
  std::size_t base_dim() const { return base_dim_; }
  std::size_t freq_threshold() const { return freq_threshold_; }
  std::size_t max_hashed() const { return max_hashed_; }
  const std::vector<std::uint64_t>& key_frequency() const { return key_frequency_; }
  const std::vector<std::vector<std::uint32_t>>& postings() const { return postings_; }
  bool indexed(std::uint32_t base_token) const { return !postings_[base_token].empty(); }

 private:
  std::uint32_t Base(std::uint32_t id) const {
    return static_cast<std::uint32_t>(id % base_dim_);
  }
  std::vector<std::uint32_t> DistinctBaseTokens(const SparseVec& v) const;
  std::vector<std::uint32_t> TopByOverlap(const std::vector<std::uint32_t>& counts) const;

  std::vector<MemorySlot> slots_;
  std::size_t base_dim_ = 0;
  std::size_t freq_threshold_ = 1000;
  std::size_t max_hashed_ = 1000;
  std::vector<std::uint64_t> key_frequency_;
  std::vector<std::vector<std::uint32_t>> postings_;
};

// Fraction of questions for which at least one of their gold slots survives
// hashing. Questions with no gold slot annotation count as misses.
double HashRecall(const MemoryStore& store, const std::vector<SparseVec>& questions,
                  const std::vector<std::vector<std::uint32_t>>& gold_slots);

}  // namespace kvmemnn

#endif  // KVMEMNN_MEMORY_STORE_H_
