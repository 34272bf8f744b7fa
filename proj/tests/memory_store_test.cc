#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "kvmemnn/memory_store.h"
#include "test_util.h"

namespace kvmemnn {
namespace {

std::vector<MemorySlot> RandomSlots(std::size_t n, std::size_t dim, std::mt19937_64& rng) {
  // Zipf-ish vocabulary so that some words are frequent and some rare.
  std::vector<double> weights(dim);
  for (std::size_t i = 0; i < dim; ++i) weights[i] = 1.0 / static_cast<double>(i + 1);
  std::discrete_distribution<std::uint32_t> word(weights.begin(), weights.end());
  std::vector<MemorySlot> slots(n);
  for (auto& s : slots) {
    std::vector<SparseVec::Entry> e;
    const std::size_t len = 1 + rng() % 5;
    for (std::size_t k = 0; k < len; ++k) e.emplace_back(word(rng), 1.0);
    s.key = SparseVec::FromUnsorted(dim, e);
    s.value = s.key;
  }
  return slots;
}

// Reference: slots sharing a word whose key-corpus count is below F.
std::vector<std::uint32_t> BruteForce(const std::vector<MemorySlot>& slots, const SparseVec& q,
                                      std::size_t F, bool filter) {
  std::map<std::uint32_t, double> freq;
  for (const auto& s : slots) for (auto [i, w] : s.key.entries()) freq[i] += w;
  std::vector<std::uint32_t> out;
  for (std::uint32_t s = 0; s < slots.size(); ++s) {
    for (auto [t, qw] : q.entries()) {
      if (slots[s].key.Get(t) == 0.0) continue;
      if (filter && !(freq[t] < static_cast<double>(F))) continue;
      out.push_back(s);
      break;
    }
  }
  return out;
}

TEST(MemoryStore, HashEqualsBruteForceFilter) {
  std::mt19937_64 rng(31);
  const std::size_t dim = 300;
  for (std::size_t n : {10u, 200u, 2000u}) {
    auto slots = RandomSlots(n, dim, rng);
    for (std::size_t F : {std::size_t{1}, std::size_t{5}, std::size_t{50}, kNoFrequencyFilter}) {
      auto store = MemoryStore::Build(slots, dim, F, n);
      for (int trial = 0; trial < 30; ++trial) {
        auto q = testing::RandomSparse(dim, 4, rng, true);
        auto got = store.Hash(q);
        auto want = BruteForce(slots, q, F, true);
        if (!want.empty()) {
          EXPECT_FALSE(got.fallback);
          EXPECT_EQ(got.slots, want) << "n=" << n << " F=" << F;
        } else {
          EXPECT_TRUE(got.fallback);
          auto unfiltered = BruteForce(slots, q, F, false);
          if (!unfiltered.empty()) {
            EXPECT_EQ(got.slots, unfiltered);
          }
        }
      }
    }
  }
}

TEST(MemoryStore, LargerThresholdNeverShrinksTheFilter) {
  std::mt19937_64 rng(37);
  auto slots = RandomSlots(500, 100, rng);
  for (int trial = 0; trial < 40; ++trial) {
    auto q = testing::RandomSparse(100, 3, rng, true);
    std::vector<std::uint32_t> previous;
    for (std::size_t F : {2u, 5u, 20u, 80u, 400u, 100000u}) {
      auto r = MemoryStore::Build(slots, 100, F, 10000).Hash(q);
      if (r.fallback) continue;
      EXPECT_TRUE(std::includes(r.slots.begin(), r.slots.end(), previous.begin(), previous.end()));
      previous = r.slots;
    }
  }
}

TEST(MemoryStore, CapKeepsHighestOverlapWithLowIdTies) {
  const std::size_t dim = 4;
  std::vector<MemorySlot> slots(4);
  slots[0].key = SparseVec::FromUnsorted(dim, {{0, 1}});
  slots[1].key = SparseVec::FromUnsorted(dim, {{0, 1}, {1, 1}});
  slots[2].key = SparseVec::FromUnsorted(dim, {{1, 1}});
  slots[3].key = SparseVec::FromUnsorted(dim, {{0, 1}, {1, 1}});
  auto store = MemoryStore::Build(slots, dim, 100, 3);
  auto r = store.Hash(SparseVec::FromUnsorted(dim, {{0, 1}, {1, 1}}));
  EXPECT_EQ(r.slots, (std::vector<std::uint32_t>{0, 1, 3}));
}

TEST(MemoryStore, DisjointKeysGiveSingletonPostings) {
  std::vector<MemorySlot> slots(3);
  for (std::uint32_t s = 0; s < 3; ++s) slots[s].key = SparseVec::FromUnsorted(6, {{2 * s, 1}, {2 * s + 1, 1}});
  auto store = MemoryStore::Build(slots, 6, 10, 10);
  for (std::uint32_t t = 0; t < 6; ++t) EXPECT_EQ(store.postings()[t], std::vector<std::uint32_t>{t / 2});
}

TEST(MemoryStore, FallsBackWhenEveryWordIsFrequent) {
  std::vector<MemorySlot> slots(5);
  for (auto& s : slots) s.key = SparseVec::FromUnsorted(3, {{0, 1}});
  slots[4].key = SparseVec::FromUnsorted(3, {{0, 1}, {1, 1}});
  auto store = MemoryStore::Build(slots, 3, 2, 3);
  EXPECT_FALSE(store.indexed(0));
  auto r = store.Hash(SparseVec::FromUnsorted(3, {{0, 1}}));
  EXPECT_TRUE(r.fallback);
  EXPECT_EQ(r.slots, (std::vector<std::uint32_t>{0, 1, 2}));
  // No shared word at all: the first max_hashed slots.
  auto none = store.Hash(SparseVec::FromUnsorted(3, {{2, 1}}));
  EXPECT_TRUE(none.fallback);
  EXPECT_EQ(none.slots, (std::vector<std::uint32_t>{0, 1, 2}));
}

TEST(MemoryStore, CenterBankFoldsOntoBaseToken) {
  std::vector<MemorySlot> slots(2);
  slots[0].key = SparseVec::FromUnsorted(8, {{1, 1}, {6, 1}});  // 6 is the value-bank copy of 2
  slots[1].key = SparseVec::FromUnsorted(8, {{3, 1}});
  auto store = MemoryStore::Build(slots, 4, 10, 10);
  EXPECT_EQ(store.key_frequency()[2], 1u);
  EXPECT_EQ(store.Hash(SparseVec::FromUnsorted(8, {{2, 1}})).slots, std::vector<std::uint32_t>{0});
}

TEST(MemoryStore, RecallAndCorruptParts) {
  std::vector<MemorySlot> slots(2);
  slots[0].key = SparseVec::FromUnsorted(3, {{0, 1}});
  slots[1].key = SparseVec::FromUnsorted(3, {{1, 1}});
  auto store = MemoryStore::Build(slots, 3, 10, 10);
  std::vector<SparseVec> qs = {SparseVec::FromUnsorted(3, {{0, 1}}), SparseVec::FromUnsorted(3, {{1, 1}})};
  EXPECT_DOUBLE_EQ(HashRecall(store, qs, {{0}, {0}}), 0.5);
  EXPECT_DOUBLE_EQ(HashRecall(store, qs, {{0}, {}}), 0.5);
  EXPECT_THROW(MemoryStore::FromParts(slots, 3, 10, 10, {1, 1, 0}, {{0}, {1, 1}, {}}), DataError);
  EXPECT_THROW(MemoryStore::FromParts(slots, 3, 10, 10, {1, 1, 0}, {{0}, {5}, {}}), DataError);
  EXPECT_THROW(MemoryStore::Build(slots, 3, 0, 10), ConfigError);
}

}  // namespace
}  // namespace kvmemnn
