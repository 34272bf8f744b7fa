#include "kvmemnn/vocabulary.h"

#include "kvmemnn/tokenizer.h"

namespace kvmemnn {

std::uint64_t Fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

Vocabulary Vocabulary::WithReserved() {
  Vocabulary v;
  v.Add(kWindowToken, 0);
  v.Add(kTitleToken, 0);
  v.Add(kNumberToken, 0);
  return v;
}

std::uint32_t Vocabulary::Add(std::string_view token, std::uint64_t count) {
  auto it = token_to_id_.find(std::string(token));
  if (it != token_to_id_.end()) {
    counts_[it->second] += count;
    return it->second;
  }
  const auto id = static_cast<std::uint32_t>(id_to_token_.size());
  token_to_id_.emplace(token, id);
  id_to_token_.emplace_back(token);
  counts_.push_back(count);
  return id;
}

std::optional<std::uint32_t> Vocabulary::Find(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  if (it == token_to_id_.end()) return std::nullopt;
  return it->second;
}

std::uint64_t Vocabulary::Hash() const {
  std::uint64_t h = Fnv1a(center_encoded_ ? "center" : "plain");
  for (const auto& t : id_to_token_) {
    h = Fnv1a(t, h);
    h = Fnv1a("\n", h);
  }
  return h;
}

SparseVec Bow(const std::vector<std::string>& tokens, const Vocabulary& vocab, Bank bank,
              Weighting weighting) {
  if (bank == Bank::kValueCenter && !vocab.center_encoded()) {
    throw ConfigError("value-center bank requires a center-encoded vocabulary");
  }
  const auto offset =
      static_cast<std::uint32_t>(bank == Bank::kValueCenter ? vocab.base_size() : 0);
  std::vector<SparseVec::Entry> entries;
  entries.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (auto id = vocab.Find(t)) entries.emplace_back(*id + offset, 1.0);
  }
  SparseVec v = SparseVec::FromUnsorted(vocab.feature_dim(), std::move(entries));
  if (weighting == Weighting::kBinary) {
    std::vector<SparseVec::Entry> binary;
    for (const auto& [i, w] : v.entries()) binary.emplace_back(i, 1.0);
    v = SparseVec::FromUnsorted(vocab.feature_dim(), std::move(binary));
  }
  return v;
}

}  // namespace kvmemnn
