#ifndef KVMEMNN_VOCABULARY_H_
#define KVMEMNN_VOCABULARY_H_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kvmemnn/numerics.h"

namespace kvmemnn {

// Dictionary of D base tokens. With center encoding the feature space doubles
// to 2D and id + D addresses the second ("center/value") copy of a token.
class Vocabulary {
 public:
  Vocabulary() = default;

  // Reserved tokens (_window_, _title_, _number_) always occupy ids 0..2.
  static Vocabulary WithReserved();

  std::uint32_t Add(std::string_view token, std::uint64_t count = 1);
  std::optional<std::uint32_t> Find(std::string_view token) const;
  const std::string& Token(std::uint32_t id) const { return id_to_token_.at(id); }
  std::uint64_t Frequency(std::uint32_t id) const { return counts_.at(id); }

  std::size_t base_size() const { return id_to_token_.size(); }
  bool center_encoded() const { return center_encoded_; }
  void set_center_encoded(bool on) { center_encoded_ = on; }
  // D, or 2D under center encoding.
  std::size_t feature_dim() const { return center_encoded_ ? 2 * base_size() : base_size(); }

  const std::vector<std::string>& tokens() const { return id_to_token_; }

  // FNV-1a over the ordered token list and the encoding flag.
  std::uint64_t Hash() const;

 private:
  std::unordered_map<std::string, std::uint32_t> token_to_id_;
  std::vector<std::string> id_to_token_;
  std::vector<std::uint64_t> counts_;
  bool center_encoded_ = false;
};

enum class Bank { kQuestion, kKey, kValueCenter };
enum class Weighting { kCount, kBinary };

// Bag-of-words over the vocabulary. OOV tokens are dropped. kValueCenter maps
// into the second bank and requires a center-encoded vocabulary.
SparseVec Bow(const std::vector<std::string>& tokens, const Vocabulary& vocab,
              Bank bank = Bank::kQuestion, Weighting weighting = Weighting::kCount);

std::uint64_t Fnv1a(std::string_view bytes, std::uint64_t seed = 1469598103934665603ULL);

}  // namespace kvmemnn

#endif  // KVMEMNN_VOCABULARY_H_
