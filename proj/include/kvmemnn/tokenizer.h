#ifndef KVMEMNN_TOKENIZER_H_
#define KVMEMNN_TOKENIZER_H_

#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace kvmemnn {

inline constexpr std::string_view kWindowToken = "_window_";
inline constexpr std::string_view kTitleToken = "_title_";
inline constexpr std::string_view kNumberToken = "_number_";

// Lowercases, deletes apostrophes and turns every other character outside
// [a-z0-9_] into a word break.
std::vector<std::string> SplitWords(std::string_view text);

// Multi-word entity table used to collapse entity mentions into one token.
class EntityDictionary {
 public:
  EntityDictionary() = default;

  // Returns the entity token ("Blade Runner" -> "blade_runner"). Throws
  // ConfigError for names that normalize to nothing.
  const std::string& Add(std::string_view name);

  bool ContainsToken(std::string_view token) const { return tokens_.contains(std::string(token)); }
  std::size_t size() const { return tokens_.size(); }
  const std::unordered_set<std::string>& tokens() const { return tokens_; }

  // Longest entity phrase starting at words[pos]; 0 when none matches.
  std::size_t MatchLength(const std::vector<std::string>& words, std::size_t pos) const;

  static std::string TokenFor(std::string_view name);

 private:
  std::unordered_set<std::string> tokens_;
  // First word -> word counts of entities starting with it, longest first.
  std::unordered_map<std::string, std::vector<std::size_t>> lengths_by_head_;
  std::unordered_set<std::string> phrases_;  // words joined by '_'
};

// Lowercased, punctuation-stripped tokens; entity phrases collapse to single
// tokens by greedy longest match, left to right.
std::vector<std::string> Tokenize(std::string_view text, const EntityDictionary& entities);

// Numbers and the bigram "how many" become `_number_`.
std::vector<std::string> MarkNumbers(const std::vector<std::string>& tokens);

bool IsNumber(std::string_view token);

std::string JoinTokens(const std::vector<std::string>& tokens);

}  // namespace kvmemnn

#endif  // KVMEMNN_TOKENIZER_H_
