#include "kvmemnn/tokenizer.h"

#include <algorithm>
#include <cctype>

#include "kvmemnn/numerics.h"

namespace kvmemnn {

std::vector<std::string> SplitWords(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (c == '\'') continue;
    if (std::isalnum(c) || c == '_') {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

std::string JoinTokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::string EntityDictionary::TokenFor(std::string_view name) {
  const auto words = SplitWords(name);
  std::string token;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) token.push_back('_');
    token += words[i];
  }
  return token;
}

const std::string& EntityDictionary::Add(std::string_view name) {
  const auto words = SplitWords(name);
  if (words.empty()) throw ConfigError("entity name normalizes to empty: '" + std::string(name) + "'");
  auto [it, inserted] = tokens_.insert(TokenFor(name));
  if (inserted) {
    phrases_.insert(*it);
    auto& lengths = lengths_by_head_[words.front()];
    if (std::find(lengths.begin(), lengths.end(), words.size()) == lengths.end()) {
      lengths.push_back(words.size());
      std::sort(lengths.rbegin(), lengths.rend());
    }
  }
  return *it;
}

std::size_t EntityDictionary::MatchLength(const std::vector<std::string>& words,
                                          std::size_t pos) const {
  auto head = lengths_by_head_.find(words[pos]);
  if (head == lengths_by_head_.end()) return 0;
  for (std::size_t len : head->second) {
    if (pos + len > words.size()) continue;
    std::string phrase = words[pos];
    for (std::size_t k = 1; k < len; ++k) {
      phrase.push_back('_');
      phrase += words[pos + k];
    }
    if (phrases_.contains(phrase)) return len;
  }
  return 0;
}

std::vector<std::string> Tokenize(std::string_view text, const EntityDictionary& entities) {
  const auto words = SplitWords(text);
  std::vector<std::string> tokens;
  tokens.reserve(words.size());
  std::size_t pos = 0;
  while (pos < words.size()) {
    const std::size_t len = entities.MatchLength(words, pos);
    if (len <= 1) {
      tokens.push_back(words[pos]);
      ++pos;
      continue;
    }
    std::string token = words[pos];
    for (std::size_t k = 1; k < len; ++k) {
      token.push_back('_');
      token += words[pos + k];
    }
    tokens.push_back(std::move(token));
    pos += len;
  }
  return tokens;
}

bool IsNumber(std::string_view token) {
  if (token.empty()) return false;
  bool digit = false;
  for (char c : token) {
    if (std::isdigit(static_cast<unsigned char>(c))) {
      digit = true;
    } else if (c != '.' && c != ',') {
      return false;
    }
  }
  return digit;
}

std::vector<std::string> MarkNumbers(const std::vector<std::string>& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] == "how" && i + 1 < tokens.size() && tokens[i + 1] == "many") {
      out.emplace_back(kNumberToken);
      ++i;
    } else if (IsNumber(tokens[i])) {
      out.emplace_back(kNumberToken);
    } else {
      out.push_back(tokens[i]);
    }
  }
  return out;
}

}  // namespace kvmemnn
