#ifndef KVMEMNN_FEATURIZE_H_
#define KVMEMNN_FEATURIZE_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "kvmemnn/numerics.h"
#include "kvmemnn/tokenizer.h"
#include "kvmemnn/vocabulary.h"

namespace kvmemnn {

struct KBTriple {
  std::string subject;
  std::string relation;  // e.g. "directed_by"; "!directed_by" for a reversed edge
  std::string object;

  bool operator==(const KBTriple&) const = default;
};

// "!r" for r, and r for "!r".
std::string ReverseRelation(const std::string& relation);
KBTriple Reverse(const KBTriple& t);

// A tokenized document.
struct Document {
  std::string title;  // entity token of the title
  std::vector<std::vector<std::string>> sentences;
};

struct Provenance {
  enum class Source { kTriple, kDocument } source = Source::kTriple;
  std::uint32_t source_id = 0;  // triple index or document index
  std::uint32_t sentence = 0;
  std::uint32_t begin = 0;  // token span [begin, end) within the sentence
  std::uint32_t end = 0;
  bool reversed = false;    // KB slot built from the reversed edge
  bool title_slot = false;  // window slot whose value is the document title

  bool operator==(const Provenance&) const = default;
};

struct MemorySlot {
  SparseVec key;
  SparseVec value;
  // Candidate ids the value denotes: vocabulary ids of entities, or global
  // sentence ids in sentence-selection mode. May be empty for sentence slots.
  std::vector<std::uint32_t> value_candidates;
  Provenance provenance;

  bool operator==(const MemorySlot&) const = default;
};

struct WindowOptions {
  bool center_encoding = false;
  bool title = false;
};

// Two slots per triple: (subject, relation) -> object and
// (object, !relation) -> subject. Triples whose entities or relation tokens
// are missing from the vocabulary are skipped and counted in *skipped.
std::vector<MemorySlot> KbSlots(const std::vector<KBTriple>& triples, const Vocabulary& vocab,
                                std::size_t* skipped = nullptr);

// One slot per sentence, key == value.
std::vector<MemorySlot> SentenceSlots(const Document& doc, std::uint32_t doc_id,
                                      const Vocabulary& vocab, const EntityDictionary& entities);

// Entity-centered windows of `window` tokens (odd), truncated at sentence
// boundaries. Throws ConfigError on an even window.
std::vector<MemorySlot> WindowSlots(const Document& doc, std::uint32_t doc_id, std::size_t window,
                                    const Vocabulary& vocab, const EntityDictionary& entities,
                                    WindowOptions options = {});

// Window key, whole-sentence value; value_candidates = {first_sentence_id + s}.
std::vector<MemorySlot> WindowSentenceSlots(const Document& doc, std::uint32_t doc_id,
                                            std::uint32_t first_sentence_id, std::size_t window,
                                            const Vocabulary& vocab,
                                            const EntityDictionary& entities);

// Standard MemNN memories: key and value both become key + value (or stay as
// they are when already identical).
std::vector<MemorySlot> CollapseKeyValue(std::vector<MemorySlot> slots);

}  // namespace kvmemnn

#endif  // KVMEMNN_FEATURIZE_H_
