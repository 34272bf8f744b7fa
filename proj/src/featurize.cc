#include "kvmemnn/featurize.h"

#include <algorithm>

namespace kvmemnn {

std::string ReverseRelation(const std::string& relation) {
  if (!relation.empty() && relation.front() == '!') return relation.substr(1);
  return "!" + relation;
}

KBTriple Reverse(const KBTriple& t) { return {t.object, ReverseRelation(t.relation), t.subject}; }

namespace {

std::vector<std::uint32_t> SortedUnique(std::vector<std::uint32_t> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

}  // namespace

std::vector<MemorySlot> KbSlots(const std::vector<KBTriple>& triples, const Vocabulary& vocab,
                                std::size_t* skipped) {
  std::vector<MemorySlot> slots;
  slots.reserve(2 * triples.size());
  std::size_t missing = 0;
  for (std::size_t t = 0; t < triples.size(); ++t) {
    const auto subject = vocab.Find(EntityDictionary::TokenFor(triples[t].subject));
    const auto object = vocab.Find(EntityDictionary::TokenFor(triples[t].object));
    const auto rel = vocab.Find(triples[t].relation);
    const auto rev = vocab.Find(ReverseRelation(triples[t].relation));
    if (!subject || !object || !rel || !rev) {
      ++missing;
      continue;
    }
    const std::size_t dim = vocab.feature_dim();
    auto make = [&](std::uint32_t lhs, std::uint32_t relation, std::uint32_t rhs, bool reversed) {
      MemorySlot s;
      s.key = SparseVec::FromUnsorted(dim, {{lhs, 1.0}, {relation, 1.0}});
      s.value = SparseVec::FromUnsorted(dim, {{rhs, 1.0}});
      s.value_candidates = {rhs};
      s.provenance.source = Provenance::Source::kTriple;
      s.provenance.source_id = static_cast<std::uint32_t>(t);
      s.provenance.reversed = reversed;
      return s;
    };
    slots.push_back(make(*subject, *rel, *object, false));
    slots.push_back(make(*object, *rev, *subject, true));
  }
  if (skipped) *skipped = missing;
  return slots;
}

std::vector<MemorySlot> SentenceSlots(const Document& doc, std::uint32_t doc_id,
                                      const Vocabulary& vocab, const EntityDictionary& entities) {
  std::vector<MemorySlot> slots;
  for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
    const auto& sentence = doc.sentences[s];
    MemorySlot slot;
    slot.key = Bow(sentence, vocab, Bank::kKey);
    if (slot.key.empty()) continue;
    slot.value = slot.key;
    std::vector<std::uint32_t> cands;
    for (const auto& tok : sentence) {
      if (!entities.ContainsToken(tok)) continue;
      if (auto id = vocab.Find(tok)) cands.push_back(*id);
    }
    slot.value_candidates = SortedUnique(std::move(cands));
    slot.provenance = {Provenance::Source::kDocument, doc_id, static_cast<std::uint32_t>(s), 0,
                       static_cast<std::uint32_t>(sentence.size()), false, false};
    slots.push_back(std::move(slot));
  }
  return slots;
}

namespace {

struct Window {
  std::size_t begin;
  std::size_t end;
  std::size_t center;
};

// Entity-centered windows of one sentence, truncated at its edges.
std::vector<Window> EntityWindows(const std::vector<std::string>& sentence, std::size_t window,
                                  const EntityDictionary& entities) {
  if (window == 0 || window % 2 == 0) {
    throw ConfigError("window size must be odd and >= 1, got " + std::to_string(window));
  }
  const std::size_t half = window / 2;
  std::vector<Window> out;
  for (std::size_t c = 0; c < sentence.size(); ++c) {
    if (!entities.ContainsToken(sentence[c])) continue;
    out.push_back({c >= half ? c - half : 0, std::min(sentence.size(), c + half + 1), c});
  }
  return out;
}

}  // namespace

std::vector<MemorySlot> WindowSlots(const Document& doc, std::uint32_t doc_id, std::size_t window,
                                    const Vocabulary& vocab, const EntityDictionary& entities,
                                    WindowOptions options) {
  if (options.center_encoding && !vocab.center_encoded()) {
    throw ConfigError("center encoding requested on a plain vocabulary");
  }
  const std::size_t dim = vocab.feature_dim();
  const auto offset = static_cast<std::uint32_t>(options.center_encoding ? vocab.base_size() : 0);
  const auto window_marker = vocab.Find(kWindowToken);
  const auto title_marker = vocab.Find(kTitleToken);
  const auto title_id = vocab.Find(doc.title);

  std::vector<MemorySlot> slots;
  for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
    const auto& sentence = doc.sentences[s];
    for (const Window& w : EntityWindows(sentence, window, entities)) {
      const auto center_id = vocab.Find(sentence[w.center]);
      if (!center_id) continue;
      std::vector<SparseVec::Entry> key;
      for (std::size_t i = w.begin; i < w.end; ++i) {
        auto id = vocab.Find(sentence[i]);
        if (!id) continue;
        key.emplace_back(i == w.center ? *id + offset : *id, 1.0);
      }
      Provenance prov{Provenance::Source::kDocument, doc_id,
                      static_cast<std::uint32_t>(s),  static_cast<std::uint32_t>(w.begin),
                      static_cast<std::uint32_t>(w.end), false, false};

      MemorySlot plain;
      auto plain_key = key;
      if (options.title && window_marker) plain_key.emplace_back(*window_marker, 1.0);
      plain.key = SparseVec::FromUnsorted(dim, std::move(plain_key));
      plain.value = SparseVec::FromUnsorted(dim, {{*center_id + offset, 1.0}});
      plain.value_candidates = {*center_id};
      plain.provenance = prov;
      slots.push_back(std::move(plain));

      if (options.title && title_id) {
        MemorySlot titled;
        auto title_key = key;
        if (title_marker) title_key.emplace_back(*title_marker, 1.0);
        title_key.emplace_back(*title_id, 1.0);
        titled.key = SparseVec::FromUnsorted(dim, std::move(title_key));
        titled.value = SparseVec::FromUnsorted(dim, {{*title_id + offset, 1.0}});
        titled.value_candidates = {*title_id};
        titled.provenance = prov;
        titled.provenance.title_slot = true;
        slots.push_back(std::move(titled));
      }
    }
  }
  return slots;
}

std::vector<MemorySlot> WindowSentenceSlots(const Document& doc, std::uint32_t doc_id,
                                            std::uint32_t first_sentence_id, std::size_t window,
                                            const Vocabulary& vocab,
                                            const EntityDictionary& entities) {
  std::vector<MemorySlot> slots;
  for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
    const auto& sentence = doc.sentences[s];
    const SparseVec value = Bow(sentence, vocab, Bank::kKey);
    if (value.empty()) continue;
    for (const Window& w : EntityWindows(sentence, window, entities)) {
      std::vector<std::string> tokens(sentence.begin() + static_cast<std::ptrdiff_t>(w.begin),
                                      sentence.begin() + static_cast<std::ptrdiff_t>(w.end));
      MemorySlot slot;
      slot.key = Bow(tokens, vocab, Bank::kKey);
      if (slot.key.empty()) continue;
      slot.value = value;
      slot.value_candidates = {first_sentence_id + static_cast<std::uint32_t>(s)};
      slot.provenance = {Provenance::Source::kDocument,        doc_id,
                         static_cast<std::uint32_t>(s),        static_cast<std::uint32_t>(w.begin),
                         static_cast<std::uint32_t>(w.end),    false,
                         false};
      slots.push_back(std::move(slot));
    }
  }
  return slots;
}

std::vector<MemorySlot> CollapseKeyValue(std::vector<MemorySlot> slots) {
  for (auto& s : slots) {
    if (s.key == s.value) continue;
    s.key = SparseVec::Combine(1.0, s.key, 1.0, s.value);
    s.value = s.key;
  }
  return slots;
}

}  // namespace kvmemnn
