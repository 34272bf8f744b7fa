#include <gtest/gtest.h>

#include <random>
#include <set>

#include "kvmemnn/featurize.h"
#include "kvmemnn/tokenizer.h"
#include "kvmemnn/vocabulary.h"

namespace kvmemnn {
namespace {

TEST(SplitWords, LowercasesAndDropsApostrophes) {
  EXPECT_EQ(SplitWords("Who directed Blade-Runner's sequel?"),
            (std::vector<std::string>{"who", "directed", "blade", "runners", "sequel"}));
  EXPECT_TRUE(SplitWords(" ,.!").empty());
}

TEST(Tokenize, LongestMatchWins) {
  EntityDictionary d;
  d.Add("New York");
  d.Add("New York Stories");
  d.Add("York");
  EXPECT_EQ(d.Add("new  york"), "new_york");
  EXPECT_EQ(Tokenize("I saw New York Stories in New York.", d),
            (std::vector<std::string>{"i", "saw", "new_york_stories", "in", "new_york"}));
  EXPECT_THROW(d.Add("?!"), ConfigError);
}

// Brute force: at each position, try every span length from the longest.
std::vector<std::string> OracleTokenize(const std::vector<std::string>& words,
                                        const std::set<std::string>& phrases) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < words.size()) {
    std::size_t take = 1;
    std::string joined;
    for (std::size_t len = words.size() - pos; len >= 2; --len) {
      std::string p = words[pos];
      for (std::size_t k = 1; k < len; ++k) p += "_" + words[pos + k];
      if (phrases.count(p)) {
        take = len;
        joined = p;
        break;
      }
    }
    out.push_back(take == 1 ? words[pos] : joined);
    pos += take;
  }
  return out;
}

TEST(Tokenize, AgreesWithBruteForceOnRandomText) {
  std::mt19937_64 rng(21);
  const std::vector<std::string> alphabet = {"a", "b", "c", "d"};
  for (int trial = 0; trial < 200; ++trial) {
    EntityDictionary d;
    std::set<std::string> phrases;
    for (int e = 0; e < 4; ++e) {
      std::string name, token;
      const std::size_t len = 1 + rng() % 3;
      for (std::size_t k = 0; k < len; ++k) {
        const auto& w = alphabet[rng() % alphabet.size()];
        name += (k ? " " : "") + w;
        token += (k ? "_" : "") + w;
      }
      d.Add(name);
      phrases.insert(token);
    }
    std::vector<std::string> words;
    std::string text;
    for (int k = 0; k < 12; ++k) {
      words.push_back(alphabet[rng() % alphabet.size()]);
      text += words.back() + " ";
    }
    EXPECT_EQ(Tokenize(text, d), OracleTokenize(words, phrases)) << text;
  }
}

TEST(MarkNumbers, RewritesNumbersAndHowMany) {
  EXPECT_EQ(MarkNumbers({"how", "many", "votes", "in", "1999", "or", "7.5", "x1"}),
            (std::vector<std::string>{"_number_", "votes", "in", "_number_", "or", "_number_", "x1"}));
  EXPECT_FALSE(IsNumber(","));
}

TEST(Vocabulary, ReservedIdsAndBanks) {
  auto v = Vocabulary::WithReserved();
  EXPECT_EQ(*v.Find("_window_"), 0u);
  EXPECT_EQ(*v.Find("_title_"), 1u);
  EXPECT_EQ(*v.Find("_number_"), 2u);
  const auto cat = v.Add("cat");
  EXPECT_EQ(v.Add("cat"), cat);
  EXPECT_EQ(v.Frequency(cat), 2u);
  EXPECT_EQ(v.feature_dim(), 4u);
  const auto h = v.Hash();
  v.set_center_encoded(true);
  EXPECT_EQ(v.feature_dim(), 8u);
  EXPECT_NE(v.Hash(), h);

  auto bow = Bow({"cat", "cat", "dog"}, v);
  EXPECT_EQ(bow.nnz(), 1u);
  EXPECT_EQ(bow.Get(cat), 2.0);
  EXPECT_EQ(Bow({"cat", "cat"}, v, Bank::kQuestion, Weighting::kBinary).Get(cat), 1.0);
  EXPECT_EQ(Bow({"cat"}, v, Bank::kValueCenter).Get(cat + 4), 1.0);
}

class FeaturizeTest : public ::testing::Test {
 protected:
  void SetUp() override {
    vocab = Vocabulary::WithReserved();
    for (const char* name : {"Blade Runner", "Ridley Scott", "Harrison Ford", "1982"}) {
      vocab.Add(entities.Add(name));
    }
    for (const char* w : {"directed_by", "!directed_by", "starred_actors", "!starred_actors",
                          "was", "directed", "by", "and", "stars", "it", "in", "came", "out"}) {
      vocab.Add(w);
    }
  }
  std::uint32_t Id(const std::string& t) const { return *vocab.Find(t); }
  Document Doc(std::initializer_list<const char*> sentences) const {
    Document d;
    d.title = "blade_runner";
    for (const char* s : sentences) d.sentences.push_back(Tokenize(s, entities));
    return d;
  }

  Vocabulary vocab;
  EntityDictionary entities;
};

TEST_F(FeaturizeTest, KbSlotsDoubleEveryTriple) {
  std::vector<KBTriple> triples = {{"blade_runner", "directed_by", "ridley_scott"},
                                   {"blade_runner", "starred_actors", "harrison_ford"},
                                   {"blade_runner", "genre", "noir"}};
  std::size_t skipped = 0;
  auto slots = KbSlots(triples, vocab, &skipped);
  ASSERT_EQ(slots.size(), 4u);
  EXPECT_EQ(skipped, 1u);
  const std::size_t D = vocab.feature_dim();
  EXPECT_EQ(slots[0].key, SparseVec::FromUnsorted(D, {{Id("blade_runner"), 1}, {Id("directed_by"), 1}}));
  EXPECT_EQ(slots[0].value, SparseVec::FromUnsorted(D, {{Id("ridley_scott"), 1}}));
  EXPECT_EQ(slots[1].key, SparseVec::FromUnsorted(D, {{Id("ridley_scott"), 1}, {Id("!directed_by"), 1}}));
  EXPECT_EQ(slots[1].value_candidates, std::vector<std::uint32_t>{Id("blade_runner")});
  EXPECT_TRUE(slots[1].provenance.reversed);
  EXPECT_EQ(ReverseRelation(ReverseRelation("genre")), "genre");
  EXPECT_EQ(Reverse(triples[0]).relation, "!directed_by");
}

TEST_F(FeaturizeTest, SentenceSlotsKeyEqualsValue) {
  auto doc = Doc({"Blade Runner was directed by Ridley Scott.", "It stars Harrison Ford."});
  auto slots = SentenceSlots(doc, 3, vocab, entities);
  ASSERT_EQ(slots.size(), 2u);
  for (const auto& s : slots) EXPECT_EQ(s.key, s.value);
  EXPECT_EQ(slots[0].value_candidates,
            (std::vector<std::uint32_t>{Id("blade_runner"), Id("ridley_scott")}));
  EXPECT_EQ(slots[1].provenance.source_id, 3u);
  EXPECT_EQ(slots[1].provenance.sentence, 1u);
}

// Reference enumeration of entity-centred windows.
struct ExpectedWindow {
  std::size_t sentence, center, begin, end;
};

std::vector<ExpectedWindow> EnumerateWindows(const Document& doc, std::size_t w,
                                             const EntityDictionary& entities) {
  std::vector<ExpectedWindow> out;
  for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
    const auto& sent = doc.sentences[s];
    for (std::size_t c = 0; c < sent.size(); ++c) {
      if (!entities.ContainsToken(sent[c])) continue;
      const long lo = std::max<long>(0, static_cast<long>(c) - static_cast<long>(w / 2));
      const std::size_t hi = std::min(sent.size(), c + w / 2 + 1);
      out.push_back({s, c, static_cast<std::size_t>(lo), hi});
    }
  }
  return out;
}

TEST_F(FeaturizeTest, WindowsMatchEnumeration) {
  auto doc = Doc({"Blade Runner was directed by Ridley Scott and stars Harrison Ford.",
                  "It came out in 1982."});
  for (std::size_t w : {1u, 3u, 5u, 7u, 21u}) {
    auto expected = EnumerateWindows(doc, w, entities);
    auto slots = WindowSlots(doc, 0, w, vocab, entities);
    ASSERT_EQ(slots.size(), expected.size()) << w;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      const auto& e = expected[i];
      const auto& sent = doc.sentences[e.sentence];
      std::vector<std::string> span(sent.begin() + e.begin, sent.begin() + e.end);
      EXPECT_EQ(slots[i].key, Bow(span, vocab)) << w << " " << i;
      EXPECT_EQ(slots[i].value_candidates, std::vector<std::uint32_t>{Id(sent[e.center])});
      EXPECT_EQ(slots[i].provenance.begin, e.begin);
      EXPECT_EQ(slots[i].provenance.end, e.end);
    }
  }
  EXPECT_THROW(WindowSlots(doc, 0, 4, vocab, entities), ConfigError);
}

TEST_F(FeaturizeTest, CenterEncodingMovesOnlyTheCenter) {
  vocab.set_center_encoded(true);
  const auto D = static_cast<std::uint32_t>(vocab.base_size());
  auto doc = Doc({"Blade Runner was directed by Ridley Scott."});
  auto plain_vocab = vocab;
  plain_vocab.set_center_encoded(false);
  auto plain = WindowSlots(doc, 0, 5, plain_vocab, entities);
  auto center = WindowSlots(doc, 0, 5, vocab, entities, {.center_encoding = true});
  ASSERT_EQ(plain.size(), center.size());
  for (std::size_t i = 0; i < plain.size(); ++i) {
    const std::uint32_t c = plain[i].value_candidates[0];
    EXPECT_EQ(center[i].value.entries(), (std::vector<SparseVec::Entry>{{c + D, 1.0}}));
    // Folding the value bank back onto the base bank recovers the plain key.
    std::vector<SparseVec::Entry> folded;
    for (auto [id, w] : center[i].key.entries()) folded.emplace_back(id % D, w);
    EXPECT_EQ(SparseVec::FromUnsorted(plain_vocab.feature_dim(), folded).entries(),
              plain[i].key.entries());
    EXPECT_EQ(center[i].key.Get(c + D), 1.0);
    EXPECT_EQ(center[i].key.Get(c), 0.0);
  }
  EXPECT_THROW(WindowSlots(doc, 0, 5, plain_vocab, entities, {.center_encoding = true}), ConfigError);
}

TEST_F(FeaturizeTest, TitleAddsMarkedSlotPerWindow) {
  auto doc = Doc({"It stars Harrison Ford."});
  auto slots = WindowSlots(doc, 0, 7, vocab, entities, {.title = true});
  ASSERT_EQ(slots.size(), 2u);
  EXPECT_EQ(slots[0].key.Get(Id("_window_")), 1.0);
  EXPECT_EQ(slots[0].value_candidates, std::vector<std::uint32_t>{Id("harrison_ford")});
  EXPECT_TRUE(slots[1].provenance.title_slot);
  EXPECT_EQ(slots[1].key.Get(Id("_title_")), 1.0);
  EXPECT_EQ(slots[1].key.Get(Id("blade_runner")), 1.0);
  EXPECT_EQ(slots[1].value_candidates, std::vector<std::uint32_t>{Id("blade_runner")});
}

TEST_F(FeaturizeTest, WindowSentenceValuesAreGlobalSentenceIds) {
  auto doc = Doc({"Blade Runner stars Harrison Ford.", "It was directed by Ridley Scott."});
  auto slots = WindowSentenceSlots(doc, 0, 10, 3, vocab, entities);
  ASSERT_EQ(slots.size(), 3u);
  EXPECT_EQ(slots[0].value_candidates, std::vector<std::uint32_t>{10});
  EXPECT_EQ(slots[2].value_candidates, std::vector<std::uint32_t>{11});
  EXPECT_EQ(slots[2].value, Bow(doc.sentences[1], vocab, Bank::kKey));
}

TEST_F(FeaturizeTest, CollapseMergesKeyAndValue) {
  auto slots = KbSlots({{"blade_runner", "directed_by", "ridley_scott"}}, vocab);
  auto merged = CollapseKeyValue(slots);
  for (std::size_t i = 0; i < slots.size(); ++i) {
    EXPECT_EQ(merged[i].key, merged[i].value);
    EXPECT_EQ(merged[i].key, SparseVec::Combine(1.0, slots[i].key, 1.0, slots[i].value));
  }
}

}  // namespace
}  // namespace kvmemnn
