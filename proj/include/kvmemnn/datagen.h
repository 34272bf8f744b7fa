#ifndef KVMEMNN_DATAGEN_H_
#define KVMEMNN_DATAGEN_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "kvmemnn/featurize.h"

namespace kvmemnn {

// The nine KB relations, in the order facts are realized in documents.
const std::vector<std::string>& Relations();

// The thirteen single-edge question classes.
const std::vector<std::string>& QuestionTypes();
// Composed two-edge class (director -> movies -> release years).
inline constexpr const char* kTwoHopType = "Director to Year";

// The KB edge a question class asks about. For the two-edge class this is
// the first edge (director -> movie).
struct QuestionEdge {
  std::string relation;
  bool movie_is_topic;  // "Movie to X"; otherwise "X to Movie"
};
// Throws ConfigError for an unknown class.
QuestionEdge EdgeOf(const std::string& qtype);

// Rating and vote bins, spelled as the benchmark spells them.
const std::vector<std::string>& PopularityBins();

struct GenConfig {
  std::size_t n_movies = 500;
  std::size_t n_actors = 600;
  std::size_t n_directors = 200;
  std::size_t n_writers = 300;
  std::size_t n_tags = 120;
  std::size_t n_genres = 12;
  std::size_t n_languages = 10;
  std::size_t templates_per_relation = 1;  // 1..100; clamped to the bank size
  double conjunction_rate = 0.5;
  double coreference_rate = 0.8;
  std::uint64_t seed = 1;
  double train_fraction = 0.8;
  double dev_fraction = 0.1;
  double test_fraction = 0.1;
  bool two_hop_questions = false;
  std::string data_dir;  // pattern/template banks; empty = built-in location

  void Validate() const;
  nlohmann::json ToJson() const;
  static GenConfig FromJson(const nlohmann::json& j);
  bool operator==(const GenConfig&) const = default;
};

struct SynthKB {
  std::vector<KBTriple> triples;
  std::vector<std::string> movies, actors, directors, writers, tags, genres, languages, years;

  // Every entity string that occurs in some triple, sorted.
  std::vector<std::string> Entities() const;
  bool operator==(const SynthKB&) const = default;
};

// Surface text of a document; Featurize tokenizes it.
struct RawDocument {
  std::string title;
  std::vector<std::string> sentences;
  bool operator==(const RawDocument&) const = default;
};

enum class Split { kTrain, kDev, kTest };
const char* SplitName(Split s);

struct QAExample {
  std::string question;
  std::vector<std::string> answers;  // every object satisfying the edge
  std::string qtype;
  Split split = Split::kTrain;
  // Derived by LocateSupport; not serialized.
  std::string topic;            // question entity
  std::int64_t gold_triple = -1;  // a supporting triple index

  bool operator==(const QAExample&) const = default;
};

// Realization counters of the document grammar.
struct DocStats {
  std::size_t sentences = 0;
  std::size_t conjunction_decisions = 0;
  std::size_t conjunctions = 0;
  std::size_t coreference_eligible = 0;
  std::size_t coreferences = 0;
  bool operator==(const DocStats&) const = default;
};

struct SynthCorpus {
  GenConfig config;
  SynthKB kb;
  std::vector<RawDocument> docs;
  std::vector<QAExample> train, dev, test;
  DocStats doc_stats;

  nlohmann::json Manifest() const;
  std::size_t RecommendedF() const;
  bool operator==(const SynthCorpus&) const = default;
};

struct PatternBank {
  std::map<std::string, std::vector<std::string>> patterns;   // qtype -> patterns
  std::map<std::string, std::vector<std::string>> templates;  // relation -> predicates

  // Loads patterns.json and templates.json from dir (or the built-in data
  // directory). Throws ConfigError on a missing class or relation.
  static PatternBank Load(const std::string& dir = "");
};

SynthKB GenerateKb(const GenConfig& config);

std::vector<QAExample> GenerateQuestions(const SynthKB& kb, const GenConfig& config,
                                         const PatternBank& bank);

std::vector<RawDocument> GenerateDocuments(const SynthKB& kb, const GenConfig& config,
                                           const PatternBank& bank, DocStats* stats = nullptr);

// KB, questions (split) and documents in one call.
SynthCorpus GenerateCorpus(const GenConfig& config);

// Fills topic and gold_triple from the KB. Returns false if no triple
// supports the example.
bool LocateSupport(const SynthKB& kb, QAExample& example);

// Entity dictionary over every KB entity.
EntityDictionary BuildEntityDictionary(const SynthKB& kb);

// Writes kb.tsv, docs.jsonl, qa_{train,dev,test}.tsv and manifest.json.
void EmitCorpus(const SynthCorpus& corpus, const std::string& dir);
// Inverse of EmitCorpus. Throws DataError on malformed files.
SynthCorpus LoadCorpus(const std::string& dir);

// Rule-based inverse of the one-template, no-conjunction, no-coreference
// grammar: recovers (title, relation, object) triples from a document.
std::vector<KBTriple> ParseDocumentFacts(const RawDocument& doc, const PatternBank& bank,
                                         const EntityDictionary& entities);

}  // namespace kvmemnn

#endif  // KVMEMNN_DATAGEN_H_
