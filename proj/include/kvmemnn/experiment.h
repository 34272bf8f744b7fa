#ifndef KVMEMNN_EXPERIMENT_H_
#define KVMEMNN_EXPERIMENT_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "kvmemnn/datagen.h"
#include "kvmemnn/evaluation.h"
#include "kvmemnn/memory_store.h"
#include "kvmemnn/model.h"
#include "kvmemnn/params.h"
#include "kvmemnn/train.h"

namespace kvmemnn {

enum class Source { kKb, kDoc };
enum class Representation {
  kKbTriple,
  kSentence,
  kWindow,
  kWindowCenter,
  kWindowTitle,
  kWindowCenterTitle,
  kWindowSentence,
};
enum class Baseline { kNone, kMemNN, kSupervisedEmbeddings };

const char* SourceName(Source s);
const char* RepresentationName(Representation r);
const char* BaselineName(Baseline b);
Source ParseSource(const std::string& name);
Representation ParseRepresentation(const std::string& name);
Baseline ParseBaseline(const std::string& name);

nlohmann::json HyperToJson(const HyperParams& h);
// Missing fields keep their defaults; unknown fields are a ConfigError.
HyperParams HyperFromJson(const nlohmann::json& j, HyperParams base = {});

struct ExperimentConfig {
  std::string corpus_dir;
  std::string output_dir;
  Source source = Source::kKb;
  Representation representation = Representation::kKbTriple;
  Baseline baseline = Baseline::kNone;
  HyperParams hyper;
  bool hashing = true;
  bool mark_numbers = false;  // rewrite numbers and "how many" as _number_
  // Take F from the corpus (its recommended value) instead of hyper.
  bool auto_freq_threshold = true;

  // Throws ConfigError (e.g. kb_triple with source=doc).
  void Validate() const;
  nlohmann::json ToJson() const;
  static ExperimentConfig FromJson(const nlohmann::json& j);
};

// A corpus featurized for one configuration: vocabulary, memory, candidates
// and the three instance splits.
struct Experiment {
  ExperimentConfig config;
  Vocabulary vocab;
  EntityDictionary entities;
  MemoryStore store;
  CandidateSet candidates;
  std::vector<std::string> candidate_names;  // parallel to candidates
  std::vector<Instance> train, dev, test;
  // Supporting slot ids per instance (possibly empty), for hash recall.
  std::vector<std::vector<std::uint32_t>> train_support, dev_support, test_support;
  std::size_t dropped_questions = 0;  // no gold candidate could be resolved
  std::string manifest_hash;

  ModelKind kind() const {
    return config.baseline == Baseline::kSupervisedEmbeddings ? ModelKind::kSupervisedEmbeddings
                                                              : ModelKind::kKeyValue;
  }
  bool sentence_mode() const { return candidates.mode() == CandidateSet::Mode::kSentence; }
  const std::vector<Instance>& split(Split s) const;

  // Featurizes free text as a question.
  SparseVec Question(const std::string& text) const;
  // Memory the model reads for a featurized question.
  std::vector<std::uint32_t> Memory(const SparseVec& question) const;
};

// Vocabulary over the KB, documents and training questions, with reserved
// and reversed-relation tokens.
Vocabulary BuildVocabulary(const SynthCorpus& corpus, bool center_encoded, bool mark_numbers);

Experiment BuildExperiment(const SynthCorpus& corpus, const ExperimentConfig& config);

ModelParams InitExperimentParams(const Experiment& exp);

TrainResult TrainExperiment(const Experiment& exp, const ModelParams& init,
                            TrainOptions options = {});

// Rankings by the model for every instance, plus the report over them.
EvalReport EvaluateExperiment(const Experiment& exp, const ModelParams& params,
                              const std::vector<Instance>& data,
                              std::vector<Ranking>* rankings = nullptr,
                              std::vector<GoldSet>* gold = nullptr);

// hits@1 restricted to one question type; -1 when none is present.
double TypeHits1(const EvalReport& report, const std::string& qtype);

// Hex FNV-1a of a byte string / a file's contents.
std::string HexHash(std::uint64_t h);
std::string FileHash(const std::string& path);

struct LadderRow {
  std::string name;
  GenConfig gen;
  Source source;
};

// The six corpora of the synthetic-document ladder, sharing one KB and
// question set: kb-only, one template, all templates, one template plus
// coreference, one template plus conjunction, all templates plus both.
std::vector<LadderRow> LadderPresets(const GenConfig& base);

}  // namespace kvmemnn

#endif  // KVMEMNN_EXPERIMENT_H_
