#include "kvmemnn/experiment.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <unordered_map>

#include "kvmemnn/featurize.h"
#include "kvmemnn/tokenizer.h"
#include "kvmemnn/vocabulary.h"

namespace kvmemnn {

namespace {

const std::vector<std::pair<Source, const char*>> kSources = {{Source::kKb, "kb"},
                                                              {Source::kDoc, "doc"}};
const std::vector<std::pair<Representation, const char*>> kRepresentations = {
    {Representation::kKbTriple, "kb_triple"},
    {Representation::kSentence, "sentence"},
    {Representation::kWindow, "window"},
    {Representation::kWindowCenter, "window_center"},
    {Representation::kWindowTitle, "window_title"},
    {Representation::kWindowCenterTitle, "window_center_title"},
    {Representation::kWindowSentence, "window_sentence"},
};
const std::vector<std::pair<Baseline, const char*>> kBaselines = {
    {Baseline::kNone, "none"}, {Baseline::kMemNN, "memnn"}, {Baseline::kSupervisedEmbeddings, "se"}};

template <typename E>
const char* NameOf(const std::vector<std::pair<E, const char*>>& table, E value) {
  for (const auto& [v, name] : table) {
    if (v == value) return name;
  }
  return "?";
}

template <typename E>
E Parse(const std::vector<std::pair<E, const char*>>& table, const std::string& name,
        const char* what) {
  std::string options;
  for (const auto& [v, n] : table) {
    if (name == n) return v;
    options += options.empty() ? n : std::string("|") + n;
  }
  throw ConfigError(std::string("unknown ") + what + " '" + name + "' (expected " + options + ")");
}

bool CenterEncoded(Representation r) {
  return r == Representation::kWindowCenter || r == Representation::kWindowCenterTitle;
}

std::vector<std::string> TextTokens(const std::string& text, const EntityDictionary& entities,
                                    bool mark_numbers) {
  auto tokens = Tokenize(text, entities);
  return mark_numbers ? MarkNumbers(tokens) : tokens;
}

}  // namespace

const char* SourceName(Source s) { return NameOf(kSources, s); }
const char* RepresentationName(Representation r) { return NameOf(kRepresentations, r); }
const char* BaselineName(Baseline b) { return NameOf(kBaselines, b); }
Source ParseSource(const std::string& name) { return Parse(kSources, name, "source"); }
Representation ParseRepresentation(const std::string& name) {
  return Parse(kRepresentations, name, "representation");
}
Baseline ParseBaseline(const std::string& name) { return Parse(kBaselines, name, "baseline"); }

nlohmann::json HyperToJson(const HyperParams& h) {
  return {{"dim", h.dim},
          {"hops", h.hops},
          {"window", h.window},
          {"freq_threshold", h.freq_threshold},
          {"max_hashed", h.max_hashed},
          {"lr", h.lr},
          {"epochs", h.epochs},
          {"dropout_question", h.dropout_question},
          {"dropout_memory", h.dropout_memory},
          {"dropout_answer", h.dropout_answer},
          {"clip_norm", h.clip_norm},
          {"init_scale", h.init_scale},
          {"hop_identity_init", h.hop_identity_init},
          {"tied", h.tied},
          {"seed", h.seed}};
}

HyperParams HyperFromJson(const nlohmann::json& j, HyperParams h) {
  if (!j.is_object()) throw ConfigError("hyper parameters must be a JSON object");
  static const std::set<std::string> kKnown = {
      "dim",    "hops",   "window",           "freq_threshold", "max_hashed",
      "lr",     "epochs", "dropout_question", "dropout_memory", "dropout_answer",
      "clip_norm", "init_scale", "hop_identity_init", "tied", "seed"};
  for (const auto& [key, value] : j.items()) {
    if (!kKnown.contains(key)) throw ConfigError("unknown hyper parameter '" + key + "'");
  }
  auto read = [&j](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(field);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("hyper parameter '") + key + "': " + e.what());
    }
  };
  read("dim", h.dim);
  read("hops", h.hops);
  read("window", h.window);
  read("freq_threshold", h.freq_threshold);
  read("max_hashed", h.max_hashed);
  read("lr", h.lr);
  read("epochs", h.epochs);
  read("dropout_question", h.dropout_question);
  read("dropout_memory", h.dropout_memory);
  read("dropout_answer", h.dropout_answer);
  read("clip_norm", h.clip_norm);
  read("init_scale", h.init_scale);
  read("hop_identity_init", h.hop_identity_init);
  read("tied", h.tied);
  read("seed", h.seed);
  h.Validate();
  return h;
}

void ExperimentConfig::Validate() const {
  hyper.Validate();
  if (representation == Representation::kKbTriple && source != Source::kKb) {
    throw ConfigError("representation kb_triple requires source=kb");
  }
  if (representation != Representation::kKbTriple && source != Source::kDoc) {
    throw ConfigError(std::string("representation ") + RepresentationName(representation) +
                      " requires source=doc");
  }
  if (representation == Representation::kWindowSentence && baseline == Baseline::kMemNN) {
    throw ConfigError("the memnn baseline does not apply to window_sentence");
  }
}

nlohmann::json ExperimentConfig::ToJson() const {
  return {{"corpus_dir", corpus_dir},
          {"output_dir", output_dir},
          {"source", SourceName(source)},
          {"representation", RepresentationName(representation)},
          {"baseline", BaselineName(baseline)},
          {"hyper", HyperToJson(hyper)},
          {"hashing", hashing},
          {"mark_numbers", mark_numbers},
          {"auto_freq_threshold", auto_freq_threshold}};
}

ExperimentConfig ExperimentConfig::FromJson(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  static const std::set<std::string> kKnown = {
      "corpus_dir", "output_dir", "source",       "representation",     "baseline",
      "hyper",      "hashing",    "mark_numbers", "auto_freq_threshold"};
  for (const auto& [key, value] : j.items()) {
    if (!kKnown.contains(key)) throw ConfigError("unknown experiment field '" + key + "'");
  }
  ExperimentConfig c;
  try {
    c.corpus_dir = j.value("corpus_dir", c.corpus_dir);
    c.output_dir = j.value("output_dir", c.output_dir);
    if (j.contains("source")) c.source = ParseSource(j.at("source").get<std::string>());
    if (j.contains("representation")) {
      c.representation = ParseRepresentation(j.at("representation").get<std::string>());
    }
    if (j.contains("baseline")) c.baseline = ParseBaseline(j.at("baseline").get<std::string>());
    c.hashing = j.value("hashing", c.hashing);
    c.mark_numbers = j.value("mark_numbers", c.mark_numbers);
    c.auto_freq_threshold = j.value("auto_freq_threshold", c.auto_freq_threshold);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  if (j.contains("hyper")) c.hyper = HyperFromJson(j.at("hyper"));
  c.Validate();
  return c;
}

const std::vector<Instance>& Experiment::split(Split s) const {
  switch (s) {
    case Split::kTrain: return train;
    case Split::kDev: return dev;
    case Split::kTest: return test;
  }
  return train;
}

SparseVec Experiment::Question(const std::string& text) const {
  return Bow(TextTokens(text, entities, config.mark_numbers), vocab, Bank::kQuestion);
}

std::vector<std::uint32_t> Experiment::Memory(const SparseVec& question) const {
  if (kind() == ModelKind::kSupervisedEmbeddings) return {};
  return config.hashing ? store.Hash(question).slots : store.AllSlots();
}

Vocabulary BuildVocabulary(const SynthCorpus& corpus, bool center_encoded, bool mark_numbers) {
  Vocabulary vocab = Vocabulary::WithReserved();
  const EntityDictionary entities = BuildEntityDictionary(corpus.kb);
  for (const auto& rel : Relations()) {
    vocab.Add(rel, 0);
    vocab.Add(ReverseRelation(rel), 0);
  }
  for (const auto& t : corpus.kb.triples) {
    vocab.Add(EntityDictionary::TokenFor(t.subject));
    vocab.Add(t.relation);
    vocab.Add(ReverseRelation(t.relation));
    vocab.Add(EntityDictionary::TokenFor(t.object));
  }
  for (const auto& doc : corpus.docs) {
    for (const auto& sentence : doc.sentences) {
      for (const auto& tok : TextTokens(sentence, entities, mark_numbers)) vocab.Add(tok);
    }
  }
  for (const auto& ex : corpus.train) {
    for (const auto& tok : TextTokens(ex.question, entities, mark_numbers)) vocab.Add(tok);
  }
  vocab.set_center_encoded(center_encoded);
  return vocab;
}

namespace {

struct DocIndex {
  std::vector<Document> docs;
  std::vector<std::uint32_t> first_sentence;  // global id of each doc's first sentence
  std::unordered_map<std::string, std::uint32_t> by_title;
  std::size_t total_sentences = 0;
};

DocIndex TokenizeDocuments(const SynthCorpus& corpus, const EntityDictionary& entities,
                           bool mark_numbers) {
  DocIndex index;
  for (const auto& raw : corpus.docs) {
    Document doc;
    doc.title = EntityDictionary::TokenFor(raw.title);
    for (const auto& s : raw.sentences) {
      auto tokens = TextTokens(s, entities, mark_numbers);
      if (!tokens.empty()) doc.sentences.push_back(std::move(tokens));
    }
    index.by_title.emplace(doc.title, static_cast<std::uint32_t>(index.docs.size()));
    index.first_sentence.push_back(static_cast<std::uint32_t>(index.total_sentences));
    index.total_sentences += doc.sentences.size();
    index.docs.push_back(std::move(doc));
  }
  return index;
}

// (movie, answer) token pairs whose co-occurrence supports an example.
std::vector<std::pair<std::string, std::string>> SupportPairs(const QAExample& ex) {
  std::vector<std::pair<std::string, std::string>> pairs;
  if (ex.topic.empty() || ex.qtype == kTwoHopType) return pairs;
  const QuestionEdge edge = EdgeOf(ex.qtype);
  const std::string topic = EntityDictionary::TokenFor(ex.topic);
  for (const auto& a : ex.answers) {
    const std::string answer = EntityDictionary::TokenFor(a);
    if (edge.movie_is_topic) {
      pairs.emplace_back(topic, answer);
    } else {
      pairs.emplace_back(answer, topic);
    }
  }
  return pairs;
}

}  // namespace

Experiment BuildExperiment(const SynthCorpus& corpus, const ExperimentConfig& config) {
  config.Validate();
  Experiment exp;
  exp.config = config;
  if (config.auto_freq_threshold) exp.config.hyper.freq_threshold = corpus.RecommendedF();
  const HyperParams& hyper = exp.config.hyper;
  exp.manifest_hash = HexHash(Fnv1a(corpus.Manifest().dump(2) + "\n"));
  exp.entities = BuildEntityDictionary(corpus.kb);
  exp.vocab = BuildVocabulary(corpus, CenterEncoded(config.representation), config.mark_numbers);
  const Vocabulary& vocab = exp.vocab;

  const DocIndex docs = TokenizeDocuments(corpus, exp.entities, config.mark_numbers);

  std::vector<MemorySlot> slots;
  switch (config.representation) {
    case Representation::kKbTriple:
      slots = KbSlots(corpus.kb.triples, vocab);
      break;
    case Representation::kSentence:
      for (std::uint32_t d = 0; d < docs.docs.size(); ++d) {
        auto s = SentenceSlots(docs.docs[d], d, vocab, exp.entities);
        std::move(s.begin(), s.end(), std::back_inserter(slots));
      }
      break;
    case Representation::kWindowSentence:
      for (std::uint32_t d = 0; d < docs.docs.size(); ++d) {
        auto s = WindowSentenceSlots(docs.docs[d], d, docs.first_sentence[d], hyper.window, vocab,
                                     exp.entities);
        std::move(s.begin(), s.end(), std::back_inserter(slots));
      }
      break;
    default: {
      WindowOptions options;
      options.center_encoding = CenterEncoded(config.representation);
      options.title = config.representation == Representation::kWindowTitle ||
                      config.representation == Representation::kWindowCenterTitle;
      for (std::uint32_t d = 0; d < docs.docs.size(); ++d) {
        auto s = WindowSlots(docs.docs[d], d, hyper.window, vocab, exp.entities, options);
        std::move(s.begin(), s.end(), std::back_inserter(slots));
      }
    }
  }
  if (config.baseline == Baseline::kMemNN) slots = CollapseKeyValue(std::move(slots));
  if (slots.empty()) throw DataError("corpus produced no memory slots");
  exp.store = MemoryStore::Build(std::move(slots), vocab.base_size(), hyper.freq_threshold,
                                 hyper.max_hashed);

  // Candidates: every KB entity, or every document sentence.
  const bool sentence_mode = config.representation == Representation::kWindowSentence;
  if (sentence_mode) {
    exp.candidates = CandidateSet(CandidateSet::Mode::kSentence);
    for (std::uint32_t d = 0; d < docs.docs.size(); ++d) {
      for (std::size_t s = 0; s < docs.docs[d].sentences.size(); ++s) {
        SparseVec phi = Bow(docs.docs[d].sentences[s], vocab, Bank::kQuestion);
        if (phi.empty()) continue;
        exp.candidates.Add(static_cast<std::uint32_t>(docs.first_sentence[d] + s), std::move(phi));
        exp.candidate_names.push_back(JoinTokens(docs.docs[d].sentences[s]));
      }
    }
  } else {
    exp.candidates = CandidateSet(CandidateSet::Mode::kEntity);
    const Bank bank = vocab.center_encoded() ? Bank::kValueCenter : Bank::kQuestion;
    for (const auto& name : corpus.kb.Entities()) {
      const std::string token = EntityDictionary::TokenFor(name);
      const auto id = vocab.Find(token);
      if (!id || exp.candidates.IndexOf(*id) >= 0) continue;
      exp.candidates.Add(*id, Bow({token}, vocab, bank));
      exp.candidate_names.push_back(name);
    }
  }
  if (exp.candidates.empty()) throw DataError("corpus produced no answer candidates");

  // Supporting slots: KB slots of the answering edge, or document slots
  // whose span holds both the movie and the answer (or the value is it).
  std::unordered_map<std::string, std::vector<std::uint32_t>> slots_by_pair;
  for (std::uint32_t s = 0; s < exp.store.size(); ++s) {
    const auto& slot = exp.store.slot(s);
    const auto& prov = slot.provenance;
    if (prov.source == Provenance::Source::kTriple) {
      const auto& t = corpus.kb.triples[prov.source_id];
      slots_by_pair[EntityDictionary::TokenFor(t.subject) + "\t" +
                    EntityDictionary::TokenFor(t.object) + (prov.reversed ? "\tr" : "\tf")]
          .push_back(s);
    } else {
      const Document& doc = docs.docs[prov.source_id];
      const auto& sentence = doc.sentences[prov.sentence];
      for (std::uint32_t c : slot.value_candidates) {
        if (sentence_mode) break;
        const std::string& value = vocab.Token(c);
        const std::string key = value == doc.title ? "" : doc.title + "\t" + value;
        if (!key.empty()) slots_by_pair[key + "\td"].push_back(s);
      }
      if (sentence_mode) {
        for (const auto& tok : sentence) slots_by_pair[doc.title + "\t" + tok + "\td"].push_back(s);
      }
      if (prov.title_slot) {
        for (std::uint32_t i = prov.begin; i < prov.end; ++i) {
          slots_by_pair[doc.title + "\t" + sentence[i] + "\td"].push_back(s);
        }
      }
    }
  }

  auto build = [&](const std::vector<QAExample>& examples, std::vector<Instance>& out,
                   std::vector<std::vector<std::uint32_t>>& support) {
    for (const auto& ex : examples) {
      Instance inst;
      inst.qtype = ex.qtype;
      inst.question = exp.Question(ex.question);
      const auto pairs = SupportPairs(ex);
      std::set<std::uint32_t> gold;
      if (sentence_mode) {
        for (const auto& [movie, answer] : pairs) {
          auto d = docs.by_title.find(movie);
          if (d == docs.by_title.end()) continue;
          const Document& doc = docs.docs[d->second];
          for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
            const auto& sent = doc.sentences[s];
            if (std::find(sent.begin(), sent.end(), answer) == sent.end()) continue;
            const auto idx = exp.candidates.IndexOf(
                static_cast<std::uint32_t>(docs.first_sentence[d->second] + s));
            if (idx >= 0) gold.insert(static_cast<std::uint32_t>(idx));
          }
        }
      } else {
        for (const auto& a : ex.answers) {
          const auto id = vocab.Find(EntityDictionary::TokenFor(a));
          if (!id) continue;
          const auto idx = exp.candidates.IndexOf(*id);
          if (idx >= 0) gold.insert(static_cast<std::uint32_t>(idx));
        }
      }
      if (gold.empty()) {
        ++exp.dropped_questions;
        continue;
      }
      inst.gold.assign(gold.begin(), gold.end());
      inst.memory = exp.Memory(inst.question);

      std::set<std::uint32_t> sup;
      const bool movie_topic = !ex.topic.empty() && ex.qtype != kTwoHopType &&
                               EdgeOf(ex.qtype).movie_is_topic;
      for (const auto& [movie, answer] : pairs) {
        const std::string base = movie + "\t" + answer;
        for (const char* tag : {movie_topic ? "\tf" : "\tr", "\td"}) {
          auto it = slots_by_pair.find(base + tag);
          if (it != slots_by_pair.end()) sup.insert(it->second.begin(), it->second.end());
        }
      }
      support.emplace_back(sup.begin(), sup.end());
      out.push_back(std::move(inst));
    }
  };
  build(corpus.train, exp.train, exp.train_support);
  build(corpus.dev, exp.dev, exp.dev_support);
  build(corpus.test, exp.test, exp.test_support);
  return exp;
}

ModelParams InitExperimentParams(const Experiment& exp) {
  ModelParams p = InitParams(exp.config.hyper, exp.vocab.feature_dim());
  if (exp.kind() == ModelKind::kSupervisedEmbeddings) p.R.clear();
  return p;
}

TrainResult TrainExperiment(const Experiment& exp, const ModelParams& init, TrainOptions options) {
  options.kind = exp.kind();
  options.select_by_mrr = exp.sentence_mode();
  return Train(init, exp.train, exp.dev, exp.store, exp.candidates, exp.config.hyper, options);
}

EvalReport EvaluateExperiment(const Experiment& exp, const ModelParams& params,
                              const std::vector<Instance>& data, std::vector<Ranking>* rankings,
                              std::vector<GoldSet>* gold) {
  std::vector<Ranking> ranks;
  std::vector<GoldSet> golds;
  std::vector<std::string> qtypes;
  ranks.reserve(data.size());
  for (const auto& inst : data) {
    Ranking r;
    for (const auto& c : PredictInstance(params, inst, exp.store, exp.candidates, exp.kind())) {
      r.push_back(c.id);
    }
    ranks.push_back(std::move(r));
    GoldSet g;
    for (std::uint32_t i : inst.gold) g.push_back(exp.candidates.id(i));
    golds.push_back(std::move(g));
    qtypes.push_back(inst.qtype);
  }
  std::vector<std::string> known = QuestionTypes();
  known.emplace_back(kTwoHopType);
  EvalReport report = BreakdownReport(ranks, golds, qtypes, known);
  if (rankings) *rankings = std::move(ranks);
  if (gold) *gold = std::move(golds);
  return report;
}

double TypeHits1(const EvalReport& report, const std::string& qtype) {
  auto it = report.per_type.find(qtype);
  return it == report.per_type.end() ? -1.0 : it->second.hits1;
}

std::string HexHash(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string FileHash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream bytes;
  bytes << in.rdbuf();
  return HexHash(Fnv1a(bytes.str()));
}

std::vector<LadderRow> LadderPresets(const GenConfig& base) {
  auto variant = [&base](std::size_t templates, double conj, double coref) {
    GenConfig g = base;
    g.templates_per_relation = templates;
    g.conjunction_rate = conj;
    g.coreference_rate = coref;
    return g;
  };
  constexpr std::size_t kAll = 100;
  return {
      {"kb", variant(1, 0.0, 0.0), Source::kKb},
      {"one_template", variant(1, 0.0, 0.0), Source::kDoc},
      {"all_templates", variant(kAll, 0.0, 0.0), Source::kDoc},
      {"one_template_coref", variant(1, 0.0, 0.8), Source::kDoc},
      {"one_template_conj", variant(1, 0.5, 0.0), Source::kDoc},
      {"all_templates_conj_coref", variant(kAll, 0.5, 0.8), Source::kDoc},
  };
}

}  // namespace kvmemnn
