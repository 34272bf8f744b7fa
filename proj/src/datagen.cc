#include "kvmemnn/datagen.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "kvmemnn/tokenizer.h"
#include "kvmemnn/vocabulary.h"

namespace kvmemnn {

const std::vector<std::string>& Relations() {
  static const std::vector<std::string> kRelations = {
      "directed_by", "written_by",  "starred_actors",  "release_year",  "in_language",
      "has_genre",   "has_tags",    "has_imdb_rating", "has_imdb_votes"};
  return kRelations;
}

const std::vector<std::string>& QuestionTypes() {
  static const std::vector<std::string> kTypes = {
      "Writer to Movie",     "Tag to Movie",         "Movie to Year",      "Movie to Writer",
      "Movie to Tags",       "Movie to Language",    "Movie to IMDb Votes", "Movie to IMDb Rating",
      "Movie to Genre",      "Movie to Director",    "Movie to Actors",    "Director to Movie",
      "Actor to Movie"};
  return kTypes;
}

const std::vector<std::string>& PopularityBins() {
  static const std::vector<std::string> kBins = {"unheard of", "unknown", "well known",
                                                 "highly watched", "famous"};
  return kBins;
}

const char* SplitName(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "train";
}

namespace {

// How a question class maps onto a KB edge.
struct EdgeSpec {
  std::string relation;
  bool movie_is_topic;      // Movie to X; otherwise X to Movie
  std::string placeholder;  // "[@movie]", "[@actor]", ...
};

const std::map<std::string, EdgeSpec>& EdgeSpecs() {
  static const std::map<std::string, EdgeSpec> kSpecs = {
      {"Writer to Movie", {"written_by", false, "[@writer]"}},
      {"Tag to Movie", {"has_tags", false, "[@tag]"}},
      {"Movie to Year", {"release_year", true, "[@movie]"}},
      {"Movie to Writer", {"written_by", true, "[@movie]"}},
      {"Movie to Tags", {"has_tags", true, "[@movie]"}},
      {"Movie to Language", {"in_language", true, "[@movie]"}},
      {"Movie to IMDb Votes", {"has_imdb_votes", true, "[@movie]"}},
      {"Movie to IMDb Rating", {"has_imdb_rating", true, "[@movie]"}},
      {"Movie to Genre", {"has_genre", true, "[@movie]"}},
      {"Movie to Director", {"directed_by", true, "[@movie]"}},
      {"Movie to Actors", {"starred_actors", true, "[@movie]"}},
      {"Director to Movie", {"directed_by", false, "[@director]"}},
      {"Actor to Movie", {"starred_actors", false, "[@actor]"}},
      {kTwoHopType, {"directed_by", false, "[@director]"}},
  };
  return kSpecs;
}

const std::vector<std::string> kGenreNames = {
    "drama",   "comedy",  "thriller",    "horror",  "western", "musical",   "romance",
    "fantasy", "mystery", "documentary", "war",     "crime",   "animation", "adventure",
    "action",  "family",  "biography",   "history", "sport",   "noir"};
const std::vector<std::string> kLanguageNames = {
    "English", "French",  "German", "Spanish",    "Italian", "Japanese", "Russian", "Hindi",
    "Korean",  "Swedish", "Danish", "Portuguese", "Polish",  "Turkish",  "Greek",   "Czech"};

std::mt19937_64 StreamRng(std::uint64_t seed, std::string_view stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(Fnv1a(stream))};
  return std::mt19937_64(seq);
}

std::size_t UniformIndex(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(rng() % n);
}

double Unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

std::string Capitalize(std::string w) {
  if (!w.empty()) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
  return w;
}

// Pronounceable names from onset/nucleus/coda syllables, unique as entity
// tokens and disjoint from every word of the grammar.
class NameGenerator {
 public:
  NameGenerator(std::mt19937_64& rng, std::unordered_set<std::string> reserved_words)
      : rng_(rng), reserved_(std::move(reserved_words)) {}

  std::string Word() {
    static const std::vector<std::string> kOnsets = {"b", "d", "f", "g", "k", "l", "m", "n",
                                                     "p", "r", "s", "t", "v", "z", "br", "dr",
                                                     "kr", "tr", "st", "gl", "sh", "th"};
    static const std::vector<std::string> kNuclei = {"a", "e", "i", "o", "u", "ai", "ou", "ea"};
    static const std::vector<std::string> kCodas = {"", "", "", "n", "r", "l", "s", "k", "m"};
    for (;;) {
      std::string w;
      const std::size_t syllables = 2 + UniformIndex(rng_, 2);
      for (std::size_t s = 0; s < syllables; ++s) {
        w += kOnsets[UniformIndex(rng_, kOnsets.size())];
        w += kNuclei[UniformIndex(rng_, kNuclei.size())];
        if (s + 1 == syllables) w += kCodas[UniformIndex(rng_, kCodas.size())];
      }
      if (!reserved_.contains(w)) return w;
    }
  }

  // A fresh entity name of `words` words.
  std::string Name(std::size_t words, bool capitalize = true) {
    for (;;) {
      std::string name;
      for (std::size_t i = 0; i < words; ++i) {
        if (i) name.push_back(' ');
        name += capitalize ? Capitalize(Word()) : Word();
      }
      if (Claim(name)) return name;
    }
  }

  bool Claim(const std::string& name) { return used_.insert(EntityDictionary::TokenFor(name)).second; }

 private:
  std::mt19937_64& rng_;
  std::unordered_set<std::string> reserved_;
  std::unordered_set<std::string> used_;
};

std::unordered_set<std::string> GrammarWords(const PatternBank& bank) {
  std::unordered_set<std::string> words = {"it", "and", "the", "a", "of", "in", "o"};
  auto add = [&words](const std::string& text) {
    for (auto& w : SplitWords(text)) words.insert(w);
  };
  for (const auto& [type, list] : bank.patterns) {
    add(type);
    for (const auto& p : list) add(p);
  }
  for (const auto& [rel, list] : bank.templates) {
    add(rel);
    for (const auto& t : list) add(t);
  }
  for (const auto& g : kGenreNames) add(g);
  for (const auto& l : kLanguageNames) add(l);
  for (const auto& b : PopularityBins()) add(b);
  return words;
}

std::vector<std::size_t> SampleDistinct(std::mt19937_64& rng, std::size_t pool, std::size_t k) {
  std::vector<std::size_t> out;
  while (out.size() < k) {
    const std::size_t i = UniformIndex(rng, pool);
    if (std::find(out.begin(), out.end(), i) == out.end()) out.push_back(i);
  }
  return out;
}

void AppendUnique(std::vector<std::string>& list, std::unordered_set<std::string>& seen,
                  const std::string& value) {
  if (seen.insert(value).second) list.push_back(value);
}

// Rebuilds the per-role entity pools from the triples (first appearance).
void DerivePools(SynthKB& kb) {
  kb.movies.clear();
  kb.actors.clear();
  kb.directors.clear();
  kb.writers.clear();
  kb.tags.clear();
  kb.genres.clear();
  kb.languages.clear();
  kb.years.clear();
  std::unordered_map<std::string, std::unordered_set<std::string>> seen;
  for (const auto& t : kb.triples) {
    AppendUnique(kb.movies, seen["movie"], t.subject);
    if (t.relation == "directed_by") AppendUnique(kb.directors, seen["director"], t.object);
    if (t.relation == "written_by") AppendUnique(kb.writers, seen["writer"], t.object);
    if (t.relation == "starred_actors") AppendUnique(kb.actors, seen["actor"], t.object);
    if (t.relation == "release_year") AppendUnique(kb.years, seen["year"], t.object);
    if (t.relation == "in_language") AppendUnique(kb.languages, seen["language"], t.object);
    if (t.relation == "has_genre") AppendUnique(kb.genres, seen["genre"], t.object);
    if (t.relation == "has_tags") AppendUnique(kb.tags, seen["tag"], t.object);
  }
}

std::string DefaultDataDir(const std::string& configured) {
  if (!configured.empty()) return configured;
  if (const char* env = std::getenv("KVMEMNN_DATA_DIR")) return env;
#ifdef KVMEMNN_DATA_DIR
  return KVMEMNN_DATA_DIR;
#else
  return "data";
#endif
}

// Lookup tables for recovering the topic entity and a supporting triple.
class SupportIndex {
 public:
  explicit SupportIndex(const SynthKB& kb) : kb_(kb), entities_(BuildEntityDictionary(kb)) {
    for (std::size_t i = 0; i < kb.triples.size(); ++i) {
      const auto& t = kb.triples[i];
      display_.emplace(EntityDictionary::TokenFor(t.subject), t.subject);
      display_.emplace(EntityDictionary::TokenFor(t.object), t.object);
      forward_[t.subject + "\t" + t.relation].push_back(i);
      backward_[t.object + "\t" + t.relation].push_back(i);
    }
  }

  // Triples supporting `answer` for `topic` under the class spec.
  std::int64_t Find(const std::string& qtype, const std::string& topic,
                    const std::vector<std::string>& answers) const {
    const auto& spec = EdgeSpecs().at(qtype);
    if (qtype == kTwoHopType) {
      auto it = backward_.find(topic + "\t" + spec.relation);
      if (it == backward_.end()) return -1;
      for (std::size_t i : it->second) {
        const auto& movie = kb_.triples[i].subject;
        auto years = forward_.find(movie + "\trelease_year");
        if (years == forward_.end()) continue;
        for (std::size_t y : years->second) {
          if (std::find(answers.begin(), answers.end(), kb_.triples[y].object) != answers.end()) {
            return static_cast<std::int64_t>(i);
          }
        }
      }
      return -1;
    }
    const auto& table = spec.movie_is_topic ? forward_ : backward_;
    auto it = table.find(topic + "\t" + spec.relation);
    if (it == table.end()) return -1;
    for (std::size_t i : it->second) {
      const auto& other = spec.movie_is_topic ? kb_.triples[i].object : kb_.triples[i].subject;
      if (std::find(answers.begin(), answers.end(), other) != answers.end()) {
        return static_cast<std::int64_t>(i);
      }
    }
    return -1;
  }

  bool Locate(QAExample& ex) const {
    if (!EdgeSpecs().contains(ex.qtype)) return false;
    for (const auto& tok : Tokenize(ex.question, entities_)) {
      auto d = display_.find(tok);
      if (d == display_.end()) continue;
      const std::int64_t t = Find(ex.qtype, d->second, ex.answers);
      if (t >= 0) {
        ex.topic = d->second;
        ex.gold_triple = t;
        return true;
      }
    }
    return false;
  }

 private:
  const SynthKB& kb_;
  EntityDictionary entities_;
  std::unordered_map<std::string, std::string> display_;
  std::unordered_map<std::string, std::vector<std::size_t>> forward_;
  std::unordered_map<std::string, std::vector<std::size_t>> backward_;
};

}  // namespace

QuestionEdge EdgeOf(const std::string& qtype) {
  auto it = EdgeSpecs().find(qtype);
  if (it == EdgeSpecs().end()) throw ConfigError("unknown question type '" + qtype + "'");
  return {it->second.relation, it->second.movie_is_topic};
}

namespace {

// Keyed on the instantiated string, so identical questions can never straddle splits.
Split AssignSplit(const GenConfig& config, const std::string& question) {
  std::uint64_t h = Fnv1a(question, config.seed * 0x9E3779B97F4A7C15ULL + 7);
  h ^= h >> 29;
  h *= 0xBF58476D1CE4E5B9ULL;
  h ^= h >> 32;
  const double u = static_cast<double>(h % 1000000) / 1e6;
  if (u < config.train_fraction) return Split::kTrain;
  if (u < config.train_fraction + config.dev_fraction) return Split::kDev;
  return Split::kTest;
}

std::string Instantiate(const std::string& pattern, const std::string& placeholder,
                        const std::string& entity) {
  std::string out = pattern;
  const auto pos = out.find(placeholder);
  if (pos == std::string::npos) throw ConfigError("pattern without placeholder: " + pattern);
  out.replace(pos, placeholder.size(), entity);
  return out;
}

std::string Realize(const std::string& predicate, const std::string& object) {
  std::string out = predicate;
  const auto pos = out.find("{o}");
  if (pos == std::string::npos) throw ConfigError("template without {o}: " + predicate);
  out.replace(pos, 3, object);
  return out;
}

}  // namespace

void GenConfig::Validate() const {
  if (n_movies < 1) throw ConfigError("n_movies must be >= 1");
  if (n_directors < 1) throw ConfigError("n_directors must be >= 1");
  if (n_languages < 1) throw ConfigError("n_languages must be >= 1");
  if (n_actors < 5) throw ConfigError("n_actors must be >= 5 (movies draw up to 5 actors)");
  if (n_writers < 3) throw ConfigError("n_writers must be >= 3 (movies draw up to 3 writers)");
  if (n_tags < 6) throw ConfigError("n_tags must be >= 6 (movies draw up to 6 tags)");
  if (n_genres < 2) throw ConfigError("n_genres must be >= 2 (movies draw up to 2 genres)");
  if (templates_per_relation < 1 || templates_per_relation > 100) {
    throw ConfigError("templates_per_relation must lie in [1, 100]");
  }
  if (!(conjunction_rate >= 0.0 && conjunction_rate <= 1.0)) {
    throw ConfigError("conjunction_rate must lie in [0, 1]");
  }
  if (!(coreference_rate >= 0.0 && coreference_rate <= 1.0)) {
    throw ConfigError("coreference_rate must lie in [0, 1]");
  }
  for (double f : {train_fraction, dev_fraction, test_fraction}) {
    if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("split fractions must lie in [0, 1]");
  }
  if (std::abs(train_fraction + dev_fraction + test_fraction - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
}

nlohmann::json GenConfig::ToJson() const {
  return {{"n_movies", n_movies},
          {"n_actors", n_actors},
          {"n_directors", n_directors},
          {"n_writers", n_writers},
          {"n_tags", n_tags},
          {"n_genres", n_genres},
          {"n_languages", n_languages},
          {"templates_per_relation", templates_per_relation},
          {"conjunction_rate", conjunction_rate},
          {"coreference_rate", coreference_rate},
          {"seed", seed},
          {"train_fraction", train_fraction},
          {"dev_fraction", dev_fraction},
          {"test_fraction", test_fraction},
          {"two_hop_questions", two_hop_questions}};
}

GenConfig GenConfig::FromJson(const nlohmann::json& j) {
  static const std::set<std::string> kKnown = {
      "n_movies",         "n_actors",         "n_directors",       "n_writers",
      "n_tags",           "n_genres",         "n_languages",       "templates_per_relation",
      "conjunction_rate", "coreference_rate", "seed",              "train_fraction",
      "dev_fraction",     "test_fraction",    "two_hop_questions", "data_dir"};
  if (!j.is_object()) throw ConfigError("generation config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!kKnown.contains(key)) throw ConfigError("unknown generation config field '" + key + "'");
  }
  GenConfig c;
  auto read = [&j](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(field);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("generation config field '") + key + "': " + e.what());
    }
  };
  read("n_movies", c.n_movies);
  read("n_actors", c.n_actors);
  read("n_directors", c.n_directors);
  read("n_writers", c.n_writers);
  read("n_tags", c.n_tags);
  read("n_genres", c.n_genres);
  read("n_languages", c.n_languages);
  read("templates_per_relation", c.templates_per_relation);
  read("conjunction_rate", c.conjunction_rate);
  read("coreference_rate", c.coreference_rate);
  read("seed", c.seed);
  read("train_fraction", c.train_fraction);
  read("dev_fraction", c.dev_fraction);
  read("test_fraction", c.test_fraction);
  read("two_hop_questions", c.two_hop_questions);
  read("data_dir", c.data_dir);
  c.Validate();
  return c;
}

std::vector<std::string> SynthKB::Entities() const {
  std::set<std::string> all;
  for (const auto& t : triples) {
    all.insert(t.subject);
    all.insert(t.object);
  }
  return {all.begin(), all.end()};
}

EntityDictionary BuildEntityDictionary(const SynthKB& kb) {
  EntityDictionary dict;
  for (const auto& t : kb.triples) {
    dict.Add(t.subject);
    dict.Add(t.object);
  }
  return dict;
}

PatternBank PatternBank::Load(const std::string& dir) {
  const std::string base = DefaultDataDir(dir);
  auto read = [&base](const std::string& name) {
    std::ifstream in(base + "/" + name);
    if (!in) throw ConfigError("cannot open " + base + "/" + name);
    try {
      return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("malformed " + name + ": " + e.what());
    }
  };
  PatternBank bank;
  read("patterns.json").get_to(bank.patterns);
  read("templates.json").get_to(bank.templates);
  for (const auto& type : QuestionTypes()) {
    if (bank.patterns[type].size() < 3) throw ConfigError("fewer than 3 patterns for " + type);
  }
  for (const auto& rel : Relations()) {
    if (bank.templates[rel].empty()) throw ConfigError("no templates for relation " + rel);
  }
  return bank;
}

SynthKB GenerateKb(const GenConfig& config) {
  config.Validate();
  const PatternBank bank = PatternBank::Load(config.data_dir);
  auto rng = StreamRng(config.seed, "kb");
  NameGenerator names(rng, GrammarWords(bank));

  auto named_pool = [&](std::size_t n, const std::vector<std::string>& fixed, std::size_t words,
                        bool capitalize) {
    std::vector<std::string> pool;
    for (std::size_t i = 0; i < n; ++i) {
      if (i < fixed.size()) {
        names.Claim(fixed[i]);
        pool.push_back(fixed[i]);
      } else {
        pool.push_back(names.Name(words, capitalize));
      }
    }
    return pool;
  };

  for (const auto& b : PopularityBins()) names.Claim(b);
  std::vector<std::string> years;
  for (int y = 1950; y < 2020; ++y) {
    years.push_back(std::to_string(y));
    names.Claim(years.back());
  }
  const auto genres = named_pool(config.n_genres, kGenreNames, 1, false);
  const auto languages = named_pool(config.n_languages, kLanguageNames, 1, true);
  const auto tags = named_pool(config.n_tags, {}, 1, false);
  const auto directors = named_pool(config.n_directors, {}, 2, true);
  const auto writers = named_pool(config.n_writers, {}, 2, true);
  const auto actors = named_pool(config.n_actors, {}, 2, true);
  std::vector<std::string> movies;
  for (std::size_t i = 0; i < config.n_movies; ++i) {
    const double u = Unit(rng);
    movies.push_back(names.Name(u < 0.5 ? 1 : (u < 0.85 ? 2 : 3)));
  }

  SynthKB kb;
  auto add = [&kb](const std::string& m, const char* rel, const std::string& o) {
    kb.triples.push_back({m, rel, o});
  };
  auto between = [&rng](std::size_t lo, std::size_t hi) { return lo + UniformIndex(rng, hi - lo + 1); };
  for (const auto& m : movies) {
    add(m, "directed_by", directors[UniformIndex(rng, directors.size())]);
    for (std::size_t i : SampleDistinct(rng, writers.size(), between(1, 3))) add(m, "written_by", writers[i]);
    for (std::size_t i : SampleDistinct(rng, actors.size(), between(2, 5))) add(m, "starred_actors", actors[i]);
    add(m, "release_year", years[UniformIndex(rng, years.size())]);
    add(m, "in_language", languages[UniformIndex(rng, languages.size())]);
    for (std::size_t i : SampleDistinct(rng, genres.size(), between(1, 2))) add(m, "has_genre", genres[i]);
    for (std::size_t i : SampleDistinct(rng, tags.size(), between(2, 6))) add(m, "has_tags", tags[i]);
    add(m, "has_imdb_rating", PopularityBins()[UniformIndex(rng, PopularityBins().size())]);
    add(m, "has_imdb_votes", PopularityBins()[UniformIndex(rng, PopularityBins().size())]);
  }
  DerivePools(kb);
  return kb;
}

std::vector<QAExample> GenerateQuestions(const SynthKB& kb, const GenConfig& config,
                                         const PatternBank& bank) {
  std::vector<std::string> types = QuestionTypes();
  if (config.two_hop_questions) types.emplace_back(kTwoHopType);

  // topic -> answers per (relation, direction), in triple order.
  auto collect = [&kb](const std::string& relation, bool movie_is_topic) {
    std::vector<std::pair<std::string, std::vector<std::string>>> out;
    std::unordered_map<std::string, std::size_t> where;
    for (const auto& t : kb.triples) {
      if (t.relation != relation) continue;
      const auto& topic = movie_is_topic ? t.subject : t.object;
      const auto& answer = movie_is_topic ? t.object : t.subject;
      auto [it, fresh] = where.emplace(topic, out.size());
      if (fresh) out.push_back({topic, {}});
      auto& answers = out[it->second].second;
      if (std::find(answers.begin(), answers.end(), answer) == answers.end()) {
        answers.push_back(answer);
      }
    }
    return out;
  };

  std::unordered_map<std::string, std::string> year_of;
  for (const auto& t : kb.triples) {
    if (t.relation == "release_year" && !year_of.contains(t.subject)) year_of[t.subject] = t.object;
  }

  SupportIndex support(kb);
  std::vector<QAExample> out;
  for (const auto& type : types) {
    const auto& spec = EdgeSpecs().at(type);
    auto groups = collect(spec.relation, spec.movie_is_topic);
    if (type == kTwoHopType) {
      for (auto& [director, films] : groups) {
        std::vector<std::string> years;
        for (const auto& f : films) {
          auto y = year_of.find(f);
          if (y != year_of.end() && std::find(years.begin(), years.end(), y->second) == years.end()) {
            years.push_back(y->second);
          }
        }
        films = std::move(years);
      }
    }
    auto patterns = bank.patterns.find(type);
    if (patterns == bank.patterns.end()) throw ConfigError("no patterns for " + type);
    for (const auto& [topic, answers] : groups) {
      if (answers.empty()) continue;
      for (const auto& pattern : patterns->second) {
        QAExample ex;
        ex.question = Instantiate(pattern, spec.placeholder, topic);
        ex.answers = answers;
        ex.qtype = type;
        // The composed class keeps all paraphrases of a director together:
        // otherwise a sibling in train lets a one-hop model recall the years.
        ex.split = AssignSplit(config, type == kTwoHopType ? type + "\t" + topic : ex.question);
        ex.topic = topic;
        ex.gold_triple = support.Find(type, topic, answers);
        out.push_back(std::move(ex));
      }
    }
  }
  return out;
}

std::vector<RawDocument> GenerateDocuments(const SynthKB& kb, const GenConfig& config,
                                           const PatternBank& bank, DocStats* stats) {
  if (config.templates_per_relation < 1) throw ConfigError("templates_per_relation must be >= 1");
  auto rng = StreamRng(config.seed, "documents");
  DocStats local;

  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<const KBTriple*>> facts;
  for (const auto& t : kb.triples) {
    auto [it, fresh] = facts.try_emplace(t.subject);
    if (fresh) order.push_back(t.subject);
    it->second.push_back(&t);
  }

  auto pick_template = [&](const std::string& relation) -> const std::string& {
    const auto& list = bank.templates.at(relation);
    const std::size_t n = std::min(config.templates_per_relation, list.size());
    return list[UniformIndex(rng, n)];
  };

  std::vector<RawDocument> docs;
  docs.reserve(order.size());
  for (const auto& movie : order) {
    const auto& list = facts[movie];
    std::vector<std::string> predicates;
    std::size_t i = 0;
    while (i < list.size()) {
      bool merge = false;
      if (i + 1 < list.size()) {
        ++local.conjunction_decisions;
        merge = Unit(rng) < config.conjunction_rate;
      }
      if (!merge) {
        predicates.push_back(Realize(pick_template(list[i]->relation), list[i]->object));
        i += 1;
        continue;
      }
      ++local.conjunctions;
      const KBTriple& a = *list[i];
      const KBTriple& b = *list[i + 1];
      if (a.relation == b.relation) {
        predicates.push_back(Realize(pick_template(a.relation), a.object + " and " + b.object));
      } else {
        const std::string first = Realize(pick_template(a.relation), a.object);
        predicates.push_back(first + " and " + Realize(pick_template(b.relation), b.object));
      }
      i += 2;
    }

    RawDocument doc;
    doc.title = movie;
    for (std::size_t s = 0; s < predicates.size(); ++s) {
      std::string subject = movie;
      if (s > 0) {
        ++local.coreference_eligible;
        if (Unit(rng) < config.coreference_rate) {
          ++local.coreferences;
          subject = "It";
        }
      }
      doc.sentences.push_back(subject + " " + predicates[s] + ".");
    }
    local.sentences += doc.sentences.size();
    docs.push_back(std::move(doc));
  }
  if (stats) *stats = local;
  return docs;
}

SynthCorpus GenerateCorpus(const GenConfig& config) {
  config.Validate();
  const PatternBank bank = PatternBank::Load(config.data_dir);
  SynthCorpus c;
  c.config = config;
  c.kb = GenerateKb(config);
  for (auto& ex : GenerateQuestions(c.kb, config, bank)) {
    switch (ex.split) {
      case Split::kTrain: c.train.push_back(std::move(ex)); break;
      case Split::kDev: c.dev.push_back(std::move(ex)); break;
      case Split::kTest: c.test.push_back(std::move(ex)); break;
    }
  }
  c.docs = GenerateDocuments(c.kb, config, bank, &c.doc_stats);
  return c;
}

bool LocateSupport(const SynthKB& kb, QAExample& example) {
  return SupportIndex(kb).Locate(example);
}

std::size_t SynthCorpus::RecommendedF() const {
  return std::max<std::size_t>(20, kb.movies.size() / 2);
}

nlohmann::json SynthCorpus::Manifest() const {
  auto rate = [](std::size_t hit, std::size_t total) {
    return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
  };
  return {
      {"config", config.ToJson()},
      {"seed", config.seed},
      {"counts",
       {{"entities", kb.Entities().size()},
        {"triples", kb.triples.size()},
        {"movies", kb.movies.size()},
        {"documents", docs.size()},
        {"sentences", doc_stats.sentences},
        {"questions", {{"train", train.size()}, {"dev", dev.size()}, {"test", test.size()}}}}},
      {"recommended_F", RecommendedF()},
      {"doc_stats",
       {{"sentences", doc_stats.sentences},
        {"conjunction_decisions", doc_stats.conjunction_decisions},
        {"conjunctions", doc_stats.conjunctions},
        {"coreference_eligible", doc_stats.coreference_eligible},
        {"coreferences", doc_stats.coreferences},
        {"measured_conjunction_rate", rate(doc_stats.conjunctions, doc_stats.conjunction_decisions)},
        {"measured_coreference_rate", rate(doc_stats.coreferences, doc_stats.coreference_eligible)}}},
  };
}

namespace {

void WriteFile(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << content;
  if (!out) throw DataError("write failed: " + path);
}

std::vector<std::string> SplitOn(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      parts.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(std::move(cur));
  return parts;
}

std::vector<std::string> ReadLines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(std::move(line));
  }
  return lines;
}

}  // namespace

void EmitCorpus(const SynthCorpus& corpus, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir + ": " + ec.message());
  std::string kb;
  for (const auto& t : corpus.kb.triples) kb += t.subject + "\t" + t.relation + "\t" + t.object + "\n";
  WriteFile(dir + "/kb.tsv", kb);

  std::string docs;
  for (const auto& d : corpus.docs) {
    docs += nlohmann::json{{"title", d.title}, {"sentences", d.sentences}}.dump() + "\n";
  }
  WriteFile(dir + "/docs.jsonl", docs);

  auto qa = [](const std::vector<QAExample>& list) {
    std::string out;
    for (const auto& ex : list) {
      out += ex.question + "\t";
      for (std::size_t i = 0; i < ex.answers.size(); ++i) out += (i ? "|" : "") + ex.answers[i];
      out += "\t" + ex.qtype + "\n";
    }
    return out;
  };
  WriteFile(dir + "/qa_train.tsv", qa(corpus.train));
  WriteFile(dir + "/qa_dev.tsv", qa(corpus.dev));
  WriteFile(dir + "/qa_test.tsv", qa(corpus.test));
  WriteFile(dir + "/manifest.json", corpus.Manifest().dump(2) + "\n");
}

SynthCorpus LoadCorpus(const std::string& dir) {
  SynthCorpus c;
  nlohmann::json manifest;
  {
    std::ifstream in(dir + "/manifest.json");
    if (!in) throw DataError("cannot open " + dir + "/manifest.json");
    try {
      manifest = nlohmann::json::parse(in);
      c.config = GenConfig::FromJson(manifest.at("config"));
      const auto& s = manifest.at("doc_stats");
      c.doc_stats.sentences = s.at("sentences").get<std::size_t>();
      c.doc_stats.conjunction_decisions = s.at("conjunction_decisions").get<std::size_t>();
      c.doc_stats.conjunctions = s.at("conjunctions").get<std::size_t>();
      c.doc_stats.coreference_eligible = s.at("coreference_eligible").get<std::size_t>();
      c.doc_stats.coreferences = s.at("coreferences").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError("malformed manifest.json: " + std::string(e.what()));
    } catch (const ConfigError& e) {
      throw DataError("manifest.json config: " + std::string(e.what()));
    }
  }

  for (const auto& line : ReadLines(dir + "/kb.tsv")) {
    auto f = SplitOn(line, '\t');
    if (f.size() != 3 || f[0].empty() || f[1].empty() || f[2].empty()) {
      throw DataError("kb.tsv: malformed line '" + line + "'");
    }
    c.kb.triples.push_back({f[0], f[1], f[2]});
  }
  DerivePools(c.kb);

  for (const auto& line : ReadLines(dir + "/docs.jsonl")) {
    try {
      auto j = nlohmann::json::parse(line);
      RawDocument d;
      d.title = j.at("title").get<std::string>();
      d.sentences = j.at("sentences").get<std::vector<std::string>>();
      c.docs.push_back(std::move(d));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("docs.jsonl: " + std::string(e.what()));
    }
  }

  SupportIndex support(c.kb);
  auto load_qa = [&](const char* name, Split split, std::vector<QAExample>& out) {
    for (const auto& line : ReadLines(dir + "/qa_" + name + ".tsv")) {
      auto f = SplitOn(line, '\t');
      if (f.size() != 3) throw DataError(std::string("qa_") + name + ".tsv: malformed line '" + line + "'");
      QAExample ex;
      ex.question = f[0];
      ex.answers = SplitOn(f[1], '|');
      ex.qtype = f[2];
      ex.split = split;
      support.Locate(ex);
      out.push_back(std::move(ex));
    }
  };
  load_qa("train", Split::kTrain, c.train);
  load_qa("dev", Split::kDev, c.dev);
  load_qa("test", Split::kTest, c.test);
  return c;
}

std::vector<KBTriple> ParseDocumentFacts(const RawDocument& doc, const PatternBank& bank,
                                         const EntityDictionary& entities) {
  struct Form {
    std::string relation;
    std::vector<std::string> words;  // "{o}" slot kept as the literal "o"
    std::size_t slot;
  };
  std::vector<Form> forms;
  for (const auto& [relation, list] : bank.templates) {
    for (const auto& t : list) {
      std::string marked = t;
      marked.replace(marked.find("{o}"), 3, "OBJSLOT");
      Form f{relation, SplitWords(marked), 0};
      f.slot = static_cast<std::size_t>(
          std::find(f.words.begin(), f.words.end(), "objslot") - f.words.begin());
      forms.push_back(std::move(f));
    }
  }

  const std::string title = EntityDictionary::TokenFor(doc.title);
  std::vector<KBTriple> out;
  for (const auto& sentence : doc.sentences) {
    const auto tokens = Tokenize(sentence, entities);
    if (tokens.size() < 2 || tokens.front() != title) continue;
    for (const auto& f : forms) {
      if (tokens.size() != f.words.size() + 1) continue;
      bool match = true;
      for (std::size_t k = 0; k < f.words.size() && match; ++k) {
        if (k == f.slot) {
          match = entities.ContainsToken(tokens[k + 1]);
        } else {
          match = tokens[k + 1] == f.words[k];
        }
      }
      if (match) {
        out.push_back({title, f.relation, tokens[f.slot + 1]});
        break;
      }
    }
  }
  return out;
}

}  // namespace kvmemnn
