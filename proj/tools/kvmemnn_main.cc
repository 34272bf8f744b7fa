// kvmemnn: generate synthetic corpora, train and evaluate key-value memory
// networks, and inspect their hops.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "kvmemnn/checkpoint.h"
#include "kvmemnn/datagen.h"
#include "kvmemnn/evaluation.h"
#include "kvmemnn/experiment.h"
#include "kvmemnn/model.h"
#include "kvmemnn/train.h"

namespace fs = std::filesystem;
using namespace kvmemnn;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

nlohmann::json ReadJsonFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

void EnsureDir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir + ": " + ec.message());
}

// ---- generate --------------------------------------------------------------

struct GenerateArgs {
  std::string config;
  std::string out;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n_movies;
  std::optional<std::size_t> templates;
  std::optional<double> conj;
  std::optional<double> coref;
  bool two_hop = false;
};

GenConfig ResolveGenConfig(const GenerateArgs& a) {
  nlohmann::json j = a.config.empty() ? nlohmann::json::object() : ReadJsonFile(a.config);
  if (a.seed) j["seed"] = *a.seed;
  if (a.n_movies) j["n_movies"] = *a.n_movies;
  if (a.templates) j["templates_per_relation"] = *a.templates;
  if (a.conj) j["conjunction_rate"] = *a.conj;
  if (a.coref) j["coreference_rate"] = *a.coref;
  if (a.two_hop) j["two_hop_questions"] = true;
  return GenConfig::FromJson(j);
}

void PrintCorpusSummary(const SynthCorpus& c, const std::string& dir) {
  const auto m = c.Manifest();
  std::printf("%s: %zu movies, %zu triples, %zu documents, questions train/dev/test %zu/%zu/%zu\n",
              dir.c_str(), c.kb.movies.size(), c.kb.triples.size(), c.docs.size(), c.train.size(),
              c.dev.size(), c.test.size());
  std::printf("  conjunction rate %.3f, coreference rate %.3f, recommended F %zu\n",
              m["doc_stats"]["measured_conjunction_rate"].get<double>(),
              m["doc_stats"]["measured_coreference_rate"].get<double>(), c.RecommendedF());
}

int CmdGenerate(const GenerateArgs& a) {
  const GenConfig config = ResolveGenConfig(a);
  if (a.preset.empty()) {
    EnsureDir(a.out);
    const SynthCorpus corpus = GenerateCorpus(config);
    EmitCorpus(corpus, a.out);
    PrintCorpusSummary(corpus, a.out);
    return 0;
  }
  if (a.preset != "ladder") throw ConfigError("unknown preset '" + a.preset + "' (expected ladder)");
  for (const auto& row : LadderPresets(config)) {
    const std::string dir = (fs::path(a.out) / row.name).string();
    EnsureDir(dir);
    const SynthCorpus corpus = GenerateCorpus(row.gen);
    EmitCorpus(corpus, dir);
    PrintCorpusSummary(corpus, dir);
  }
  return 0;
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string corpus;
  std::string out;
  std::string source;
  std::string representation;
  std::string baseline;
  std::optional<std::size_t> epochs, dim, hops, window, seed, freq_threshold;
  std::optional<double> lr, dropout, init_scale;
  bool no_hashing = false;
  bool untied = false;
  bool hop_identity = false;
  bool resume = false;
};

ExperimentConfig ResolveExperiment(const TrainArgs& a) {
  nlohmann::json j = a.config.empty() ? nlohmann::json::object() : ReadJsonFile(a.config);
  if (!a.corpus.empty()) j["corpus_dir"] = a.corpus;
  if (!a.out.empty()) j["output_dir"] = a.out;
  if (!a.source.empty()) j["source"] = a.source;
  if (!a.representation.empty()) j["representation"] = a.representation;
  if (!a.baseline.empty()) j["baseline"] = a.baseline;
  if (a.no_hashing) j["hashing"] = false;
  auto& h = j["hyper"];
  if (h.is_null()) h = nlohmann::json::object();
  if (a.epochs) h["epochs"] = *a.epochs;
  if (a.dim) h["dim"] = *a.dim;
  if (a.hops) h["hops"] = *a.hops;
  if (a.window) h["window"] = *a.window;
  if (a.seed) h["seed"] = *a.seed;
  if (a.lr) h["lr"] = *a.lr;
  if (a.init_scale) h["init_scale"] = *a.init_scale;
  if (a.untied) h["tied"] = false;
  if (a.hop_identity) h["hop_identity_init"] = true;
  if (a.dropout) {
    h["dropout_question"] = *a.dropout;
    h["dropout_memory"] = *a.dropout;
    h["dropout_answer"] = *a.dropout;
  }
  if (a.freq_threshold) {
    h["freq_threshold"] = *a.freq_threshold;
    j["auto_freq_threshold"] = false;
  }
  // Infer the source from the representation when only one was given.
  if (j.contains("representation") && !j.contains("source")) {
    j["source"] = j["representation"] == "kb_triple" ? "kb" : "doc";
  }
  ExperimentConfig c = ExperimentConfig::FromJson(j);
  if (c.corpus_dir.empty()) throw ConfigError("no corpus directory (--corpus)");
  if (c.output_dir.empty()) throw ConfigError("no output directory (--out)");
  return c;
}

Checkpoint MakeCheckpoint(const Experiment& exp, const ModelParams& params, std::size_t epochs_done,
                          std::size_t best_epoch) {
  Checkpoint ckpt;
  ckpt.params = params;
  ckpt.experiment = exp.config.ToJson();
  ckpt.vocab_tokens = exp.vocab.tokens();
  ckpt.center_encoded = exp.vocab.center_encoded();
  ckpt.vocab_hash = exp.vocab.Hash();
  ckpt.manifest_hash = exp.manifest_hash;
  ckpt.epochs_done = epochs_done;
  ckpt.best_epoch = best_epoch;
  ckpt.has_store = true;
  ckpt.store = exp.store;
  return ckpt;
}

void CheckCompatible(const Checkpoint& ckpt, const Experiment& exp) {
  if (ckpt.vocab_hash != exp.vocab.Hash()) {
    throw DataError("vocabulary hash mismatch: the checkpoint was trained on a corpus whose "
                    "dictionary differs from this one (checkpoint " +
                    HexHash(ckpt.vocab_hash) + ", corpus " + HexHash(exp.vocab.Hash()) + ")");
  }
  if (ckpt.params.features() != exp.vocab.feature_dim()) {
    throw DataError("checkpoint feature dimension does not match the corpus vocabulary");
  }
  if (ckpt.has_store && (ckpt.store.size() != exp.store.size() ||
                         ckpt.store.postings() != exp.store.postings())) {
    throw DataError("checkpoint memory index does not match the index rebuilt from the corpus");
  }
}

std::string Fingerprint(const std::string& manifest_hash, const std::string& checkpoint_path) {
  return "manifest:" + manifest_hash + " checkpoint:" + FileHash(checkpoint_path);
}

void WriteReport(const EvalReport& report, const fs::path& dir, const std::string& stem) {
  WriteText(dir / (stem + ".json"), report.ToJson().dump(2) + "\n");
  WriteText(dir / (stem + ".txt"), report.ToText());
}

int CmdTrain(const TrainArgs& a) {
  const ExperimentConfig config = ResolveExperiment(a);
  EnsureDir(config.output_dir);
  const fs::path out(config.output_dir);
  const SynthCorpus corpus = LoadCorpus(config.corpus_dir);
  const Experiment exp = BuildExperiment(corpus, config);
  if (exp.train.empty()) throw DataError("no usable training questions in " + config.corpus_dir);
  std::fprintf(stderr, "memory %zu slots, %zu candidates, D=%zu, F=%zu, train/dev/test %zu/%zu/%zu\n",
               exp.store.size(), exp.candidates.size(), exp.vocab.base_size(),
               exp.config.hyper.freq_threshold, exp.train.size(), exp.dev.size(), exp.test.size());
  if (exp.dropped_questions > 0) {
    std::fprintf(stderr, "warning: %zu questions without a resolvable answer were skipped\n",
                 exp.dropped_questions);
  }

  ModelParams init = InitExperimentParams(exp);
  TrainOptions options;
  std::optional<Checkpoint> previous_best;
  const fs::path last_path = out / "last.ckpt";
  const fs::path best_path = out / "model.ckpt";
  if (a.resume) {
    Checkpoint last = LoadCheckpoint(last_path.string());
    CheckCompatible(last, exp);
    init = last.params;
    options.first_epoch = last.epochs_done;
    previous_best = LoadCheckpoint(best_path.string());
  }

  std::ofstream log(out / "train_log.jsonl", a.resume ? std::ios::app : std::ios::trunc);
  if (!log) throw DataError("cannot write training log");
  options.on_epoch = [&log](const EpochStats& s) {
    log << nlohmann::json{{"epoch", s.epoch},
                          {"train_loss", s.train_loss},
                          {"dev_hits1", s.dev_hits1},
                          {"dev_mrr", s.dev_mrr},
                          {"clipped", s.clipped}}
               .dump()
        << "\n";
    log.flush();
    std::fprintf(stderr, "epoch %zu  loss %.5f  dev hits@1 %.2f  dev MRR %.4f\n", s.epoch,
                 s.train_loss, s.dev_hits1, s.dev_mrr);
  };

  TrainResult result = TrainExperiment(exp, init, options);
  const std::size_t done = options.first_epoch + exp.config.hyper.epochs;
  ModelParams best = result.best;
  std::size_t best_epoch = result.best_epoch;
  if (previous_best) {
    const auto old = EvaluateInstances(previous_best->params, exp.dev, exp.store, exp.candidates,
                                       exp.kind());
    const auto now = EvaluateInstances(best, exp.dev, exp.store, exp.candidates, exp.kind());
    const bool mrr = exp.sentence_mode();
    if ((mrr ? old.mrr : old.hits1) >= (mrr ? now.mrr : now.hits1)) {
      best = previous_best->params;
      best_epoch = previous_best->best_epoch;
    }
  }
  SaveCheckpoint(MakeCheckpoint(exp, result.last, done, best_epoch), last_path.string());
  SaveCheckpoint(MakeCheckpoint(exp, best, done, best_epoch), best_path.string());
  WriteText(out / "experiment.json", exp.config.ToJson().dump(2) + "\n");

  EvalReport report = EvaluateExperiment(exp, best, exp.dev);
  report.fingerprint = Fingerprint(exp.manifest_hash, best_path.string());
  WriteReport(report, out, "dev_report");
  std::printf("best epoch %zu, dev hits@1 %.2f, MRR %.4f\n", best_epoch, report.overall_hits1,
              report.mrr);
  return 0;
}

// ---- eval / inspect ----------------------------------------------------------

struct LoadedModel {
  Checkpoint ckpt;
  Experiment exp;
};

LoadedModel LoadModel(const std::string& checkpoint, const std::string& corpus_override) {
  LoadedModel m;
  m.ckpt = LoadCheckpoint(checkpoint);
  ExperimentConfig config = ExperimentConfig::FromJson(m.ckpt.experiment);
  if (!corpus_override.empty()) config.corpus_dir = corpus_override;
  const SynthCorpus corpus = LoadCorpus(config.corpus_dir);
  m.exp = BuildExperiment(corpus, config);
  CheckCompatible(m.ckpt, m.exp);
  return m;
}

Split ParseSplit(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "dev") return Split::kDev;
  if (s == "test") return Split::kTest;
  throw ConfigError("unknown split '" + s + "' (expected train|dev|test)");
}

int CmdEval(const std::string& checkpoint, const std::string& corpus, const std::string& split_name,
            const std::string& out_dir, bool dump_rankings) {
  const Split split = ParseSplit(split_name);
  LoadedModel m = LoadModel(checkpoint, corpus);
  const auto& data = m.exp.split(split);
  if (data.empty()) throw DataError(std::string("split ") + split_name + " is empty");
  std::vector<Ranking> rankings;
  std::vector<GoldSet> gold;
  EvalReport report = EvaluateExperiment(m.exp, m.ckpt.params, data, &rankings, &gold);
  report.fingerprint = Fingerprint(m.exp.manifest_hash, checkpoint);
  const fs::path out = out_dir.empty() ? fs::path(checkpoint).parent_path() : fs::path(out_dir);
  EnsureDir(out.string());
  WriteReport(report, out, std::string(split_name) + "_report");
  if (dump_rankings) {
    std::ofstream r(out / (split_name + "_rankings.jsonl"));
    for (std::size_t i = 0; i < rankings.size(); ++i) {
      r << nlohmann::json{{"qtype", data[i].qtype}, {"gold", gold[i]}, {"ranking", rankings[i]}}
               .dump()
        << "\n";
    }
  }
  std::cout << report.ToText();
  return 0;
}

std::string DescribeVec(const SparseVec& v, const Vocabulary& vocab) {
  std::string out;
  const std::size_t d = vocab.base_size();
  for (const auto& [i, w] : v.entries()) {
    if (!out.empty()) out += ' ';
    out += vocab.Token(static_cast<std::uint32_t>(i % d));
    if (i >= d) out += '*';
    if (w != 1.0) out += "x" + std::to_string(static_cast<int>(w));
  }
  return out;
}

int CmdInspect(const std::string& checkpoint, const std::string& corpus,
               const std::string& question, std::size_t top_k) {
  LoadedModel m = LoadModel(checkpoint, corpus);
  const Experiment& exp = m.exp;
  const SparseVec q = exp.Question(question);
  if (q.empty()) std::cerr << "warning: every question word is out of vocabulary\n";
  std::vector<std::uint32_t> memory;
  HopTrace trace;
  if (exp.kind() == ModelKind::kSupervisedEmbeddings) {
    trace = SupervisedEmbeddingsForward(m.ckpt.params, q, exp.candidates);
  } else {
    if (exp.config.hashing) {
      const HashResult h = exp.store.Hash(q);
      if (h.fallback) std::cerr << "warning: no indexed word matched; using the fallback set\n";
      memory = h.slots;
    } else {
      memory = exp.store.AllSlots();
    }
    trace = Forward(m.ckpt.params, q, MemoryView::Of(exp.store, memory), exp.candidates);
  }
  std::printf("question: %s\n", question.c_str());
  std::printf("features: %s\n", DescribeVec(q, exp.vocab).c_str());
  std::printf("hashed memories N=%zu\n", memory.size());
  for (std::size_t h = 0; h < trace.hops(); ++h) {
    const DenseVec& p = trace.addressing[h];
    std::vector<std::size_t> order(p.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&p](std::size_t x, std::size_t y) { return p[x] > p[y]; });
    double sum = 0.0;
    for (double v : p) sum += v;
    std::printf("hop %zu (probabilities sum to %.6f)\n", h + 1, sum);
    for (std::size_t k = 0; k < std::min(top_k, order.size()); ++k) {
      const auto& slot = exp.store.slot(memory[order[k]]);
      std::printf("  %.4f  slot %u  [%s] -> [%s]\n", p[order[k]], memory[order[k]],
                  DescribeVec(slot.key, exp.vocab).c_str(), DescribeVec(slot.value, exp.vocab).c_str());
    }
  }
  const auto ranked = Rank(trace, exp.candidates);
  std::printf("answers\n");
  for (std::size_t k = 0; k < std::min(top_k, ranked.size()); ++k) {
    const auto idx = static_cast<std::size_t>(exp.candidates.IndexOf(ranked[k].id));
    std::printf("  %.4f  %s\n", ranked[k].score, exp.candidate_names[idx].c_str());
  }
  return 0;
}

// ---- ladder ------------------------------------------------------------------

int CmdLadder(const GenerateArgs& g, const TrainArgs& t) {
  const GenConfig base = ResolveGenConfig(g);
  EnsureDir(g.out);
  nlohmann::json rows = nlohmann::json::array();
  std::ostringstream table;
  table << "corpus                      source  test hits@1\n";
  for (const auto& row : LadderPresets(base)) {
    const std::string dir = (fs::path(g.out) / row.name).string();
    EnsureDir(dir);
    const SynthCorpus corpus = GenerateCorpus(row.gen);
    EmitCorpus(corpus, dir);
    TrainArgs args = t;
    args.corpus = dir;
    args.out = (fs::path(dir) / "model").string();
    if (row.source == Source::kKb) {
      args.representation = "kb_triple";
      args.source = "kb";
    } else {
      if (args.representation.empty() || args.representation == "kb_triple") {
        args.representation = "window_center_title";
      }
      args.source = "doc";
    }
    const ExperimentConfig config = ResolveExperiment(args);
    const Experiment exp = BuildExperiment(corpus, config);
    const TrainResult result = TrainExperiment(exp, InitExperimentParams(exp));
    const EvalReport report = EvaluateExperiment(exp, result.best, exp.test);
    EnsureDir(config.output_dir);
    const std::string ckpt = (fs::path(config.output_dir) / "model.ckpt").string();
    SaveCheckpoint(MakeCheckpoint(exp, result.best, config.hyper.epochs, result.best_epoch), ckpt);
    EvalReport stamped = report;
    stamped.fingerprint = Fingerprint(exp.manifest_hash, ckpt);
    WriteReport(stamped, config.output_dir, "test_report");
    rows.push_back({{"corpus", row.name},
                    {"source", SourceName(row.source)},
                    {"representation", RepresentationName(config.representation)},
                    {"test_hits1", report.overall_hits1},
                    {"fingerprint", stamped.fingerprint}});
    char line[128];
    std::snprintf(line, sizeof(line), "%-27s %-7s %11.2f\n", row.name.c_str(), SourceName(row.source),
                  report.overall_hits1);
    table << line;
    std::cout << line << std::flush;
  }
  WriteText(fs::path(g.out) / "ladder.json", rows.dump(2) + "\n");
  WriteText(fs::path(g.out) / "ladder.txt", table.str());
  return 0;
}

void AddGenerateOptions(CLI::App* cmd, GenerateArgs& g) {
  cmd->add_option("--config", g.config, "generation config (JSON)");
  cmd->add_option("--seed", g.seed, "random seed");
  cmd->add_option("--n-movies", g.n_movies, "number of movies");
  cmd->add_option("--templates", g.templates, "templates per relation (1..100)");
  cmd->add_option("--conj", g.conj, "conjunction rate");
  cmd->add_option("--coref", g.coref, "coreference rate");
  cmd->add_flag("--two-hop", g.two_hop, "add director-to-year questions");
}

void AddTrainOptions(CLI::App* cmd, TrainArgs& t) {
  cmd->add_option("--representation", t.representation,
                  "kb_triple|sentence|window|window_center|window_title|window_center_title|"
                  "window_sentence");
  cmd->add_option("--baseline", t.baseline, "none|memnn|se");
  cmd->add_option("--epochs", t.epochs, "training epochs");
  cmd->add_option("--dim", t.dim, "embedding dimension");
  cmd->add_option("--hops", t.hops, "number of hops");
  cmd->add_option("--window", t.window, "window size (odd)");
  cmd->add_option("--lr", t.lr, "learning rate");
  cmd->add_option("--init-scale", t.init_scale, "init bound times sqrt(dim)");
  cmd->add_option("--dropout", t.dropout, "word dropout rate for all banks");
  cmd->add_option("--train-seed", t.seed, "training seed");
  cmd->add_option("--freq-threshold", t.freq_threshold, "hashing threshold F");
  cmd->add_flag("--no-hashing", t.no_hashing, "read every memory slot");
  cmd->add_flag("--untied", t.untied, "separate output embedding B");
  cmd->add_flag("--hop-identity-init", t.hop_identity, "start each R_j at the identity");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Key-value memory networks on synthetic movie QA"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "generate a synthetic corpus");
  AddGenerateOptions(generate, gen);
  generate->add_option("--out", gen.out, "output directory")->required();
  generate->add_option("--preset", gen.preset, "ladder: the six document-ladder corpora");

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "train a model on a corpus");
  train->add_option("--config", tr.config, "experiment config (JSON)");
  train->add_option("--corpus", tr.corpus, "corpus directory");
  train->add_option("--out", tr.out, "experiment output directory");
  train->add_option("--source", tr.source, "kb|doc");
  AddTrainOptions(train, tr);
  train->add_flag("--resume", tr.resume, "continue from <out>/last.ckpt");

  std::string checkpoint, corpus, split = "test", out, question;
  bool dump = false;
  std::size_t top_k = 5;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  eval->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  eval->add_option("--corpus", corpus, "corpus directory (default: the training corpus)");
  eval->add_option("--split", split, "train|dev|test");
  eval->add_option("--out", out, "report directory (default: next to the checkpoint)");
  eval->add_flag("--dump-rankings", dump, "write full rankings as JSONL");

  auto* inspect = app.add_subcommand("inspect", "dump the hop trace for one question");
  inspect->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  inspect->add_option("--corpus", corpus, "corpus directory (default: the training corpus)");
  inspect->add_option("--question", question, "question text")->required();
  inspect->add_option("--top-k", top_k, "rows to show per hop");

  GenerateArgs lgen;
  TrainArgs ltr;
  auto* ladder = app.add_subcommand("ladder", "generate, train and compare the six ladder corpora");
  AddGenerateOptions(ladder, lgen);
  ladder->add_option("--out", lgen.out, "output directory")->required();
  AddTrainOptions(ladder, ltr);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*generate) return CmdGenerate(gen);
    if (*train) return CmdTrain(tr);
    if (*eval) return CmdEval(checkpoint, corpus, split, out, dump);
    if (*inspect) return CmdInspect(checkpoint, corpus, question, top_k);
    if (*ladder) return CmdLadder(lgen, ltr);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
