// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero when any of them fails. Pass criterion numbers as arguments
// to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <numeric>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "kvmemnn/datagen.h"
#include "kvmemnn/evaluation.h"
#include "kvmemnn/experiment.h"
#include "kvmemnn/memory_store.h"
#include "kvmemnn/model.h"
#include "test_util.h"

namespace kvmemnn {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

std::string Fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, a, b, c, d);
  return buf;
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

// ---- shared corpora and trainings -------------------------------------------

constexpr std::size_t kMovies = 500;
constexpr std::size_t kEpochs = 20;

GenConfig BaseGen() {
  GenConfig g;
  g.n_movies = kMovies;
  g.seed = 1;
  return g;
}

struct RunResult {
  double best_dev = 0.0;
  std::size_t best_epoch = 0;
  EvalReport dev;
  EvalReport test;
  double seconds = 0.0;
  std::vector<EpochStats> curve;
};

RunResult RunExperiment(const SynthCorpus& corpus, ExperimentConfig cfg, const std::string& label) {
  const auto start = Clock::now();
  if (cfg.hyper.epochs == HyperParams{}.epochs) cfg.hyper.epochs = kEpochs;
  const Experiment exp = BuildExperiment(corpus, cfg);
  const TrainResult tr = TrainExperiment(exp, InitExperimentParams(exp));
  RunResult r;
  r.curve = tr.curve;
  r.best_epoch = tr.best_epoch;
  r.best_dev = tr.curve.empty() ? 0.0 : tr.curve[tr.best_epoch - tr.curve.front().epoch].dev_hits1;
  r.dev = EvaluateExperiment(exp, tr.best, exp.dev);
  r.test = EvaluateExperiment(exp, tr.best, exp.test);
  r.seconds = Seconds(start);
  std::printf("  [run] %-34s dev %6.2f (epoch %zu)  test %6.2f  %6.1fs\n", label.c_str(),
              r.best_dev, r.best_epoch, r.test.overall_hits1, r.seconds);
  std::fflush(stdout);
  return r;
}

ExperimentConfig Kb(Baseline b = Baseline::kNone) {
  ExperimentConfig c;
  c.source = Source::kKb;
  c.representation = Representation::kKbTriple;
  c.baseline = b;
  return c;
}

ExperimentConfig Doc(Representation r) {
  ExperimentConfig c;
  c.source = Source::kDoc;
  c.representation = r;
  return c;
}

// Lazily computed so that a subset run only pays for what it needs.
class Shared {
 public:
  const std::vector<LadderRow>& ladder() {
    if (ladder_.empty()) ladder_ = LadderPresets(BaseGen());
    return ladder_;
  }
  const SynthCorpus& corpus(const std::string& name) {
    auto it = corpora_.find(name);
    if (it == corpora_.end()) {
      for (const auto& row : ladder()) {
        if (row.name == name) it = corpora_.emplace(name, GenerateCorpus(row.gen)).first;
      }
    }
    return it->second;
  }
  const RunResult& run(const std::string& key, const std::string& corpus_name,
                       const ExperimentConfig& cfg) {
    auto it = runs_.find(key);
    if (it == runs_.end()) it = runs_.emplace(key, RunExperiment(corpus(corpus_name), cfg, key)).first;
    return it->second;
  }
  // KB-source KV-MemNN on the 500-movie corpus.
  const RunResult& kb_kv() { return run("kb/kv-memnn", "kb", Kb()); }
  // Documents at the default corruption rates: all templates, conj 0.5, coref 0.8.
  const RunResult& doc(Representation r) {
    return run(std::string("doc/") + RepresentationName(r), "all_templates_conj_coref", Doc(r));
  }

 private:
  std::vector<LadderRow> ladder_;
  std::map<std::string, SynthCorpus> corpora_;
  std::map<std::string, RunResult> runs_;
};

// ---- 1: gradient correctness ------------------------------------------------

Verdict GradientCorrectness(Shared&) {
  const auto start = Clock::now();
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  std::size_t n = 0;
  for (int trial = 0; trial < 120; ++trial) {
    const std::size_t d = 1 + rng() % 8;
    const std::size_t features = 6 + rng() % 25;
    const std::size_t hops = 1 + trial % 3;
    const bool tied = trial % 2 == 0;
    auto p = testing::MakeProblem(rng, d, features, hops, 1 + rng() % 5, 2 + rng() % 5, tied);
    const MemoryView mem = MemoryView::Of(p.slots);
    const auto trace = Forward(p.params, p.question, mem, p.candidates);
    const auto analytic = Backward(p.params, trace, p.gold);
    const auto numeric = FiniteDifferenceGrad(
        [&](const ModelParams& m) { return TraceLoss(Forward(m, p.question, mem, p.candidates), p.gold); },
        p.params, 1e-5);
    worst = std::max(worst, testing::MaxGradientError(p.params, analytic, numeric));
    ++n;
  }
  const double secs = Seconds(start);
  return {worst < 1e-4 && secs < 60.0,
          Fmt("max relative error %.2e over %.0f instances (H 1-3, tied+untied), %.1fs", worst,
              static_cast<double>(n), secs)};
}

// ---- 2: MemNN degeneracy ----------------------------------------------------

Verdict MemNNDegeneracy(Shared&) {
  std::mt19937_64 rng(77);
  std::size_t equal = 0, total = 0;
  for (int trial = 0; trial < 60; ++trial) {
    auto p = testing::MakeProblem(rng, 2 + rng() % 10, 40, 1 + trial % 3, 1 + rng() % 6,
                                  2 + rng() % 6, trial % 2 == 0, /*key_equals_value=*/true);
    std::vector<SparseVec> memories;
    for (const auto& s : p.slots) memories.push_back(s.key);
    const auto trace = Forward(p.params, p.question, MemoryView::Of(p.slots), p.candidates);
    const auto want = testing::StandardMemNNLogits(p.params, p.question, memories, p.candidates);
    bool same = want.size() == trace.logits.size();
    for (std::size_t c = 0; same && c < want.size(); ++c) {
      same = std::memcmp(&want[c], &trace.logits[c], sizeof(double)) == 0;
    }
    equal += same;
    ++total;
  }
  return {equal == total, Fmt("%.0f/%.0f instances bitwise equal", static_cast<double>(equal),
                              static_cast<double>(total))};
}

// ---- 3: hashing oracle ------------------------------------------------------

Verdict HashingOracle(Shared&) {
  std::mt19937_64 rng(99);
  const std::size_t dim = 2000;
  std::vector<double> weights(dim);
  for (std::size_t i = 0; i < dim; ++i) weights[i] = 1.0 / static_cast<double>(i + 1);
  std::discrete_distribution<std::uint32_t> word(weights.begin(), weights.end());
  std::size_t checked = 0, mismatches = 0;
  for (std::size_t n : {50u, 1000u, 5000u}) {
    std::vector<MemorySlot> slots(n);
    std::vector<std::set<std::uint32_t>> words(n);
    std::map<std::uint32_t, std::size_t> freq;
    for (std::size_t s = 0; s < n; ++s) {
      std::vector<SparseVec::Entry> e;
      const std::size_t len = 1 + rng() % 6;
      for (std::size_t k = 0; k < len; ++k) e.emplace_back(word(rng), 1.0);
      slots[s].key = SparseVec::FromUnsorted(dim, e);
      for (auto [t, w] : slots[s].key.entries()) {
        words[s].insert(t);
        freq[t] += static_cast<std::size_t>(w);
      }
    }
    for (std::size_t F : {std::size_t{1}, std::size_t{5}, std::size_t{50}, kNoFrequencyFilter}) {
      const auto store = MemoryStore::Build(slots, dim, F, n);
      for (int trial = 0; trial < 40; ++trial) {
        std::set<std::uint32_t> q;
        const std::size_t len = 1 + rng() % 5;
        for (std::size_t k = 0; k < len; ++k) q.insert(word(rng));
        std::vector<SparseVec::Entry> qe;
        for (auto t : q) qe.emplace_back(t, 1.0);
        // Brute force: shares at least one word whose frequency is below F.
        std::vector<std::uint32_t> want;
        for (std::uint32_t s = 0; s < n; ++s) {
          for (auto t : q) {
            if (words[s].count(t) && freq[t] < F) {
              want.push_back(s);
              break;
            }
          }
        }
        const auto got = store.Hash(SparseVec::FromUnsorted(dim, qe));
        const std::vector<std::uint32_t> filtered = got.fallback ? std::vector<std::uint32_t>{} : got.slots;
        mismatches += filtered != want;
        ++checked;
      }
    }
  }
  return {mismatches == 0, Fmt("%.0f queries over 50/1000/5000 slots and F in {1,5,50,inf}, %.0f mismatches",
                               static_cast<double>(checked), static_cast<double>(mismatches))};
}

// ---- 4: KB-source learnability ----------------------------------------------

Verdict KbLearnability(Shared& shared) {
  const auto start = Clock::now();
  const auto& corpus = shared.corpus("kb");
  const double gen_secs = Seconds(start);
  const auto& r = shared.kb_kv();
  const std::size_t questions = corpus.train.size() + corpus.dev.size() + corpus.test.size();
  return {r.best_dev >= 90.0 && r.best_epoch < 50 && r.seconds + gen_secs < 900.0,
          Fmt("dev hits@1 %.2f at epoch %.0f (%.0f questions), %.0fs", r.best_dev,
              static_cast<double>(r.best_epoch), static_cast<double>(questions), r.seconds + gen_secs)};
}

// ---- 5: representation ladder -----------------------------------------------

Verdict RepresentationLadder(Shared& shared) {
  const double sentence = shared.doc(Representation::kSentence).test.overall_hits1;
  const double window = shared.doc(Representation::kWindow).test.overall_hits1;
  const double title = shared.doc(Representation::kWindowTitle).test.overall_hits1;
  const double center_title = shared.doc(Representation::kWindowCenterTitle).test.overall_hits1;
  const double tie = 2.0;
  const bool ordered = center_title >= title - tie && title >= window - tie && window >= sentence - tie;
  const bool spread = center_title - sentence >= 5.0;
  return {ordered && spread,
          Fmt("test hits@1 sentence %.2f, window %.2f, window+title %.2f, window+center+title %.2f",
              sentence, window, title, center_title) +
              (ordered ? "; ordered" : "; ORDER BROKEN") +
              Fmt("; spread %.2f (need >= 5)", center_title - sentence)};
}

// ---- 6: synthetic-document ladder -------------------------------------------

Verdict DocumentLadder(Shared& shared) {
  std::map<std::string, double> h;
  for (const auto& row : shared.ladder()) {
    const auto& r = row.source == Source::kKb
                        ? shared.kb_kv()
                        : row.name == "all_templates_conj_coref"
                              ? shared.doc(Representation::kWindowCenterTitle)
                              : shared.run("ladder/" + row.name, row.name,
                                           Doc(Representation::kWindowCenterTitle));
    h[row.name] = r.test.overall_hits1;
  }
  const double tie = 2.0;
  auto ge = [&](const std::string& a, const std::string& b) { return h[a] >= h[b] - tie; };
  const bool monotone = ge("kb", "one_template") && ge("one_template", "all_templates") &&
                        ge("all_templates", "one_template_coref") &&
                        ge("all_templates", "one_template_conj") &&
                        ge("one_template_coref", "all_templates_conj_coref") &&
                        ge("one_template_conj", "all_templates_conj_coref");
  const double drop = h["kb"] - h["all_templates_conj_coref"];
  std::ostringstream s;
  s << "test hits@1";
  for (const auto& row : shared.ladder()) s << " " << row.name << " " << Fmt("%.2f", h[row.name]);
  s << (monotone ? "; monotone" : "; NOT MONOTONE") << Fmt("; drop %.2f (need >= 10)", drop);
  return {monotone && drop >= 10.0, s.str()};
}

// ---- 7: hop utility ---------------------------------------------------------

Verdict HopUtility(Shared&) {
  GenConfig g;
  g.n_movies = 60;
  g.seed = 1;
  g.two_hop_questions = true;
  const auto corpus = GenerateCorpus(g);
  std::map<std::size_t, double> two_hop;
  for (std::size_t hops : {1u, 2u}) {
    ExperimentConfig c = Kb();
    c.hashing = false;  // the second edge shares no word with the question
    c.hyper.hops = hops;
    c.hyper.epochs = 40;
    // With purely random R the second hop starts out scrambling the query
    // and never learns to follow the movie it found; both arms share this init.
    c.hyper.hop_identity_init = true;
    const auto r = RunExperiment(corpus, c, "two-hop/H=" + std::to_string(hops));
    two_hop[hops] = TypeHits1(r.dev, kTwoHopType);
  }
  return {two_hop[2] - two_hop[1] >= 5.0,
          Fmt("dev hits@1 on the two-edge family: H=1 %.2f, H=2 %.2f (need gap >= 5)", two_hop[1],
              two_hop[2])};
}

// ---- 8: baseline ordering ---------------------------------------------------

Verdict BaselineOrdering(Shared& shared) {
  const double se = shared.run("kb/supervised-embeddings", "kb", Kb(Baseline::kSupervisedEmbeddings))
                        .test.overall_hits1;
  const double memnn = shared.run("kb/memnn", "kb", Kb(Baseline::kMemNN)).test.overall_hits1;
  const double kv = shared.kb_kv().test.overall_hits1;
  return {memnn - se >= 2.0 && kv - memnn >= 2.0,
          Fmt("test hits@1 SE %.2f < MemNN %.2f < KV-MemNN %.2f (each gap >= 2)", se, memnn, kv)};
}

// ---- 9: metric correctness --------------------------------------------------

Verdict MetricCorrectness(Shared&) {
  std::mt19937_64 rng(4242);
  std::vector<Ranking> rankings;
  std::vector<GoldSet> gold;
  long double hits = 0, ap_sum = 0, rr_sum = 0;
  for (int i = 0; i < 1000; ++i) {
    Ranking r(rng() % 15);
    std::iota(r.begin(), r.end(), 0u);
    std::shuffle(r.begin(), r.end(), rng);
    GoldSet g;
    for (std::size_t k = 0, n = 1 + rng() % 4; k < n; ++k) {
      const auto id = static_cast<std::uint32_t>(rng() % 18);
      if (std::find(g.begin(), g.end(), id) == g.end()) g.push_back(id);
    }
    // Oracle: ranks of the gold ids, then the textbook formulas.
    std::vector<std::size_t> ranks;
    for (auto id : g) {
      auto it = std::find(r.begin(), r.end(), id);
      if (it != r.end()) ranks.push_back(static_cast<std::size_t>(it - r.begin()) + 1);
    }
    std::sort(ranks.begin(), ranks.end());
    if (!ranks.empty() && ranks[0] == 1) hits += 1;
    long double ap = 0;
    for (std::size_t k = 0; k < ranks.size(); ++k) ap += static_cast<long double>(k + 1) / ranks[k];
    ap_sum += ap / g.size();
    if (!ranks.empty()) rr_sum += 1.0L / ranks[0];
    rankings.push_back(std::move(r));
    gold.push_back(std::move(g));
  }
  const double h1 = HitsAt1(rankings, gold);
  const auto mm = MapMrr(rankings, gold);
  const double want_h1 = 100.0 * static_cast<double>(hits) / 1000.0;
  const double dmap = std::fabs(mm.map - static_cast<double>(ap_sum / 1000));
  const double dmrr = std::fabs(mm.mrr - static_cast<double>(rr_sum / 1000));
  return {h1 == want_h1 && dmap < 1e-12 && dmrr < 1e-12,
          Fmt("1000 rankings: hits@1 %.2f vs %.2f, |dMAP| %.1e, |dMRR| %.1e", h1, want_h1, dmap, dmrr)};
}

// ---- 10: determinism --------------------------------------------------------

std::string ReadFile(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict Determinism(Shared&) {
  GenConfig g;
  g.n_movies = 40;
  g.seed = 8;
  g.templates_per_relation = 100;
  const fs::path root = fs::temp_directory_path() / "kvmemnn_acceptance_determinism";
  fs::remove_all(root);
  bool files_same = true;
  EmitCorpus(GenerateCorpus(g), (root / "a").string());
  EmitCorpus(GenerateCorpus(g), (root / "b").string());
  for (const char* f : {"kb.tsv", "docs.jsonl", "qa_train.tsv", "qa_dev.tsv", "qa_test.tsv", "manifest.json"}) {
    files_same = files_same && ReadFile(root / "a" / f) == ReadFile(root / "b" / f);
  }

  auto train_once = [&](const std::string& dir) {
    const auto corpus = LoadCorpus(dir);
    ExperimentConfig c = Doc(Representation::kWindowCenterTitle);
    c.hyper.epochs = 3;
    c.hyper.dropout_question = c.hyper.dropout_memory = 0.1;
    const auto exp = BuildExperiment(corpus, c);
    const auto tr = TrainExperiment(exp, InitExperimentParams(exp));
    std::vector<double> curve;
    for (const auto& e : tr.curve) curve.push_back(e.train_loss);
    return std::make_pair(curve, EvaluateExperiment(exp, tr.best, exp.test).ToJson().dump());
  };
  const auto [curve_a, report_a] = train_once((root / "a").string());
  const auto [curve_b, report_b] = train_once((root / "b").string());
  const bool curves_same = curve_a.size() == curve_b.size() &&
                           std::memcmp(curve_a.data(), curve_b.data(), curve_a.size() * sizeof(double)) == 0;
  const bool reports_same = report_a == report_b;
  fs::remove_all(root);
  return {files_same && curves_same && reports_same,
          std::string("corpus files ") + (files_same ? "byte-identical" : "DIFFER") + ", loss curves " +
              (curves_same ? "bit-identical" : "DIFFER") + ", reports " +
              (reports_same ? "identical" : "DIFFER")};
}

// ---- 11: corruption-rate calibration ----------------------------------------

Verdict Calibration(Shared&) {
  GenConfig g = BaseGen();
  g.templates_per_relation = 100;
  const auto corpus = GenerateCorpus(g);
  // Measured from the text: a merged sentence carries " and ", a coreferent
  // one opens with "It ". Only non-final single sentences had a choice.
  std::size_t merged = 0, single_choices = 0, eligible = 0, pronoun = 0, sentences = 0;
  for (const auto& d : corpus.docs) {
    for (std::size_t s = 0; s < d.sentences.size(); ++s) {
      const bool m = d.sentences[s].find(" and ") != std::string::npos;
      merged += m;
      if (!m && s + 1 < d.sentences.size()) ++single_choices;
      if (s > 0) {
        ++eligible;
        pronoun += d.sentences[s].rfind("It ", 0) == 0;
      }
    }
    sentences += d.sentences.size();
  }
  const double conj = 100.0 * merged / static_cast<double>(merged + single_choices);
  const double coref = 100.0 * pronoun / static_cast<double>(eligible);
  return {sentences >= 1000 && std::fabs(conj - 50.0) <= 3.0 && std::fabs(coref - 80.0) <= 3.0,
          Fmt("conjunction %.2f%% (target 50), coreference %.2f%% (target 80) over %.0f sentences", conj,
              coref, static_cast<double>(sentences))};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Verdict(Shared&)> check;
};

}  // namespace
}  // namespace kvmemnn

int main(int argc, char** argv) {
  using namespace kvmemnn;
  const std::vector<Criterion> criteria = {
      {1, "gradient correctness", GradientCorrectness},
      {2, "MemNN degeneracy", MemNNDegeneracy},
      {3, "hashing oracle", HashingOracle},
      {4, "KB-source learnability", KbLearnability},
      {5, "representation ladder", RepresentationLadder},
      {6, "synthetic-document ladder", DocumentLadder},
      {7, "hop utility", HopUtility},
      {8, "baseline ordering", BaselineOrdering},
      {9, "metric correctness", MetricCorrectness},
      {10, "determinism", Determinism},
      {11, "corruption-rate calibration", Calibration},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  Shared shared;
  std::vector<std::string> lines;
  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    Verdict v;
    try {
      v = c.check(shared);
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    failures += !v.pass;
    char head[128];
    std::snprintf(head, sizeof(head), "[%s] %2d %-28s ", v.pass ? "PASS" : "FAIL", c.id, c.name);
    lines.push_back(head + v.detail);
    std::printf("%s\n", lines.back().c_str());
    std::fflush(stdout);
  }

  std::printf("\nsummary\n");
  for (const auto& l : lines) std::printf("%s\n", l.c_str());
  std::ofstream("acceptance_report.txt") << [&] {
    std::string all;
    for (const auto& l : lines) all += l + "\n";
    return all;
  }();
  return failures == 0 ? 0 : 1;
}
