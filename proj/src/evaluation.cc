#include "kvmemnn/evaluation.h"

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <unordered_set>

#include "kvmemnn/numerics.h"

namespace kvmemnn {

namespace {

void CheckSizes(const std::vector<Ranking>& rankings, const std::vector<GoldSet>& gold) {
  if (rankings.size() != gold.size()) {
    throw DataError("evaluation: " + std::to_string(rankings.size()) + " rankings for " +
                    std::to_string(gold.size()) + " gold sets");
  }
}

bool TopIsGold(const Ranking& ranking, const GoldSet& gold) {
  return !ranking.empty() && std::find(gold.begin(), gold.end(), ranking.front()) != gold.end();
}

}  // namespace

double HitsAt1(const std::vector<Ranking>& rankings, const std::vector<GoldSet>& gold,
               std::size_t* empty_rankings) {
  CheckSizes(rankings, gold);
  if (rankings.empty()) return 0.0;
  std::size_t hits = 0;
  std::size_t empty = 0;
  for (std::size_t i = 0; i < rankings.size(); ++i) {
    if (rankings[i].empty()) ++empty;
    if (TopIsGold(rankings[i], gold[i])) ++hits;
  }
  if (empty_rankings) *empty_rankings = empty;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(rankings.size());
}

MapMrrResult MapMrr(const std::vector<Ranking>& rankings, const std::vector<GoldSet>& gold) {
  CheckSizes(rankings, gold);
  MapMrrResult r;
  if (rankings.empty()) return r;
  for (std::size_t i = 0; i < rankings.size(); ++i) {
    const std::unordered_set<std::uint32_t> relevant(gold[i].begin(), gold[i].end());
    if (relevant.empty()) continue;
    std::size_t found = 0;
    double precision_sum = 0.0;
    double reciprocal = 0.0;
    for (std::size_t k = 0; k < rankings[i].size(); ++k) {
      if (!relevant.contains(rankings[i][k])) continue;
      ++found;
      precision_sum += static_cast<double>(found) / static_cast<double>(k + 1);
      if (found == 1) reciprocal = 1.0 / static_cast<double>(k + 1);
    }
    r.map += precision_sum / static_cast<double>(relevant.size());
    r.mrr += reciprocal;
  }
  r.map /= static_cast<double>(rankings.size());
  r.mrr /= static_cast<double>(rankings.size());
  return r;
}

EvalReport BreakdownReport(const std::vector<Ranking>& rankings, const std::vector<GoldSet>& gold,
                           const std::vector<std::string>& qtypes,
                           const std::vector<std::string>& known_types) {
  CheckSizes(rankings, gold);
  if (qtypes.size() != rankings.size()) throw DataError("evaluation: qtype labels missing");
  EvalReport report;
  report.n = rankings.size();
  report.overall_hits1 = HitsAt1(rankings, gold, &report.empty_rankings);
  const auto mm = MapMrr(rankings, gold);
  report.map = mm.map;
  report.mrr = mm.mrr;
  for (std::size_t i = 0; i < rankings.size(); ++i) {
    std::string type = qtypes[i];
    if (!known_types.empty() &&
        std::find(known_types.begin(), known_types.end(), type) == known_types.end()) {
      type = "other";
      ++report.unknown_types;
    }
    auto& row = report.per_type[type];
    ++row.n;
    if (TopIsGold(rankings[i], gold[i])) ++row.hits;
  }
  for (auto& [type, row] : report.per_type) {
    row.hits1 = 100.0 * static_cast<double>(row.hits) / static_cast<double>(row.n);
  }
  if (report.unknown_types > 0) {
    std::cerr << "warning: " << report.unknown_types
              << " examples with an unknown question type were bucketed under 'other'\n";
  }
  return report;
}

nlohmann::json EvalReport::ToJson() const {
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [type, row] : per_type) {
    per[type] = {{"hits1", row.hits1}, {"n", row.n}, {"hits", row.hits}};
  }
  return {{"overall_hits1", overall_hits1}, {"per_type", per},   {"map", map},
          {"mrr", mrr},                     {"n", n},            {"fingerprint", fingerprint},
          {"unknown_types", unknown_types}, {"empty_rankings", empty_rankings}};
}

EvalReport EvalReport::FromJson(const nlohmann::json& j) {
  EvalReport r;
  r.overall_hits1 = j.at("overall_hits1").get<double>();
  r.map = j.at("map").get<double>();
  r.mrr = j.at("mrr").get<double>();
  r.n = j.at("n").get<std::size_t>();
  r.fingerprint = j.value("fingerprint", "");
  r.unknown_types = j.value("unknown_types", std::size_t{0});
  r.empty_rankings = j.value("empty_rankings", std::size_t{0});
  for (const auto& [type, row] : j.at("per_type").items()) {
    TypeScore s;
    s.hits1 = row.at("hits1").get<double>();
    s.n = row.at("n").get<std::size_t>();
    s.hits = row.value("hits", std::size_t{0});
    r.per_type[type] = s;
  }
  return r;
}

std::string EvalReport::ToText() const {
  std::ostringstream out;
  std::size_t width = 12;
  for (const auto& [type, row] : per_type) width = std::max(width, type.size());
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-*s  %8s  %6s\n", static_cast<int>(width), "question type",
                "hits@1", "n");
  out << buf;
  for (const auto& [type, row] : per_type) {
    std::snprintf(buf, sizeof(buf), "%-*s  %8.2f  %6zu\n", static_cast<int>(width), type.c_str(),
                  row.hits1, row.n);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "%-*s  %8.2f  %6zu\n", static_cast<int>(width), "overall",
                overall_hits1, n);
  out << buf;
  std::snprintf(buf, sizeof(buf), "MAP %.4f  MRR %.4f\n", map, mrr);
  out << buf;
  if (!fingerprint.empty()) out << "fingerprint " << fingerprint << "\n";
  return out.str();
}

}  // namespace kvmemnn
