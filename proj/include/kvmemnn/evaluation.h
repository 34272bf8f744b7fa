#ifndef KVMEMNN_EVALUATION_H_
#define KVMEMNN_EVALUATION_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace kvmemnn {

using Ranking = std::vector<std::uint32_t>;
using GoldSet = std::vector<std::uint32_t>;

// 100 * fraction of examples whose top-ranked id is gold. An empty ranking is
// a miss; *empty_rankings counts them when given.
double HitsAt1(const std::vector<Ranking>& rankings, const std::vector<GoldSet>& gold,
               std::size_t* empty_rankings = nullptr);

struct MapMrrResult {
  double map = 0.0;
  double mrr = 0.0;
};

// Every gold id is relevant. Gold ids missing from a ranking contribute zero
// precision to that example's average precision.
MapMrrResult MapMrr(const std::vector<Ranking>& rankings, const std::vector<GoldSet>& gold);

struct TypeScore {
  double hits1 = 0.0;
  std::size_t n = 0;
  std::size_t hits = 0;
};

struct EvalReport {
  double overall_hits1 = 0.0;
  std::map<std::string, TypeScore> per_type;
  double map = 0.0;
  double mrr = 0.0;
  std::size_t n = 0;
  std::size_t unknown_types = 0;
  std::size_t empty_rankings = 0;
  std::string fingerprint;

  nlohmann::json ToJson() const;
  static EvalReport FromJson(const nlohmann::json& j);
  std::string ToText() const;
};

// Per question type hits@1 plus the overall metrics. Types outside
// `known_types` (when nonempty) are bucketed under "other".
EvalReport BreakdownReport(const std::vector<Ranking>& rankings, const std::vector<GoldSet>& gold,
                           const std::vector<std::string>& qtypes,
                           const std::vector<std::string>& known_types = {});

}  // namespace kvmemnn

#endif  // KVMEMNN_EVALUATION_H_
