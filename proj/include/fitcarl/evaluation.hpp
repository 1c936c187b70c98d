#pragma once

#include <cstdint>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include "fitcarl/policy.hpp"

namespace fitcarl {

struct ScoredEntity {
  EntityId entity = 0;
  double score = 0.0;
};

struct BeamOptions {
  std::size_t width = 100;
  /// Optional random stream for random action sampling.
  const RngStream* random_base = nullptr;
  /// Final paths of every kept trajectory, best first.
  std::vector<PathTrace>* traces = nullptr;
};

/// Width-bounded search over L steps ranked by cumulative log pi. Endpoint
/// scores aggregate duplicate trajectories by max (or by log-sum-exp when
/// the model's beam_sum flag is set). Sorted by score desc, then entity id.
std::vector<ScoredEntity> beam_search(const FitcarlModel& model, const ActionGraph& graph, const EpisodeTask* task,
                                      const LpQuery& query, const BeamOptions& options);

/// All known true facts in both directions.
class FilterIndex {
 public:
  FilterIndex() = default;
  explicit FilterIndex(const OogSplit& split);
  void add(const Quadruple& q);
  bool contains(EntityId s, RelationId r, EntityId o, Timestamp t) const;

 private:
  std::set<Quadruple> facts_;
};

/// 1-based rank of the answer after removing other true answers; 0 when the
/// answer is not among the candidates. A null filter ranks raw.
std::size_t filtered_rank(const std::vector<ScoredEntity>& ranking, const LpQuery& q, const FilterIndex* filter);

struct Metrics {
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;
  std::size_t count = 0;
};

Metrics compute_metrics(const std::vector<std::size_t>& ranks);

struct QueryResult {
  LpQuery query;
  std::size_t rank = 0;
  std::uint64_t seed = 0;
};

struct EvalConfig {
  MetaSet which = MetaSet::Test;
  std::size_t shots = 1;
  std::size_t beam = 100;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::size_t workers = 1;
  bool filtered = true;
};

struct EvalReport {
  Metrics mean;
  std::vector<std::uint64_t> seeds;
  std::vector<Metrics> per_seed;
  std::vector<QueryResult> queries;
};

/// Task for evaluation seed `seed`: one support sample per entity.
EpisodeTask evaluation_task(const OogSplit& split, MetaSet which, std::size_t shots, std::uint64_t seed);

EvalReport evaluate(const FitcarlModel& model, const OogSplit& split, const EvalConfig& config);

/// {"mrr":..,"hits1":..,"hits3":..,"hits10":..,"seeds":[..],"per_seed":{"mrr":[..],..}}
std::string metrics_json(const EvalReport& report);

enum class Granularity { Month, Year };
Granularity parse_granularity(const std::string& name);

struct BucketRow {
  std::string bucket;
  double mrr = 0.0;
  std::size_t count = 0;
};

/// Per-bucket MRR over every evaluated query. Integer time axes bucket by
/// raw timestamp.
std::vector<BucketRow> bucket_by_time(const EvalReport& report, const TimeAxis& axis, Granularity granularity);
void write_buckets_csv(std::ostream& out, const std::vector<BucketRow>& rows);

/// Greedy (width 1) trace of a query.
PathTrace explain(const FitcarlModel& model, const OogSplit& split, const EpisodeTask& task, const LpQuery& query);

}  // namespace fitcarl
