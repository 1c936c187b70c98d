#include "fitcarl/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

#include "fitcarl/log.hpp"

namespace fitcarl {

namespace {

struct BeamItem {
  SearchState state;
  Tensor hidden;
  double score = 0.0;
  PathTrace path;
};

struct Expansion {
  std::size_t parent;
  std::size_t cand;
  EntityId entity;
  double score;
};

double safe_log(double p) { return std::log(std::max(p, std::numeric_limits<double>::min())); }

}  // namespace

std::vector<ScoredEntity> beam_search(const FitcarlModel& model, const ActionGraph& graph, const EpisodeTask* task,
                                      const LpQuery& query, const BeamOptions& options) {
  if (options.width == 0) throw std::invalid_argument("beam width must be >= 1");
  const auto& cfg = model.config();
  ReprCache cache;
  std::vector<BeamItem> beams;
  {
    Tape tape(&model.params(), false);
    Forward f(model, tape);
    f.share_cache(&cache);
    f.attach_task(task, query.source, query.time);
    BeamItem start;
    start.state = initial_state(query);
    start.hidden = initial_history(f, start.state).value();
    beams.push_back(std::move(start));
  }

  for (std::size_t l = 0; l < cfg.steps; ++l) {
    std::vector<std::vector<ActionCandidate>> cands(beams.size());
    std::vector<Tensor> pis(beams.size()), confs(beams.size());
    std::vector<Expansion> expansions;
    for (std::size_t i = 0; i < beams.size(); ++i) {
      Tape tape(&model.params(), false);
      Forward f(model, tape);
      f.share_cache(&cache);
      f.attach_task(task, query.source, query.time);
      cands[i] = sample_action_space(graph, beams[i].state, model, options.random_base);
      StepOutput out = policy_step(f, beams[i].state, tape.constant(beams[i].hidden), cands[i]);
      pis[i] = out.pi.value();
      confs[i] = out.conf.value();
      for (std::size_t j = 0; j < cands[i].size(); ++j) {
        expansions.push_back({i, j, cands[i][j].entity, beams[i].score + safe_log(pis[i][j])});
      }
    }
    auto better = [](const Expansion& a, const Expansion& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.entity != b.entity) return a.entity < b.entity;
      if (a.parent != b.parent) return a.parent < b.parent;
      return a.cand < b.cand;
    };
    const std::size_t keep = std::min(options.width, expansions.size());
    std::partial_sort(expansions.begin(), expansions.begin() + static_cast<std::ptrdiff_t>(keep), expansions.end(),
                      better);
    expansions.resize(keep);

    std::vector<BeamItem> next;
    next.reserve(keep);
    const bool last = l + 1 == cfg.steps;
    for (const auto& ex : expansions) {
      const BeamItem& parent = beams[ex.parent];
      const ActionCandidate& a = cands[ex.parent][ex.cand];
      BeamItem item;
      item.state = transition(parent.state, a);
      item.score = ex.score;
      item.path = parent.path;
      item.path.hops.push_back({parent.state, a, pis[ex.parent][ex.cand], confs[ex.parent][ex.cand]});
      if (!last) {
        Tape tape(&model.params(), false);
        Forward f(model, tape);
        f.share_cache(&cache);
        f.attach_task(task, query.source, query.time);
        item.hidden = encode_history(f, tape.constant(parent.hidden), f.relation(a.relation),
                                     f.node(a.entity, a.time, query.time))
                          .value();
      }
      next.push_back(std::move(item));
    }
    beams = std::move(next);
  }

  std::map<EntityId, double> best;
  for (const auto& b : beams) {
    auto [it, inserted] = best.emplace(b.state.entity, b.score);
    if (inserted) continue;
    if (cfg.beam_sum) {
      const double hi = std::max(it->second, b.score), lo = std::min(it->second, b.score);
      it->second = hi + std::log1p(std::exp(lo - hi));
    } else {
      it->second = std::max(it->second, b.score);
    }
  }
  std::vector<ScoredEntity> out;
  out.reserve(best.size());
  for (const auto& [e, s] : best) out.push_back({e, s});
  std::stable_sort(out.begin(), out.end(), [](const ScoredEntity& a, const ScoredEntity& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.entity < b.entity;
  });
  if (options.traces) {
    options.traces->clear();
    for (const auto& b : beams) options.traces->push_back(b.path);
  }
  return out;
}

FilterIndex::FilterIndex(const OogSplit& split) {
  for (const auto& q : split.background.quads()) add(q);
  for (const auto& set : split.facts)
    for (const auto& q : set) add(q);
}

void FilterIndex::add(const Quadruple& q) {
  facts_.insert(q);
  facts_.insert(Quadruple{q.object, RelationVocab::inverse_of(q.relation), q.subject, q.timestamp});
}

bool FilterIndex::contains(EntityId s, RelationId r, EntityId o, Timestamp t) const {
  return facts_.count(Quadruple{s, r, o, t}) > 0;
}

std::size_t filtered_rank(const std::vector<ScoredEntity>& ranking, const LpQuery& q, const FilterIndex* filter) {
  std::size_t rank = 0;
  for (const auto& c : ranking) {
    if (c.entity == q.answer) return rank + 1;
    if (filter && filter->contains(q.source, q.relation, c.entity, q.time)) continue;
    ++rank;
  }
  return 0;
}

Metrics compute_metrics(const std::vector<std::size_t>& ranks) {
  Metrics m;
  m.count = ranks.size();
  if (ranks.empty()) return m;
  for (auto r : ranks) {
    if (r == 0) continue;
    m.mrr += 1.0 / static_cast<double>(r);
    m.hits1 += r <= 1;
    m.hits3 += r <= 3;
    m.hits10 += r <= 10;
  }
  const double n = static_cast<double>(ranks.size());
  m.mrr /= n;
  m.hits1 /= n;
  m.hits3 /= n;
  m.hits10 /= n;
  return m;
}

EpisodeTask evaluation_task(const OogSplit& split, MetaSet which, std::size_t shots, std::uint64_t seed) {
  RngStream rng = RngStream(seed, "evaluation").child(meta_set_name(which));
  return sample_task(split, which, shots, rng);
}

EvalReport evaluate(const FitcarlModel& model, const OogSplit& split, const EvalConfig& config) {
  if (config.seeds.empty()) throw std::invalid_argument("evaluation needs at least one seed");
  const FilterIndex filter(split);
  EvalReport report;
  report.seeds = config.seeds;
  for (auto seed : config.seeds) {
    EpisodeTask task = evaluation_task(split, config.which, config.shots, seed);
    ActionGraph graph(split.background, &task);
    auto queries = derive_all_queries(task);
    std::vector<std::size_t> ranks(queries.size(), 0);
    const RngStream action_base(seed, "evaluation_actions");
    std::exception_ptr failure;
    const int threads = static_cast<int>(std::max<std::size_t>(1, config.workers));
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (std::size_t i = 0; i < queries.size(); ++i) {
      try {
        const RngStream base = action_base.child(static_cast<std::uint64_t>(i));
        BeamOptions opt;
        opt.width = config.beam;
        opt.random_base = &base;
        auto ranking = beam_search(model, graph, &task, queries[i], opt);
        ranks[i] = filtered_rank(ranking, queries[i], config.filtered ? &filter : nullptr);
      } catch (...) {
#pragma omp critical(fitcarl_eval_failure)
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
    for (std::size_t i = 0; i < queries.size(); ++i) report.queries.push_back({queries[i], ranks[i], seed});
    report.per_seed.push_back(compute_metrics(ranks));
    logging::debug("eval seed " + std::to_string(seed) + ": " + std::to_string(queries.size()) + " queries, mrr " +
               std::to_string(report.per_seed.back().mrr));
  }
  const double n = static_cast<double>(report.per_seed.size());
  for (const auto& m : report.per_seed) {
    report.mean.mrr += m.mrr / n;
    report.mean.hits1 += m.hits1 / n;
    report.mean.hits3 += m.hits3 / n;
    report.mean.hits10 += m.hits10 / n;
    report.mean.count += m.count;
  }
  return report;
}

std::string metrics_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["mrr"] = report.mean.mrr;
  j["hits1"] = report.mean.hits1;
  j["hits3"] = report.mean.hits3;
  j["hits10"] = report.mean.hits10;
  j["queries"] = report.mean.count;
  j["seeds"] = report.seeds;
  nlohmann::ordered_json per;
  std::vector<double> mrr, h1, h3, h10;
  std::vector<std::size_t> count;
  for (const auto& m : report.per_seed) {
    mrr.push_back(m.mrr);
    h1.push_back(m.hits1);
    h3.push_back(m.hits3);
    h10.push_back(m.hits10);
    count.push_back(m.count);
  }
  per["mrr"] = mrr;
  per["hits1"] = h1;
  per["hits3"] = h3;
  per["hits10"] = h10;
  per["queries"] = count;
  j["per_seed"] = per;
  return j.dump(2) + "\n";
}

Granularity parse_granularity(const std::string& name) {
  if (name == "month") return Granularity::Month;
  if (name == "year") return Granularity::Year;
  throw std::invalid_argument("unknown time granularity '" + name + "' (expected month or year)");
}

std::vector<BucketRow> bucket_by_time(const EvalReport& report, const TimeAxis& axis, Granularity granularity) {
  struct Acc {
    std::string label;
    double rr = 0.0;
    std::size_t count = 0;
  };
  std::map<std::int64_t, Acc> buckets;
  for (const auto& q : report.queries) {
    std::int64_t key = q.query.time;
    std::string label = std::to_string(q.query.time);
    if (axis.dates) {
      std::chrono::year_month_day ymd{axis.epoch + std::chrono::days{q.query.time}};
      const int y = static_cast<int>(ymd.year());
      const unsigned m = static_cast<unsigned>(ymd.month());
      char buf[16];
      if (granularity == Granularity::Month) {
        key = static_cast<std::int64_t>(y) * 12 + (m - 1);
        std::snprintf(buf, sizeof buf, "%04d-%02u", y, m);
      } else {
        key = y;
        std::snprintf(buf, sizeof buf, "%04d", y);
      }
      label = buf;
    }
    auto& acc = buckets[key];
    acc.label = label;
    acc.rr += q.rank ? 1.0 / static_cast<double>(q.rank) : 0.0;
    ++acc.count;
  }
  std::vector<BucketRow> rows;
  for (const auto& [key, acc] : buckets) rows.push_back({acc.label, acc.rr / static_cast<double>(acc.count), acc.count});
  return rows;
}

void write_buckets_csv(std::ostream& out, const std::vector<BucketRow>& rows) {
  out << "bucket,mrr,count\n";
  char buf[32];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.6f", r.mrr);
    out << r.bucket << ',' << buf << ',' << r.count << '\n';
  }
}

PathTrace explain(const FitcarlModel& model, const OogSplit& split, const EpisodeTask& task, const LpQuery& query) {
  ActionGraph graph(split.background, &task);
  const RngStream base(0, "explain_actions");
  std::vector<PathTrace> traces;
  BeamOptions opt;
  opt.width = 1;
  opt.random_base = &base;
  opt.traces = &traces;
  beam_search(model, graph, &task, query, opt);
  return traces.empty() ? PathTrace{} : traces.front();
}

}  // namespace fitcarl
