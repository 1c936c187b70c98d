#include "fitcarl/split.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "fitcarl/log.hpp"

namespace fitcarl {

const char* meta_set_name(MetaSet which) {
  switch (which) {
    case MetaSet::Train: return "meta_train";
    case MetaSet::Valid: return "meta_valid";
    case MetaSet::Test: return "meta_test";
  }
  return "?";
}

MetaSet parse_meta_set(const std::string& name) {
  if (name == "train" || name == "meta_train") return MetaSet::Train;
  if (name == "valid" || name == "meta_valid") return MetaSet::Valid;
  if (name == "test" || name == "meta_test") return MetaSet::Test;
  throw std::invalid_argument("unknown meta set '" + name + "' (expected train|valid|test)");
}

std::optional<MetaSet> OogSplit::group_of(EntityId e) const {
  for (int g = 0; g < 3; ++g) {
    if (std::binary_search(unseen[g].begin(), unseen[g].end(), e)) return static_cast<MetaSet>(g);
  }
  return std::nullopt;
}

namespace {

std::string describe(const Vocabulary& vocab, const Quadruple& q) {
  auto ent = [&](EntityId e) {
    return e < vocab.entities.size() ? vocab.entities.name(e) : "#" + std::to_string(e);
  };
  return "(" + ent(q.subject) + ", " + vocab.relations.name(q.relation) + ", " + ent(q.object) + ", " +
         std::to_string(q.timestamp) + ")";
}

}  // namespace

void validate_split(const OogSplit& split) {
  const auto n = split.num_entities();
  std::vector<int> group(n, -1);
  for (int g = 0; g < 3; ++g) {
    for (auto e : split.unseen[g]) {
      if (e >= n) throw DataError("split: unseen entity id out of range");
      if (group[e] != -1) {
        throw DataError("split: entity '" + split.vocab.entities.name(e) + "' belongs to both " +
                        meta_set_name(static_cast<MetaSet>(group[e])) + " and " +
                        meta_set_name(static_cast<MetaSet>(g)));
      }
      group[e] = g;
    }
  }
  for (const auto& q : split.background.quads()) {
    if (group[q.subject] != -1 || group[q.object] != -1) {
      throw DataError("split: background fact touches an unseen entity: " + describe(split.vocab, q));
    }
  }
  for (int g = 0; g < 3; ++g) {
    for (const auto& q : split.facts[g]) {
      const int gs = group[q.subject], go = group[q.object];
      if ((gs != -1 && gs != g) || (go != -1 && go != g)) {
        throw DataError(std::string("split: fact in ") + meta_set_name(static_cast<MetaSet>(g)) +
                        " links entities of different meta sets: " + describe(split.vocab, q));
      }
      if (gs == -1 && go == -1) {
        throw DataError(std::string("split: fact in ") + meta_set_name(static_cast<MetaSet>(g)) +
                        " touches no unseen entity: " + describe(split.vocab, q));
      }
    }
  }
}

OogSplit load_split(const std::filesystem::path& dir) {
  OogSplit split;
  const std::vector<std::filesystem::path> files = {dir / "background.txt", dir / "meta_train.txt",
                                                    dir / "meta_valid.txt", dir / "meta_test.txt"};
  auto loaded = load_quadruple_files(files, split.vocab, VocabMode::Build);
  split.axis = loaded.axis;
  const auto n = split.vocab.entities.size();

  std::vector<char> in_background(n, 0);
  for (const auto& q : loaded.files[0]) in_background[q.subject] = in_background[q.object] = 1;

  // An unseen entity belongs to the first meta file it appears in; a later
  // appearance in another meta file is a violation reported with that fact.
  std::vector<int> group(n, -1);
  for (int g = 0; g < 3; ++g) {
    for (const auto& q : loaded.files[g + 1]) {
      for (auto e : {q.subject, q.object}) {
        if (in_background[e]) continue;
        if (group[e] == -1) group[e] = g;
        if (group[e] != g) {
          throw DataError(files[g + 1].string() + ": fact " + describe(split.vocab, q) + " links entity '" +
                          split.vocab.entities.name(e) + "' of " + meta_set_name(static_cast<MetaSet>(group[e])));
        }
      }
    }
  }
  for (EntityId e = 0; e < n; ++e) {
    if (group[e] != -1) split.unseen[group[e]].push_back(e);
  }
  split.background = TkgStore(n, std::move(loaded.files[0]));
  for (int g = 0; g < 3; ++g) split.facts[g] = std::move(loaded.files[g + 1]);

  split.concepts = load_concepts(dir / "concepts.txt", split.vocab);
  split.concepts.resize_entities(n);
  compute_concept_prior(split.background, split.vocab.relations.num_ids(), split.concepts);
  validate_split(split);
  return split;
}

void save_split(const OogSplit& split, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& v = split.vocab;
  auto write_quads = [&](const std::filesystem::path& path, const std::vector<Quadruple>& quads) {
    std::ofstream out(path);
    if (!out) throw DataError(path.string() + ": cannot write");
    for (const auto& q : quads) {
      out << v.entities.name(q.subject) << '\t' << v.relations.name(q.relation) << '\t' << v.entities.name(q.object)
          << '\t' << split.axis.format(q.timestamp) << '\n';
    }
  };
  write_quads(dir / "background.txt", split.background.quads());
  write_quads(dir / "meta_train.txt", split.facts[0]);
  write_quads(dir / "meta_valid.txt", split.facts[1]);
  write_quads(dir / "meta_test.txt", split.facts[2]);

  std::vector<char> present(split.num_entities(), 0);
  for (const auto& q : split.background.quads()) present[q.subject] = present[q.object] = 1;
  for (const auto& fs : split.facts)
    for (const auto& q : fs) present[q.subject] = present[q.object] = 1;

  std::ofstream out(dir / "concepts.txt");
  if (!out) throw DataError((dir / "concepts.txt").string() + ": cannot write");
  for (EntityId e = 0; e < split.num_entities(); ++e) {
    auto cs = split.concepts.concepts_of(e);
    if (!present[e] || cs.empty()) continue;
    out << v.entities.name(e) << '\t';
    for (std::size_t i = 0; i < cs.size(); ++i) out << (i ? "|" : "") << split.concepts.names().name(cs[i]);
    out << '\n';
  }
}

OogSplit make_split(const Vocabulary& vocab, const TimeAxis& axis, const TkgStore& store,
                    const ConceptTable& concepts, const SplitFractions& fractions, std::uint64_t seed) {
  const double fr[3] = {fractions.train, fractions.valid, fractions.test};
  for (double f : fr) {
    if (!(f > 0.0)) throw std::invalid_argument("make_split: fractions must be positive");
  }
  if (fr[0] + fr[1] + fr[2] >= 1.0) throw std::invalid_argument("make_split: fractions must sum to less than 1");

  auto candidates = store.entities();
  const auto n = candidates.size();
  std::array<std::size_t, 3> count{};
  std::size_t total = 0;
  for (int g = 0; g < 3; ++g) {
    count[g] = static_cast<std::size_t>(std::llround(fr[g] * static_cast<double>(n)));
    if (count[g] == 0) {
      throw std::invalid_argument("make_split: store with " + std::to_string(n) +
                                  " entities is too small for the requested fractions");
    }
    total += count[g];
  }
  if (total >= n) throw std::invalid_argument("make_split: no background entities would remain");

  RngStream rng(seed, "make_split");
  auto picks = rng.sample_without_replacement(n, total);

  OogSplit split;
  split.vocab = vocab;
  split.axis = axis;
  std::vector<int> group(vocab.entities.size(), -1);
  std::size_t cursor = 0;
  for (int g = 0; g < 3; ++g) {
    for (std::size_t i = 0; i < count[g]; ++i) {
      auto e = candidates[picks[cursor++]];
      group[e] = g;
      split.unseen[g].push_back(e);
    }
    std::sort(split.unseen[g].begin(), split.unseen[g].end());
  }

  std::vector<Quadruple> background;
  std::size_t dropped = 0;
  for (const auto& q : store.quads()) {
    const int gs = group[q.subject], go = group[q.object];
    if (gs == -1 && go == -1) {
      background.push_back(q);
    } else if (gs == -1 || go == -1 || gs == go) {
      split.facts[gs != -1 ? gs : go].push_back(q);
    } else {
      ++dropped;
    }
  }
  if (background.empty()) throw std::invalid_argument("make_split: background graph would be empty");
  logging::debug("make_split: dropped " + std::to_string(dropped) + " cross-group facts");

  split.background = TkgStore(vocab.entities.size(), std::move(background));
  split.concepts = concepts;
  split.concepts.resize_entities(vocab.entities.size());
  compute_concept_prior(split.background, vocab.relations.num_ids(), split.concepts);
  validate_split(split);
  return split;
}

const EntityShots* EpisodeTask::find(EntityId e) const {
  auto it = std::lower_bound(entities.begin(), entities.end(), e,
                             [](const EntityShots& s, EntityId x) { return s.entity < x; });
  if (it == entities.end() || it->entity != e) return nullptr;
  return &*it;
}

std::size_t EpisodeTask::num_queries() const {
  std::size_t n = 0;
  for (const auto& s : entities) n += s.query.size();
  return n;
}

std::vector<Quadruple> facts_of(const OogSplit& split, MetaSet which, EntityId e) {
  std::vector<Quadruple> out;
  for (const auto& q : split.fact_set(which)) {
    if (q.subject == e || q.object == e) out.push_back(q);
  }
  return out;
}

EpisodeTask sample_task(const OogSplit& split, MetaSet which, std::size_t shots, RngStream& rng) {
  if (shots == 0) throw std::invalid_argument("sample_task: K must be positive");
  const auto& members = split.unseen_set(which);
  std::vector<std::vector<Quadruple>> per_entity(members.size());
  for (const auto& q : split.fact_set(which)) {
    for (auto e : {q.subject, q.object}) {
      auto it = std::lower_bound(members.begin(), members.end(), e);
      if (it == members.end() || *it != e) continue;
      auto& list = per_entity[static_cast<std::size_t>(it - members.begin())];
      if (q.subject == q.object && e == q.object && !list.empty() && list.back() == q) continue;
      list.push_back(q);
    }
  }

  EpisodeTask task;
  task.which = which;
  task.shots = shots;
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < members.size(); ++i) {
    auto& facts = per_entity[i];
    if (facts.size() <= shots) {
      ++skipped;
      continue;
    }
    auto picks = rng.sample_without_replacement(facts.size(), shots);
    std::vector<char> chosen(facts.size(), 0);
    EntityShots s;
    s.entity = members[i];
    for (auto p : picks) {
      chosen[p] = 1;
      s.support.push_back(facts[p]);
    }
    for (std::size_t j = 0; j < facts.size(); ++j)
      if (!chosen[j]) s.query.push_back(facts[j]);
    task.entities.push_back(std::move(s));
  }
  if (skipped > 0) {
    logging::debug(std::string("sample_task: skipped ") + std::to_string(skipped) + " entities of " +
               meta_set_name(which) + " with <= " + std::to_string(shots) + " facts");
  }
  return task;
}

std::vector<LpQuery> derive_queries(const EpisodeTask& task, EntityId e) {
  const auto* shots = task.find(e);
  if (!shots) throw std::invalid_argument("derive_queries: entity is not part of the task");
  std::vector<LpQuery> out;
  out.reserve(shots->query.size());
  for (const auto& q : shots->query) {
    if (q.subject == e) {
      out.push_back(LpQuery{e, q.relation, q.timestamp, q.object});
    } else {
      out.push_back(LpQuery{e, RelationVocab::inverse_of(q.relation), q.timestamp, q.subject});
    }
  }
  return out;
}

std::vector<LpQuery> derive_all_queries(const EpisodeTask& task) {
  std::vector<LpQuery> out;
  for (const auto& s : task.entities) {
    auto qs = derive_queries(task, s.entity);
    out.insert(out.end(), qs.begin(), qs.end());
  }
  return out;
}

SplitStats compute_stats(const OogSplit& split) {
  SplitStats s;
  s.entities = split.vocab.entities.size();
  s.relations = split.vocab.relations.num_original();
  std::set<Timestamp> ts;
  for (const auto& q : split.background.quads()) ts.insert(q.timestamp);
  for (int g = 0; g < 3; ++g) {
    s.unseen[g] = split.unseen[g].size();
    s.meta_facts[g] = split.facts[g].size();
    for (const auto& q : split.facts[g]) ts.insert(q.timestamp);
  }
  s.timestamps = ts.size();
  s.background = split.background.quads().size();
  return s;
}

}  // namespace fitcarl
