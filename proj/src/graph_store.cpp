#include "fitcarl/graph_store.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "fitcarl/binary_io.hpp"

namespace fitcarl {

std::uint32_t NameTable::intern(std::string_view name) {
  auto key = std::string(name);
  if (auto it = index_.find(key); it != index_.end()) return it->second;
  auto id = static_cast<std::uint32_t>(names_.size());
  index_.emplace(key, id);
  names_.push_back(std::move(key));
  return id;
}

std::optional<std::uint32_t> NameTable::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<RelationId> RelationVocab::find(std::string_view name) const {
  auto k = names_.find(name);
  if (!k) return std::nullopt;
  return original_id(*k);
}

std::string RelationVocab::name(RelationId r) const {
  if (r == kSelfLoop) return "SELF_LOOP";
  const std::uint32_t k = (r - 1) / 2;
  if (k >= names_.size()) return "rel#" + std::to_string(r);
  return is_inverse(r) ? names_.name(k) + "^-1" : names_.name(k);
}

std::string TimeAxis::format(Timestamp t) const {
  if (!dates) return std::to_string(t);
  std::chrono::year_month_day ymd{epoch + std::chrono::days{t}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

// ---------------------------------------------------------------- TkgStore

TkgStore::TkgStore(std::size_t num_entities, std::vector<Quadruple> quads)
    : num_entities_(num_entities), quads_(std::move(quads)) {
  std::vector<std::size_t> degree(num_entities_, 0);
  for (const auto& q : quads_) {
    if (q.subject >= num_entities_ || q.object >= num_entities_) {
      throw DataError("TkgStore: entity id out of range (" + std::to_string(std::max(q.subject, q.object)) +
                      " >= " + std::to_string(num_entities_) + ")");
    }
    if (q.relation == kSelfLoop || RelationVocab::is_inverse(q.relation)) {
      throw DataError("TkgStore: quadruples must use original relation ids");
    }
    if (q.timestamp < 0) throw DataError("TkgStore: negative timestamp");
    ++degree[q.subject];
    ++degree[q.object];
  }
  offsets_.assign(num_entities_ + 1, 0);
  for (std::size_t e = 0; e < num_entities_; ++e) offsets_[e + 1] = offsets_[e] + degree[e];
  edges_.resize(offsets_.back());
  std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
  for (const auto& q : quads_) {
    edges_[cursor[q.subject]++] = Edge{q.relation, q.object, q.timestamp};
    edges_[cursor[q.object]++] = Edge{RelationVocab::inverse_of(q.relation), q.subject, q.timestamp};
  }
  if (!quads_.empty()) {
    auto [lo, hi] = std::minmax_element(quads_.begin(), quads_.end(), [](const auto& a, const auto& b) {
      return a.timestamp < b.timestamp;
    });
    time_span_ = {lo->timestamp, hi->timestamp};
  }
}

std::span<const Edge> TkgStore::out_edges(EntityId e) const {
  if (e >= num_entities_) return {};
  return std::span<const Edge>(edges_).subspan(offsets_[e], offsets_[e + 1] - offsets_[e]);
}

std::vector<EntityId> TkgStore::entities() const {
  std::vector<EntityId> out;
  for (EntityId e = 0; e < num_entities_; ++e)
    if (offsets_[e + 1] > offsets_[e]) out.push_back(e);
  return out;
}

std::size_t TkgStore::distinct_timestamps() const {
  std::set<Timestamp> ts;
  for (const auto& q : quads_) ts.insert(q.timestamp);
  return ts.size();
}

// ---------------------------------------------------------------- loading

namespace {

struct RawLine {
  std::string subject, relation, object, time;
  std::size_t line = 0;
};

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  if (line.find('\t') != std::string::npos) {
    std::size_t start = 0;
    while (true) {
      auto pos = line.find('\t', start);
      fields.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
  } else {
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) fields.push_back(tok);
  }
  return fields;
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\n')) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && s[i] == ' ') ++i;
  return s.substr(i);
}

std::optional<std::chrono::sys_days> parse_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  int y = 0;
  unsigned m = 0, d = 0;
  auto ok = [](auto r) { return r.ec == std::errc{}; };
  if (!ok(std::from_chars(s.data(), s.data() + 4, y)) || !ok(std::from_chars(s.data() + 5, s.data() + 7, m)) ||
      !ok(std::from_chars(s.data() + 8, s.data() + 10, d))) {
    return std::nullopt;
  }
  std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) return std::nullopt;
  return std::chrono::sys_days{ymd};
}

std::optional<long long> parse_int(std::string_view s) {
  long long v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::vector<RawLine> read_raw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open file");
  std::vector<RawLine> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    auto f = split_fields(line);
    if (f.size() != 4) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected 4 tab-separated columns, got " +
                      std::to_string(f.size()));
    }
    out.push_back(RawLine{trim(f[0]), trim(f[1]), trim(f[2]), trim(f[3]), lineno});
  }
  if (out.empty()) throw DataError(path.string() + ": file contains no quadruples");
  return out;
}

}  // namespace

LoadedQuads load_quadruple_files(const std::vector<std::filesystem::path>& paths, Vocabulary& vocab,
                                 VocabMode mode) {
  std::vector<std::vector<RawLine>> raw;
  raw.reserve(paths.size());
  for (const auto& p : paths) raw.push_back(read_raw(p));

  // Determine the time format and epoch across the whole file set.
  std::optional<bool> use_dates;
  std::optional<std::chrono::sys_days> earliest;
  for (std::size_t f = 0; f < raw.size(); ++f) {
    for (const auto& r : raw[f]) {
      auto date = parse_date(r.time);
      bool is_date = date.has_value();
      if (!is_date && !parse_int(r.time)) {
        throw DataError(paths[f].string() + ":" + std::to_string(r.line) + ": malformed timestamp '" + r.time + "'");
      }
      if (use_dates && *use_dates != is_date) {
        throw DataError(paths[f].string() + ":" + std::to_string(r.line) + ": mixed date and integer timestamps");
      }
      use_dates = is_date;
      if (is_date && (!earliest || *date < *earliest)) earliest = *date;
    }
  }

  LoadedQuads out;
  out.axis.dates = use_dates.value_or(false);
  if (earliest) out.axis.epoch = *earliest;

  for (std::size_t f = 0; f < raw.size(); ++f) {
    std::vector<Quadruple> quads;
    quads.reserve(raw[f].size());
    for (const auto& r : raw[f]) {
      auto where = [&] { return paths[f].string() + ":" + std::to_string(r.line) + ": "; };
      Quadruple q;
      if (mode == VocabMode::Build) {
        q.subject = vocab.entities.intern(r.subject);
        q.relation = vocab.relations.intern(r.relation);
        q.object = vocab.entities.intern(r.object);
      } else {
        auto s = vocab.entities.find(r.subject);
        auto rel = vocab.relations.find(r.relation);
        auto o = vocab.entities.find(r.object);
        if (!s) throw DataError(where() + "unknown entity '" + r.subject + "'");
        if (!rel) throw DataError(where() + "unknown relation '" + r.relation + "'");
        if (!o) throw DataError(where() + "unknown entity '" + r.object + "'");
        q.subject = *s;
        q.relation = *rel;
        q.object = *o;
      }
      long long t = 0;
      if (out.axis.dates) {
        t = (*parse_date(r.time) - out.axis.epoch).count();
      } else {
        t = *parse_int(r.time);
      }
      if (t < 0 || t > std::numeric_limits<Timestamp>::max()) {
        throw DataError(where() + "timestamp out of range");
      }
      q.timestamp = static_cast<Timestamp>(t);
      quads.push_back(q);
    }
    out.files.push_back(std::move(quads));
  }
  return out;
}

TkgStore load_quadruples(const std::filesystem::path& path, Vocabulary& vocab, VocabMode mode, TimeAxis* axis) {
  auto loaded = load_quadruple_files({path}, vocab, mode);
  if (axis) *axis = loaded.axis;
  return TkgStore(vocab.entities.size(), std::move(loaded.files.front()));
}

namespace {
constexpr std::string_view kStoreMagic = "TKGSTORE1";
constexpr std::uint32_t kStoreVersion = 1;
}  // namespace

void write_store(std::ostream& out, const TkgStore& store) {
  io::write_magic(out, kStoreMagic);
  io::write_pod(out, kStoreVersion);
  io::write_pod(out, static_cast<std::uint64_t>(store.num_entities()));
  io::write_pod(out, static_cast<std::uint64_t>(store.quads().size()));
  for (const auto& q : store.quads()) {
    io::write_pod(out, q.subject);
    io::write_pod(out, q.relation);
    io::write_pod(out, q.object);
    io::write_pod(out, q.timestamp);
  }
}

TkgStore read_store(std::istream& in) {
  io::expect_magic(in, kStoreMagic, "store");
  auto version = io::read_pod<std::uint32_t>(in);
  if (version != kStoreVersion) throw io::FormatError("store: unsupported version " + std::to_string(version));
  auto entities = io::read_pod<std::uint64_t>(in);
  auto n = io::read_pod<std::uint64_t>(in);
  std::vector<Quadruple> quads(n);
  for (auto& q : quads) {
    q.subject = io::read_pod<EntityId>(in);
    q.relation = io::read_pod<RelationId>(in);
    q.object = io::read_pod<EntityId>(in);
    q.timestamp = io::read_pod<Timestamp>(in);
  }
  return TkgStore(entities, std::move(quads));
}

// ---------------------------------------------------------------- concepts

std::span<const ConceptId> ConceptTable::concepts_of(EntityId e) const {
  if (e >= concepts_of_.size()) return {};
  return concepts_of_[e];
}

void ConceptTable::add_concept(EntityId e, ConceptId c) {
  if (e >= concepts_of_.size()) concepts_of_.resize(e + 1);
  auto& set = concepts_of_[e];
  auto it = std::lower_bound(set.begin(), set.end(), c);
  if (it == set.end() || *it != c) set.insert(it, c);
}

std::span<const std::pair<ConceptId, double>> ConceptTable::prior(RelationId r) const {
  if (r >= priors_.size()) return {};
  return priors_[r];
}

double ConceptTable::prior_prob(RelationId r, ConceptId c) const {
  auto p = prior(r);
  auto it = std::lower_bound(p.begin(), p.end(), c, [](const auto& kv, ConceptId x) { return kv.first < x; });
  if (it == p.end() || it->first != c) return 0.0;
  return it->second;
}

double ConceptTable::concept_mass(RelationId r, EntityId e) const {
  double total = 0.0;
  for (auto c : concepts_of(e)) total += prior_prob(r, c);
  return total;
}

ConceptTable load_concepts(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open file");
  ConceptTable table(vocab.entities.size());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (line.empty()) continue;
    auto tab = line.find('\t');
    std::string entity = trim(line.substr(0, tab));
    auto id = vocab.entities.find(entity);
    if (!id) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": unknown entity '" + entity + "'");
    }
    table.resize_entities(*id + 1);
    if (tab == std::string::npos) continue;
    std::string rest = line.substr(tab + 1);
    std::size_t start = 0;
    while (start <= rest.size()) {
      auto bar = rest.find('|', start);
      auto name = trim(rest.substr(start, bar == std::string::npos ? std::string::npos : bar - start));
      if (!name.empty()) table.add_concept(*id, table.names().intern(name));
      if (bar == std::string::npos) break;
      start = bar + 1;
    }
  }
  return table;
}

void compute_concept_prior(const TkgStore& background, std::size_t num_relation_ids, ConceptTable& table) {
  std::vector<std::map<ConceptId, std::uint64_t>> counts(num_relation_ids);
  auto bump = [&](RelationId r, EntityId object) {
    if (r >= counts.size()) throw DataError("compute_concept_prior: relation id out of range");
    for (auto c : table.concepts_of(object)) ++counts[r][c];
  };
  for (const auto& q : background.quads()) {
    bump(q.relation, q.object);
    bump(RelationVocab::inverse_of(q.relation), q.subject);
  }
  std::vector<std::vector<std::pair<ConceptId, double>>> priors(num_relation_ids);
  for (std::size_t r = 0; r < num_relation_ids; ++r) {
    std::uint64_t total = 0;
    for (const auto& [c, n] : counts[r]) total += n;
    if (total == 0) continue;
    for (const auto& [c, n] : counts[r]) {
      priors[r].emplace_back(c, static_cast<double>(n) / static_cast<double>(total));
    }
  }
  table.set_priors(std::move(priors));
}

}  // namespace fitcarl
