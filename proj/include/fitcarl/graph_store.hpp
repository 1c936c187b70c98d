#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace fitcarl {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;
using ConceptId = std::uint32_t;
using Timestamp = std::int32_t;

/// Reserved relation id of the self-loop action; it is its own inverse.
inline constexpr RelationId kSelfLoop = 0;

/// Malformed or inconsistent input data. Messages carry file/line context.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Quadruple {
  EntityId subject = 0;
  RelationId relation = 0;
  EntityId object = 0;
  Timestamp timestamp = 0;

  friend auto operator<=>(const Quadruple&, const Quadruple&) = default;
};

/// Interned names with dense ids in first-seen order.
class NameTable {
 public:
  std::uint32_t intern(std::string_view name);
  std::optional<std::uint32_t> find(std::string_view name) const;
  const std::string& name(std::uint32_t id) const { return names_.at(id); }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

/// Relation ids: SELF_LOOP = 0, the k-th original relation is 1 + 2k and its
/// inverse 2 + 2k. The layout is stable while the vocabulary grows.
class RelationVocab {
 public:
  RelationId intern(std::string_view name) { return original_id(names_.intern(name)); }
  std::optional<RelationId> find(std::string_view name) const;

  static constexpr RelationId original_id(std::uint32_t k) { return 1 + 2 * k; }
  static constexpr RelationId inverse_of(RelationId r) {
    if (r == kSelfLoop) return kSelfLoop;
    return (r % 2 == 1) ? r + 1 : r - 1;
  }
  static constexpr bool is_inverse(RelationId r) { return r != kSelfLoop && r % 2 == 0; }

  std::size_t num_original() const { return names_.size(); }
  /// Number of relation ids including inverses and SELF_LOOP.
  std::size_t num_ids() const { return 1 + 2 * names_.size(); }
  /// "name", "name^-1" or "SELF_LOOP".
  std::string name(RelationId r) const;

 private:
  NameTable names_;
};

struct Vocabulary {
  NameTable entities;
  RelationVocab relations;
};

/// Calendar anchor of integer timestamps: day offsets from `epoch` when the
/// input used dates, raw integers otherwise.
struct TimeAxis {
  bool dates = false;
  std::chrono::sys_days epoch{};

  std::string format(Timestamp t) const;
};

struct Edge {
  RelationId relation = 0;
  EntityId target = 0;
  Timestamp timestamp = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Immutable set of quadruples with outgoing-edge indexes in both directions.
/// For every stored (s, r, o, t), out_edges(s) holds (r, o, t) and
/// out_edges(o) holds (r^-1, s, t); lists keep file order.
class TkgStore {
 public:
  TkgStore() = default;
  TkgStore(std::size_t num_entities, std::vector<Quadruple> quads);

  const std::vector<Quadruple>& quads() const { return quads_; }
  std::span<const Edge> out_edges(EntityId e) const;
  std::size_t num_entities() const { return num_entities_; }
  std::size_t num_edges() const { return edges_.size(); }
  bool empty() const { return quads_.empty(); }

  /// (min, max) timestamp; (0, 0) when empty.
  std::pair<Timestamp, Timestamp> time_span() const { return time_span_; }
  /// Sorted ids of entities that occur in at least one quad.
  std::vector<EntityId> entities() const;
  std::size_t distinct_timestamps() const;

 private:
  std::size_t num_entities_ = 0;
  std::vector<Quadruple> quads_;
  std::vector<std::size_t> offsets_;  // CSR row pointers, size num_entities + 1
  std::vector<Edge> edges_;
  std::pair<Timestamp, Timestamp> time_span_{0, 0};
};

enum class VocabMode { Build, Frozen };

/// Loaded quadruple files sharing one vocabulary and one time axis.
struct LoadedQuads {
  std::vector<std::vector<Quadruple>> files;
  TimeAxis axis;
};

/// Parses tab-separated `subject relation object time` files. Dates
/// (YYYY-MM-DD) become day offsets from the earliest date across all files;
/// plain integers are kept as-is. All files must use the same time format.
LoadedQuads load_quadruple_files(const std::vector<std::filesystem::path>& paths, Vocabulary& vocab,
                                 VocabMode mode);

/// Single-file convenience wrapper.
TkgStore load_quadruples(const std::filesystem::path& path, Vocabulary& vocab, VocabMode mode,
                         TimeAxis* axis = nullptr);

void write_store(std::ostream& out, const TkgStore& store);
TkgStore read_store(std::istream& in);

/// Entity concepts and the relation-conditioned concept prior P(c | r).
class ConceptTable {
 public:
  ConceptTable() = default;
  explicit ConceptTable(std::size_t num_entities) : concepts_of_(num_entities) {}

  NameTable& names() { return names_; }
  const NameTable& names() const { return names_; }

  std::span<const ConceptId> concepts_of(EntityId e) const;
  void add_concept(EntityId e, ConceptId c);
  void resize_entities(std::size_t n) {
    if (n > concepts_of_.size()) concepts_of_.resize(n);
  }
  std::size_t num_entities() const { return concepts_of_.size(); }

  /// Prior over concepts for relation r, sorted by concept id. Empty when r
  /// has no conceptful objects in the background graph (or is unknown).
  std::span<const std::pair<ConceptId, double>> prior(RelationId r) const;
  double prior_prob(RelationId r, ConceptId c) const;
  bool has_prior(RelationId r) const { return !prior(r).empty(); }
  bool priors_computed() const { return !priors_.empty(); }

  /// sum_{c in concepts(e)} P(c | r)
  double concept_mass(RelationId r, EntityId e) const;

  void set_priors(std::vector<std::vector<std::pair<ConceptId, double>>> priors) { priors_ = std::move(priors); }

 private:
  NameTable names_;
  std::vector<std::vector<ConceptId>> concepts_of_;
  std::vector<std::vector<std::pair<ConceptId, double>>> priors_;
};

/// Reads `entity<TAB>c1|c2|...` lines. Entities missing from the file get the
/// empty set; repeated entities are unioned.
ConceptTable load_concepts(const std::filesystem::path& path, const Vocabulary& vocab);

/// P(c|r) = n_c / sum n_c' over objects of all background facts of r, one
/// count per (fact, concept of the object). Inverse relations count the
/// subjects of the original facts.
void compute_concept_prior(const TkgStore& background, std::size_t num_relation_ids, ConceptTable& table);

}  // namespace fitcarl
