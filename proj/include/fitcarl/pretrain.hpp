#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "fitcarl/graph_store.hpp"
#include "fitcarl/rng.hpp"
#include "fitcarl/tensor.hpp"

namespace fitcarl {

/// ComplEx vectors stored as the length-d concatenation real || imag.
struct ComplexEmbedding {
  std::size_t dim = 0;
  Tensor entities;   // [num_entities, dim]
  Tensor relations;  // [num_relation_ids, dim]

  std::size_t num_entities() const { return entities.empty() ? 0 : entities.rows(); }
  std::size_t num_relations() const { return relations.empty() ? 0 : relations.rows(); }

  friend bool operator==(const ComplexEmbedding&, const ComplexEmbedding&) = default;
};

/// Re(<e_s, w_r, conj(e_o)>)
double complex_score(const ComplexEmbedding& emb, EntityId s, RelationId r, EntityId o);

struct PretrainConfig {
  std::size_t dim = 100;
  std::size_t epochs = 50;
  std::size_t neg_ratio = 10;
  std::size_t batch_size = 512;
  double lr = 0.01;
  double init_scale = 0.1;
  std::uint64_t seed = 0;
};

/// Seeded N(0, init_scale^2) initialization of every entity and relation id.
ComplexEmbedding init_embedding(std::size_t num_entities, std::size_t num_relation_ids, std::size_t dim,
                                double init_scale, RngStream& rng);

/// Binary cross-entropy training on the static background triples (both
/// directions) with `neg_ratio` uniformly corrupted objects per triple.
/// Negatives are drawn from the entities of the background graph; entities
/// outside it keep their random initialization.
ComplexEmbedding pretrain(const TkgStore& background, std::size_t num_entities, std::size_t num_relation_ids,
                          const PretrainConfig& config, std::vector<double>* epoch_losses = nullptr);

void write_embedding(std::ostream& out, const ComplexEmbedding& emb);
ComplexEmbedding read_embedding(std::istream& in);
/// Human-readable export: one `E|R <TAB> name <TAB> v1 v2 ...` line per id.
void write_embedding_text(std::ostream& out, const ComplexEmbedding& emb, const Vocabulary& vocab);

}  // namespace fitcarl
