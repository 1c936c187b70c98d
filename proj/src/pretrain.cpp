#include "fitcarl/pretrain.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "fitcarl/adam.hpp"
#include "fitcarl/binary_io.hpp"
#include "fitcarl/params.hpp"

namespace fitcarl {

double complex_score(const ComplexEmbedding& emb, EntityId s, RelationId r, EntityId o) {
  if (s >= emb.num_entities() || o >= emb.num_entities()) throw std::out_of_range("complex_score: unknown entity id");
  if (r >= emb.num_relations()) throw std::out_of_range("complex_score: unknown relation id");
  const std::size_t half = emb.dim / 2;
  auto es = emb.entities.row(s), wr = emb.relations.row(r), eo = emb.entities.row(o);
  double total = 0.0;
  for (std::size_t k = 0; k < half; ++k) {
    const double as = es[k], bs = es[half + k];
    const double ar = wr[k], br = wr[half + k];
    const double ao = eo[k], bo = eo[half + k];
    total += as * ar * ao + bs * ar * bo + as * br * bo - bs * br * ao;
  }
  return total;
}

ComplexEmbedding init_embedding(std::size_t num_entities, std::size_t num_relation_ids, std::size_t dim,
                                double init_scale, RngStream& rng) {
  if (dim == 0 || dim % 2 != 0) throw std::invalid_argument("ComplEx dimension must be positive and even");
  ComplexEmbedding emb;
  emb.dim = dim;
  emb.entities = Tensor(Shape{num_entities, dim});
  emb.relations = Tensor(Shape{num_relation_ids, dim});
  for (auto& v : emb.entities.values()) v = static_cast<Real>(rng.normal(0.0, init_scale));
  for (auto& v : emb.relations.values()) v = static_cast<Real>(rng.normal(0.0, init_scale));
  return emb;
}

namespace {

struct Triple {
  EntityId s;
  RelationId r;
  EntityId o;
};

double stable_log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Adds dL/dscore * dscore/d(params) for one triple.
void accumulate_grad(const ComplexEmbedding& emb, const Triple& t, double dscore, Tensor& gent, Tensor& grel) {
  const std::size_t half = emb.dim / 2;
  auto es = emb.entities.row(t.s), wr = emb.relations.row(t.r), eo = emb.entities.row(t.o);
  auto gs = gent.row(t.s), go = gent.row(t.o), gr = grel.row(t.r);
  for (std::size_t k = 0; k < half; ++k) {
    const double as = es[k], bs = es[half + k];
    const double ar = wr[k], br = wr[half + k];
    const double ao = eo[k], bo = eo[half + k];
    gs[k] += static_cast<Real>(dscore * (ar * ao + br * bo));
    gs[half + k] += static_cast<Real>(dscore * (ar * bo - br * ao));
    gr[k] += static_cast<Real>(dscore * (as * ao + bs * bo));
    gr[half + k] += static_cast<Real>(dscore * (as * bo - bs * ao));
    go[k] += static_cast<Real>(dscore * (as * ar - bs * br));
    go[half + k] += static_cast<Real>(dscore * (bs * ar + as * br));
  }
}

}  // namespace

ComplexEmbedding pretrain(const TkgStore& background, std::size_t num_entities, std::size_t num_relation_ids,
                          const PretrainConfig& config, std::vector<double>* epoch_losses) {
  if (background.empty()) throw std::invalid_argument("pretrain: background graph is empty");
  RngStream root(config.seed, "pretrain");
  RngStream init_rng = root.child("init");
  ComplexEmbedding emb = init_embedding(num_entities, num_relation_ids, config.dim, config.init_scale, init_rng);
  if (config.epochs == 0) return emb;

  std::vector<Triple> triples;
  triples.reserve(2 * background.quads().size());
  for (const auto& q : background.quads()) {
    triples.push_back({q.subject, q.relation, q.object});
    triples.push_back({q.object, RelationVocab::inverse_of(q.relation), q.subject});
  }
  const auto pool = background.entities();

  ParamStore params;
  const ParamId pe = params.add("entities", emb.entities);
  const ParamId pr = params.add("relations", emb.relations);
  AdamState adam(params, AdamConfig{config.lr, 0.9, 0.999, 1e-8});
  Gradients grads(params);
  const std::size_t batch = std::max<std::size_t>(1, config.batch_size);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    RngStream erng = root.child("epoch").child(epoch);
    auto order = erng.sample_without_replacement(triples.size(), triples.size());
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      grads.zero();
      emb.entities = params.value(pe);
      emb.relations = params.value(pr);
      const double norm = 1.0 / static_cast<double>((end - start) * (1 + config.neg_ratio));
      for (std::size_t i = start; i < end; ++i) {
        Triple pos = triples[order[i]];
        double s = complex_score(emb, pos.s, pos.r, pos.o);
        loss_sum -= stable_log_sigmoid(s);
        accumulate_grad(emb, pos, (sigmoid(s) - 1.0) * norm, grads[pe], grads[pr]);
        for (std::size_t k = 0; k < config.neg_ratio; ++k) {
          Triple neg = pos;
          neg.o = pool[erng.uniform_index(pool.size())];
          double sn = complex_score(emb, neg.s, neg.r, neg.o);
          loss_sum -= stable_log_sigmoid(-sn);
          accumulate_grad(emb, neg, sigmoid(sn) * norm, grads[pe], grads[pr]);
        }
        loss_count += 1 + config.neg_ratio;
      }
      adam_step(params, grads, adam);
    }
    if (epoch_losses) epoch_losses->push_back(loss_sum / static_cast<double>(loss_count));
  }
  emb.entities = params.value(pe);
  emb.relations = params.value(pr);
  return emb;
}

namespace {
constexpr std::string_view kEmbMagic = "CPXEMB1";
constexpr std::uint32_t kEmbVersion = 1;
}  // namespace

void write_embedding(std::ostream& out, const ComplexEmbedding& emb) {
  io::write_magic(out, kEmbMagic);
  io::write_pod(out, kEmbVersion);
  io::write_pod(out, static_cast<std::uint64_t>(emb.dim));
  io::write_pod(out, static_cast<std::uint64_t>(emb.num_entities()));
  io::write_pod(out, static_cast<std::uint64_t>(emb.num_relations()));
  auto records = [&](const Tensor& table) {
    for (std::size_t i = 0; i < (table.empty() ? 0 : table.rows()); ++i) {
      io::write_pod(out, static_cast<std::uint32_t>(i));
      for (auto v : table.row(i)) io::write_pod(out, static_cast<double>(v));
    }
  };
  records(emb.entities);
  records(emb.relations);
}

ComplexEmbedding read_embedding(std::istream& in) {
  io::expect_magic(in, kEmbMagic, "embedding");
  auto version = io::read_pod<std::uint32_t>(in);
  if (version != kEmbVersion) throw io::FormatError("embedding: unsupported version " + std::to_string(version));
  ComplexEmbedding emb;
  emb.dim = io::read_pod<std::uint64_t>(in);
  const auto ne = io::read_pod<std::uint64_t>(in);
  const auto nr = io::read_pod<std::uint64_t>(in);
  if (emb.dim == 0 || emb.dim % 2 != 0) throw io::FormatError("embedding: dimension must be positive and even");
  auto records = [&](std::uint64_t rows) {
    Tensor table(Shape{rows, emb.dim});
    for (std::uint64_t i = 0; i < rows; ++i) {
      auto id = io::read_pod<std::uint32_t>(in);
      if (id >= rows) throw io::FormatError("embedding: record id out of range");
      for (auto& v : table.row(id)) v = static_cast<Real>(io::read_pod<double>(in));
    }
    return table;
  };
  emb.entities = records(ne);
  emb.relations = records(nr);
  return emb;
}

void write_embedding_text(std::ostream& out, const ComplexEmbedding& emb, const Vocabulary& vocab) {
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t i = 0; i < emb.num_entities(); ++i) {
    out << "E\t" << (i < vocab.entities.size() ? vocab.entities.name(static_cast<EntityId>(i)) : std::to_string(i))
        << '\t';
    auto row = emb.entities.row(i);
    for (std::size_t k = 0; k < row.size(); ++k) out << (k ? " " : "") << row[k];
    out << '\n';
  }
  for (std::size_t i = 0; i < emb.num_relations(); ++i) {
    out << "R\t" << vocab.relations.name(static_cast<RelationId>(i)) << '\t';
    auto row = emb.relations.row(i);
    for (std::size_t k = 0; k < row.size(); ++k) out << (k ? " " : "") << row[k];
    out << '\n';
  }
}

}  // namespace fitcarl
