#include "fitcarl/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <ostream>
#include <stdexcept>

#include <omp.h>

#include "fitcarl/log.hpp"

namespace fitcarl {

EpisodeTask training_task(const OogSplit& split, std::size_t shots, std::uint64_t seed, std::size_t episode) {
  RngStream rng = RngStream(seed, "training_task").child(static_cast<std::uint64_t>(episode));
  return sample_task(split, MetaSet::Train, shots, rng);
}

EpisodeResult run_episode(const FitcarlModel& model, const OogSplit& split, const EpisodeTask& task,
                          const RngStream& episode_rng, std::size_t workers, std::vector<Rollout>* record) {
  const auto queries = derive_all_queries(task);
  const std::size_t n = queries.size();
  EpisodeResult result;
  result.queries = n;
  result.grads = Gradients(model.params());
  if (n == 0) return result;

  const ActionGraph graph(split.background, &task);
  const RolloutEnv env{graph, split.concepts, task};
  const int threads = static_cast<int>(std::max<std::size_t>(1, workers));
  std::vector<Gradients> partial(static_cast<std::size_t>(threads));
  std::vector<double> losses(n, 0.0);
  if (record) record->assign(n, Rollout{});
  std::exception_ptr failure;
  const Real inv_n = static_cast<Real>(1.0 / static_cast<double>(n));

#pragma omp parallel num_threads(threads)
  {
    const auto tid = static_cast<std::size_t>(omp_get_thread_num());
    partial[tid] = Gradients(model.params());
#pragma omp for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
      try {
        RngStream qrng = episode_rng.child(static_cast<std::uint64_t>(i));
        RngStream drop = qrng.child("dropout");
        Tape tape(&model.params(), true);
        Forward f(model, tape, &drop);
        Var loss = rollout_loss(f, env, queries[i], qrng, record ? &(*record)[i] : nullptr);
        losses[i] = loss.item();
        if (!std::isfinite(losses[i])) {
          throw std::runtime_error("non-finite loss for query (" + std::to_string(queries[i].source) + ", " +
                                   std::to_string(queries[i].relation) + ", ?, " + std::to_string(queries[i].time) +
                                   ")");
        }
        tape.backward(scale(loss, inv_n));
        tape.accumulate_into(partial[tid]);
      } catch (...) {
#pragma omp critical(fitcarl_train_failure)
        if (!failure) failure = std::current_exception();
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
  for (const auto& g : partial) {
    if (g.size() > 0) result.grads.add(g);
  }
  for (double l : losses) result.loss += l;
  result.loss /= static_cast<double>(n);
  return result;
}

TrainResult meta_train(const OogSplit& split, FitcarlModel model, const TrainConfig& config) {
  if (config.shots == 0) throw std::invalid_argument("shots must be >= 1");
  TrainResult result;
  AdamState adam(model.params(), config.adam);
  const bool validate = config.valid_every > 0 && !split.unseen_set(MetaSet::Valid).empty();
  auto valid_mrr = [&](const FitcarlModel& m) {
    EvalConfig ec;
    ec.which = MetaSet::Valid;
    ec.shots = config.shots;
    ec.beam = config.valid_beam;
    ec.seeds = config.valid_seeds;
    ec.workers = config.workers;
    return evaluate(m, split, ec).mean.mrr;
  };
  auto snapshot = [&](std::size_t done) { return Checkpoint{model, adam, config.seed, done}; };

  result.best = snapshot(0);
  result.best_mrr = -std::numeric_limits<double>::infinity();
  if (validate) {
    result.initial_mrr = valid_mrr(model);
    result.best_mrr = *result.initial_mrr;
    logging::info("initial meta-valid MRR " + std::to_string(result.best_mrr));
  }

  const RngStream episodes(config.seed, "episodes");
  for (std::size_t e = 0; e < config.episodes; ++e) {
    EpisodeTask task = training_task(split, config.shots, config.seed, e);
    EpisodeResult ep = run_episode(model, split, task, episodes.child(static_cast<std::uint64_t>(e)), config.workers);
    if (!std::isfinite(ep.loss) || !ep.grads.all_finite()) {
      throw std::runtime_error("non-finite loss or gradient at episode " + std::to_string(e + 1) + " (loss " +
                               std::to_string(ep.loss) + ", " + std::to_string(ep.queries) + " queries)");
    }
    if (ep.queries > 0) adam_step(model.params(), ep.grads, adam);
    CurvePoint point{e + 1, ep.loss, std::nullopt};
    const bool due = validate && ((e + 1) % config.valid_every == 0 || e + 1 == config.episodes);
    if (due) {
      const double mrr = valid_mrr(model);
      point.valid_mrr = mrr;
      logging::info("episode " + std::to_string(e + 1) + " loss " + std::to_string(ep.loss) + " meta-valid MRR " +
                    std::to_string(mrr));
      if (mrr > result.best_mrr) {
        result.best_mrr = mrr;
        result.best_episode = e + 1;
        result.best = snapshot(e + 1);
      }
    } else {
      logging::debug("episode " + std::to_string(e + 1) + " loss " + std::to_string(ep.loss));
    }
    result.curve.push_back(point);
  }
  result.last = snapshot(config.episodes);
  if (!validate) {
    result.best = result.last;
    result.best_episode = config.episodes;
  }
  return result;
}

void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve) {
  out << "episode,loss,valid_mrr\n";
  char buf[64];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%.17g", p.loss);
    out << p.episode << ',' << buf << ',';
    if (p.valid_mrr) {
      std::snprintf(buf, sizeof buf, "%.6f", *p.valid_mrr);
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace fitcarl
