#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "fitcarl/binary_io.hpp"
#include "fitcarl/checkpoint.hpp"
#include "fitcarl/evaluation.hpp"
#include "fitcarl/log.hpp"
#include "fitcarl/pretrain.hpp"
#include "fitcarl/split.hpp"
#include "fitcarl/synthetic.hpp"
#include "fitcarl/trainer.hpp"

namespace fs = std::filesystem;
using namespace fitcarl;

namespace {

// Bad flags, config values or input data.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string data;
  std::string out;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::string config;
};

struct ModelFlags {
  ModelConfig model;
  std::string ablation = "none";
};

void add_common(CLI::App* app, Common& c, bool need_data, bool need_out) {
  auto* d = app->add_option("--data", c.data, "Dataset directory");
  if (need_data) d->required();
  auto* o = app->add_option("--out", c.out, "Output directory");
  if (need_out) o->required();
  app->add_option("--seed", c.seed, "Root random seed");
  app->add_option("--workers", c.workers, "Worker threads (1 = reference deterministic mode)")
      ->check(CLI::PositiveNumber);
  app->add_option("--config", c.config, "Flat `key = value` file; keys are long flag names");
}

void add_model(CLI::App* app, ModelFlags& m) {
  auto& c = m.model;
  app->add_option("--dim", c.dim, "Embedding dimension d");
  app->add_option("--heads", c.heads, "Attention heads");
  app->add_option("--layers", c.layers, "Transformer layers");
  app->add_option("--cap", c.action_cap, "Sampled action-space size");
  app->add_option("--steps", c.steps, "Search steps L");
  app->add_option("--gamma", c.gamma, "Reward discount");
  app->add_option("--eta", c.eta, "Concept regularizer weight");
  app->add_option("--theta", c.theta, "Reward margin");
  app->add_option("--dropout", c.dropout, "Encoder dropout rate");
  app->add_option("--ablation", m.ablation, "Ablations, comma separated subset of A1,A2,B,C,D,E");
  app->add_flag("--reward-gradient", c.reward_gradient, "Back-propagate through the reward");
  app->add_flag("--cls-time-per-query", c.cls_time_per_query,
                "Encode non-query unseen entities at the query time");
  app->add_flag("--empty-prior-zero-kl", c.empty_prior_zero_kl, "Drop the KL term when the concept prior is empty");
  app->add_flag("--beam-sum", c.beam_sum, "Sum duplicate beam endpoints instead of taking the max");
}

ModelConfig finish_model(const ModelFlags& m) {
  ModelConfig c = m.model;
  try {
    c.ablation = Ablation::parse(m.ablation);
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
  return c;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Inserts `--key=value` for config entries whose flag is not on the command line.
std::vector<std::string> apply_config(const std::vector<std::string>& args, const CLI::App& app) {
  std::string path;
  std::string sub_name;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (sub_name.empty() && !args[i].empty() && args[i][0] != '-') sub_name = args[i];
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty() || sub_name.empty()) return args;
  const CLI::App* sub = nullptr;
  for (const auto* s : app.get_subcommands([](const CLI::App*) { return true; })) {
    if (s->get_name() == sub_name) sub = s;
  }
  if (!sub) return args;

  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path);
  std::vector<std::string> extra;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError(path + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    const std::string flag = "--" + key;
    if (key == "config" || !sub->get_option_no_throw(flag)) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "' for " + sub_name);
    }
    const bool given = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
    if (!given) extra.push_back(flag + "=" + value);
  }
  std::vector<std::string> out;
  for (const auto& a : args) {
    out.push_back(a);
    if (a == sub_name) out.insert(out.end(), extra.begin(), extra.end());
  }
  return out;
}

/// Effective settings of a subcommand as `key = value` lines.
std::string effective_config(const CLI::App& sub) {
  std::ostringstream os;
  for (const auto* opt : sub.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    std::string value;
    if (opt->count() > 0) {
      const auto& res = opt->results();
      for (std::size_t i = 0; i < res.size(); ++i) value += (i ? "," : "") + res[i];
      if (opt->get_type_size() == 0 && res.size() == 1 && res[0].empty()) value = "true";
    } else {
      value = opt->get_default_str();
      if (opt->get_type_size() == 0 && value.empty()) value = "false";
    }
    os << name << " = " << value << '\n';
  }
  return os.str();
}

fs::path prepare_out(const Common& c, const CLI::App& sub) {
  fs::path out(c.out);
  fs::create_directories(out);
  std::ofstream cfg(out / "config.txt");
  cfg << "# " << sub.get_name() << '\n' << effective_config(sub);
  return out;
}

OogSplit load_data(const Common& c) {
  if (!fs::is_directory(c.data)) throw ValidationError("data directory not found: " + c.data);
  return load_split(c.data);
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      seeds.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError("invalid seed '" + item + "'");
    }
  }
  if (seeds.empty()) throw ValidationError("--seeds needs at least one seed");
  return seeds;
}

void print_stats_row(std::ostream& os, const std::string& name, const SplitStats& s) {
  os << "dataset\tentities\trelations\ttimestamps\tmeta_train\tmeta_valid\tmeta_test\tbackground\ttrain_facts\t"
        "valid_facts\ttest_facts\n";
  os << name << '\t' << s.entities << '\t' << s.relations << '\t' << s.timestamps << '\t' << s.unseen[0] << '\t'
     << s.unseen[1] << '\t' << s.unseen[2] << '\t' << s.background << '\t' << s.meta_facts[0] << '\t'
     << s.meta_facts[1] << '\t' << s.meta_facts[2] << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot out-of-graph temporal link prediction with a reinforcement-learning agent"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  // pretrain
  Common pre_c;
  PretrainConfig pre_cfg;
  auto* pre = app.add_subcommand("pretrain", "Train ComplEx embeddings on the background graph");
  add_common(pre, pre_c, true, true);
  pre->add_option("--dim", pre_cfg.dim, "Embedding dimension (real || imaginary)");
  pre->add_option("--epochs", pre_cfg.epochs, "Training epochs");
  pre->add_option("--neg", pre_cfg.neg_ratio, "Negatives per triple");
  pre->add_option("--batch", pre_cfg.batch_size, "Mini-batch size");
  pre->add_option("--lr", pre_cfg.lr, "Adam learning rate");

  // make-splits
  Common ms_c;
  SplitFractions fractions;
  SyntheticConfig syn;
  bool synthetic = false;
  auto* ms = app.add_subcommand("make-splits", "Build background/meta splits from a TKG or generate a synthetic one");
  add_common(ms, ms_c, false, true);
  ms->add_flag("--synthetic", synthetic, "Generate the synthetic concept-rule TKG instead of reading --data");
  ms->add_option("--train-frac", fractions.train, "Fraction of entities made unseen for meta-training");
  ms->add_option("--valid-frac", fractions.valid, "Fraction of entities made unseen for meta-validation");
  ms->add_option("--test-frac", fractions.test, "Fraction of entities made unseen for meta-testing");
  ms->add_option("--entities", syn.entities, "Synthetic: entities");
  ms->add_option("--relations", syn.relations, "Synthetic: relations");
  ms->add_option("--timestamps", syn.timestamps, "Synthetic: timestamps");
  ms->add_option("--concepts", syn.concepts, "Synthetic: concepts");
  ms->add_option("--noise", syn.noise_facts, "Synthetic: random facts per subject");
  ms->add_option("--time-spread", syn.time_spread, "Synthetic: spread of a subject's facts around its period");
  ms->add_option("--segment-length", syn.segment_length, "Synthetic: timestamps per active-object segment");
  ms->add_option("--unseen-train", syn.unseen_train, "Synthetic: meta-train entities");
  ms->add_option("--unseen-valid", syn.unseen_valid, "Synthetic: meta-valid entities");
  ms->add_option("--unseen-test", syn.unseen_test, "Synthetic: meta-test entities");

  // train
  Common tr_c;
  ModelFlags tr_m;
  TrainConfig tr_cfg;
  std::string tr_emb;
  std::string tr_valid_seeds = "1";
  auto* tr = app.add_subcommand("train", "Meta-train the agent");
  add_common(tr, tr_c, true, true);
  add_model(tr, tr_m);
  tr->add_option("--embedding", tr_emb, "Pretrained embedding file (random initialization when omitted)");
  tr->add_option("--shots", tr_cfg.shots, "Support facts per unseen entity (K)")->check(CLI::PositiveNumber);
  tr->add_option("--episodes", tr_cfg.episodes, "Meta-training episodes");
  tr->add_option("--lr", tr_cfg.adam.lr, "Adam learning rate");
  tr->add_option("--valid-every", tr_cfg.valid_every, "Meta-validation cadence in episodes (0 = off)");
  tr->add_option("--valid-beam", tr_cfg.valid_beam, "Beam width during meta-validation");
  tr->add_option("--valid-seeds", tr_valid_seeds, "Comma separated support seeds for meta-validation");

  // eval
  Common ev_c;
  EvalConfig ev_cfg;
  std::string ev_ckpt, ev_seeds = "1,2,3,4,5", ev_set = "test", ev_gran = "month";
  bool ev_raw = false;
  auto* ev = app.add_subcommand("eval", "Filtered MRR and Hits@k with beam search");
  add_common(ev, ev_c, true, true);
  ev->add_option("--checkpoint", ev_ckpt, "Checkpoint file")->required();
  ev->add_option("--shots", ev_cfg.shots, "Support facts per unseen entity (K)")->check(CLI::PositiveNumber);
  ev->add_option("--beam", ev_cfg.beam, "Beam width")->check(CLI::PositiveNumber);
  ev->add_option("--seeds", ev_seeds, "Comma separated support seeds");
  ev->add_option("--set", ev_set, "Meta set to evaluate (train, valid, test)");
  ev->add_option("--granularity", ev_gran, "Time buckets (month, year)");
  ev->add_flag("--raw", ev_raw, "Disable the filtered setting");

  // explain
  Common ex_c;
  std::string ex_ckpt, ex_set = "test", ex_entity;
  std::size_t ex_shots = 1, ex_limit = 5;
  auto* ex = app.add_subcommand("explain", "Greedy reasoning paths for evaluation queries");
  add_common(ex, ex_c, true, true);
  ex->add_option("--checkpoint", ex_ckpt, "Checkpoint file")->required();
  ex->add_option("--shots", ex_shots, "Support facts per unseen entity (K)")->check(CLI::PositiveNumber);
  ex->add_option("--set", ex_set, "Meta set (train, valid, test)");
  ex->add_option("--entity", ex_entity, "Only queries of this unseen entity");
  ex->add_option("--limit", ex_limit, "Maximum number of queries");

  // inspect
  Common in_c;
  std::string in_name;
  auto* in = app.add_subcommand("inspect", "Dataset statistics");
  add_common(in, in_c, true, false);
  in->add_option("--name", in_name, "Dataset name printed in the table (default: directory name)");

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    args = apply_config(args, app);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    if (*pre) {
      OogSplit split = load_data(pre_c);
      fs::path out = prepare_out(pre_c, *pre);
      pre_cfg.seed = pre_c.seed;
      std::vector<double> losses;
      auto emb = pretrain(split.background, split.num_entities(), split.vocab.relations.num_ids(), pre_cfg, &losses);
      std::ofstream bin(out / "embedding.bin", std::ios::binary);
      write_embedding(bin, emb);
      std::ofstream txt(out / "embedding.txt");
      write_embedding_text(txt, emb, split.vocab);
      std::ofstream csv(out / "pretrain_loss.csv");
      csv << "epoch,loss\n" << std::setprecision(17);
      for (std::size_t i = 0; i < losses.size(); ++i) csv << i + 1 << ',' << losses[i] << '\n';
      logging::info("wrote " + (out / "embedding.bin").string());
    } else if (*ms) {
      fs::path out = prepare_out(ms_c, *ms);
      OogSplit split;
      if (synthetic) {
        syn.seed = ms_c.seed;
        try {
          split = make_synthetic(syn);
        } catch (const std::invalid_argument& e) {
          throw ValidationError(e.what());
        }
      } else {
        if (ms_c.data.empty()) throw ValidationError("make-splits needs --data or --synthetic");
        std::vector<fs::path> files;
        for (const char* name : {"train.txt", "valid.txt", "test.txt", "quads.txt"}) {
          if (fs::exists(fs::path(ms_c.data) / name)) files.push_back(fs::path(ms_c.data) / name);
        }
        if (files.empty()) throw ValidationError("no train/valid/test.txt or quads.txt in " + ms_c.data);
        Vocabulary vocab;
        auto loaded = load_quadruple_files(files, vocab, VocabMode::Build);
        std::vector<Quadruple> all;
        for (auto& f : loaded.files) all.insert(all.end(), f.begin(), f.end());
        TkgStore store(vocab.entities.size(), std::move(all));
        ConceptTable concepts(vocab.entities.size());
        if (fs::exists(fs::path(ms_c.data) / "concepts.txt")) concepts = load_concepts(fs::path(ms_c.data) / "concepts.txt", vocab);
        try {
          split = make_split(vocab, loaded.axis, store, concepts, fractions, ms_c.seed);
        } catch (const std::invalid_argument& e) {
          throw ValidationError(e.what());
        }
      }
      save_split(split, out);
      print_stats_row(std::cout, out.filename().string(), compute_stats(split));
    } else if (*tr) {
      OogSplit split = load_data(tr_c);
      ModelConfig mc = finish_model(tr_m);
      tr_cfg.seed = tr_c.seed;
      tr_cfg.workers = tr_c.workers;
      tr_cfg.valid_seeds = parse_seeds(tr_valid_seeds);
      fs::path out = prepare_out(tr_c, *tr);
      FitcarlModel model(mc, split.num_entities(), split.vocab.relations.num_ids(), tr_c.seed);
      if (!tr_emb.empty()) {
        std::ifstream ein(tr_emb, std::ios::binary);
        if (!ein) throw ValidationError("cannot open embedding file " + tr_emb);
        try {
          model.load_embeddings(read_embedding(ein));
        } catch (const std::invalid_argument& e) {
          throw ValidationError(e.what());
        }
      } else {
        logging::info("no --embedding given; entity and relation vectors start random");
      }
      TrainResult result = meta_train(split, std::move(model), tr_cfg);
      save_checkpoint(out / "checkpoint.bin", result.best);
      save_checkpoint(out / "last.bin", result.last);
      std::ofstream curve(out / "loss_curve.csv");
      write_curve_csv(curve, result.curve);
      logging::info("best checkpoint after " + std::to_string(result.best_episode) + " episodes");
    } else if (*ev) {
      OogSplit split = load_data(ev_c);
      ev_cfg.seeds = parse_seeds(ev_seeds);
      ev_cfg.workers = ev_c.workers;
      ev_cfg.filtered = !ev_raw;
      Granularity gran;
      try {
        ev_cfg.which = parse_meta_set(ev_set);
        gran = parse_granularity(ev_gran);
      } catch (const std::invalid_argument& e) {
        throw ValidationError(e.what());
      }
      Checkpoint ckpt = load_checkpoint(ev_ckpt);
      fs::path out = prepare_out(ev_c, *ev);
      EvalReport report = evaluate(ckpt.model, split, ev_cfg);
      const std::string json = metrics_json(report);
      std::ofstream(out / "metrics.json") << json;
      std::ofstream buckets(out / "buckets.csv");
      write_buckets_csv(buckets, bucket_by_time(report, split.axis, gran));
      std::cout << json;
    } else if (*ex) {
      OogSplit split = load_data(ex_c);
      MetaSet which;
      try {
        which = parse_meta_set(ex_set);
      } catch (const std::invalid_argument& e) {
        throw ValidationError(e.what());
      }
      Checkpoint ckpt = load_checkpoint(ex_ckpt);
      fs::path out = prepare_out(ex_c, *ex);
      EpisodeTask task = evaluation_task(split, which, ex_shots, ex_c.seed);
      std::vector<LpQuery> queries;
      if (!ex_entity.empty()) {
        auto id = split.vocab.entities.find(ex_entity);
        if (!id || !task.contains(*id)) throw ValidationError("'" + ex_entity + "' is not a usable unseen entity of " + ex_set);
        queries = derive_queries(task, *id);
      } else {
        queries = derive_all_queries(task);
      }
      if (queries.size() > ex_limit) queries.resize(ex_limit);
      std::ostringstream text;
      for (const auto& q : queries) {
        text << "query (" << split.vocab.entities.name(q.source) << ", " << split.vocab.relations.name(q.relation)
             << ", ?, " << split.axis.format(q.time) << ") answer " << split.vocab.entities.name(q.answer) << '\n';
        text << format_trace(explain(ckpt.model, split, task, q), split.vocab, split.axis) << '\n';
      }
      std::ofstream(out / "explain.txt") << text.str();
      std::cout << text.str();
    } else if (*in) {
      OogSplit split = load_data(in_c);
      std::string name = in_name.empty() ? fs::path(in_c.data).lexically_normal().filename().string() : in_name;
      if (name.empty()) name = fs::path(in_c.data).lexically_normal().parent_path().filename().string();
      std::ostringstream row;
      print_stats_row(row, name, compute_stats(split));
      std::cout << row.str();
      if (!in_c.out.empty()) {
        fs::path out = prepare_out(in_c, *in);
        std::ofstream(out / "stats.tsv") << row.str();
      }
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const io::FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
