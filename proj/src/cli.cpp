#include "tane/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>

#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "tane/config.hpp"
#include "tane/error.hpp"
#include "tane/report.hpp"

namespace tane::cli {

namespace {

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
  auto logger = std::make_shared<spdlog::logger>("tane", sink);
  logger->set_pattern("[%l] %v");
  spdlog::level::level_enum level = spdlog::level::warn;
  if (const char* env = std::getenv("TANE_LOG")) {
    const std::string v(env);
    if (v == "error") level = spdlog::level::err;
    else if (v == "info") level = spdlog::level::info;
    else if (v == "debug") level = spdlog::level::debug;
  }
  logger->set_level(level);
  return logger;
}

struct Data {
  EmbeddingSet set;
  std::optional<EmbeddingSet> base_queries;
  MemoryBank bank;
};

Data load_data(const RunConfig& cfg, spdlog::logger& log) {
  EmbeddingSet set = load_embeddings(cfg.embeddings);
  log.info("loaded {} records of dim {} over {} classes", set.size(), set.dim(), set.num_classes());
  std::optional<EmbeddingSet> base_queries;
  if (cfg.eval_embeddings) {
    base_queries = load_embeddings(*cfg.eval_embeddings);
  } else if (cfg.holdout_per_class > 0) {
    HoldoutSplit split = split_holdout(set, cfg.split.base_classes, cfg.holdout_per_class);
    set = std::move(split.train);
    base_queries = std::move(split.holdout);
  }
  MemoryBank bank = cfg.memory ? load_memory_bank(*cfg.memory)
                               : compute_memory_bank(set, cfg.split.base_classes);
  if (bank.dim() != set.dim()) throw ShapeError("memory bank dim does not match embeddings");
  return {std::move(set), std::move(base_queries), std::move(bank)};
}

std::pair<std::size_t, std::size_t> parse_span(const std::string& text) {
  const auto ids = parse_class_range(text);
  return {ids.front(), ids.back()};
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f || !(f << text)) throw FormatError("cannot write " + path.string());
}

int cmd_gen_data(const SyntheticConfig& sc, const std::string& out_path, std::ostream& out) {
  const EmbeddingSet set = generate_synthetic(sc);
  save_embeddings(set, out_path);
  out << "classes " << set.num_classes() << ", records " << set.size() << ", dim " << set.dim()
      << '\n';
  return kExitOk;
}

int cmd_train(const RunConfig& cfg, std::ostream& out, spdlog::logger& log) {
  const Data data = load_data(cfg, log);
  std::ofstream log_file(cfg.log, std::ios::binary);
  if (!log_file) throw FormatError("cannot write " + cfg.log.string());
  const std::size_t every = std::max<std::size_t>(1, cfg.train.episodes / 20);
  const TrainResult result =
      train(data.set, cfg.split, data.bank, cfg.train, [&](const EpisodeLog& entry) {
        log_file << to_json_line(entry) << '\n';
        if (entry.episode % every == 0) {
          log.info("episode {} lr {:.4g} loss {:.5f} (cls {:.5f}, neg {:.5f})", entry.episode,
                   entry.lr, entry.loss.total, entry.loss.l_cls, entry.loss.l_neg);
        }
      });
  log_file.close();
  if (!log_file) throw FormatError("cannot write " + cfg.log.string());
  save_checkpoint(result.params, cfg.checkpoint);
  const LossBreakdown last = result.log.empty() ? LossBreakdown{} : result.log.back().loss;
  out << "trained " << result.log.size() << " episodes, final loss " << last.total << '\n'
      << "checkpoint " << cfg.checkpoint.string() << '\n';
  return kExitOk;
}

struct EvalFlags {
  std::string sweep_openness;
  std::optional<std::size_t> sweep_memory;
  std::string csv;
};

int cmd_eval(const RunConfig& cfg, const EvalFlags& flags, std::ostream& out,
             spdlog::logger& log) {
  const TaneParams params = load_checkpoint(cfg.checkpoint);
  const Data data = load_data(cfg, log);
  if (params.shape().dim != data.set.dim()) {
    throw ShapeError("checkpoint dim " + std::to_string(params.shape().dim) +
                     " does not match embedding dim " + std::to_string(data.set.dim()));
  }
  const EvalOptions options = cfg.eval.options();
  const std::filesystem::path csv_path =
      flags.csv.empty() ? std::filesystem::path(cfg.report).replace_extension(".csv")
                         : std::filesystem::path(flags.csv);

  if (!flags.sweep_openness.empty()) {
    const auto [lo, hi] = parse_span(flags.sweep_openness);
    const auto points =
        sweep_openness(params, data.set, cfg.split, data.bank, cfg.task, lo, hi, options);
    std::ofstream f(csv_path, std::ios::binary);
    write_openness_csv(f, points);
    if (!f) throw FormatError("cannot write " + csv_path.string());
    out << "openness sweep " << points.size() << " points -> " << csv_path.string() << '\n';
    return kExitOk;
  }
  if (flags.sweep_memory) {
    const auto sizes = memory_sizes(data.bank.size(), *flags.sweep_memory);
    const auto points = sweep_memory(params, data.set, cfg.split, data.bank, cfg.task, sizes, options);
    std::ofstream f(csv_path, std::ios::binary);
    write_memory_csv(f, points);
    if (!f) throw FormatError("cannot write " + csv_path.string());
    out << "memory sweep " << points.size() << " points -> " << csv_path.string() << '\n';
    return kExitOk;
  }

  Evaluation result;
  if (cfg.eval.mode == TaskMode::Gfsor) {
    if (!data.base_queries) {
      throw InvalidConfig("gfsor evaluation needs eval_embeddings or holdout_per_class");
    }
    result = evaluate_gfsor(params, data.set, *data.base_queries, cfg.split, data.bank, cfg.task,
                            options);
  } else {
    result = evaluate_fsor(params, data.set, cfg.split, data.bank, cfg.task, options);
  }
  write_text_file(cfg.report, to_json(result.report).dump(2) + "\n");
  const std::string text = to_text(result.report);
  write_text_file(std::filesystem::path(cfg.report).replace_extension(".txt"), text);
  out << text;
  return kExitOk;
}

int cmd_grad_check(std::uint64_t seed, double tolerance, std::ostream& out) {
  GradientProbeConfig probe;
  probe.seed = seed;
  probe.check.tolerance = tolerance;
  const GradientProbeResult r = probe_gradients(probe);
  out << "parameters " << r.parameter_count << ", loss " << r.loss.total
      << ", max relative error " << r.report.max_relative_error << '\n';
  if (!r.report.passed) {
    out << "FAILED at " << r.worst_parameter << " (tolerance " << tolerance << ")\n";
    return kExitFailure;
  }
  out << "passed\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  auto logger = make_logger(err);

  CLI::App app{"Task-adaptive negative prototypes for few-shot open-set recognition", "tane"};
  app.require_subcommand(1);

  SyntheticConfig sc;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic Gaussian embedding file");
  gen->add_option("--classes", sc.num_classes)->check(CLI::PositiveNumber);
  gen->add_option("--per-class", sc.per_class)->check(CLI::PositiveNumber);
  gen->add_option("--dim", sc.dim)->check(CLI::PositiveNumber);
  gen->add_option("--separation", sc.separation)->check(CLI::NonNegativeNumber);
  gen->add_option("--sigma", sc.noise_sigma)->check(CLI::NonNegativeNumber);
  gen->add_option("--seed", sc.seed);
  gen->add_option("--out", gen_out, "Output embedding file")->required();

  std::string config_path;
  std::optional<std::size_t> episodes, tasks, threads;
  std::optional<double> lr, lambda;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> checkpoint, log_path, report_path, mode, objective, scores;
  bool exclude_conjugate = false;
  auto* tr = app.add_subcommand("train", "Meta-train on conjugate episodes");
  tr->add_option("--config", config_path)->required();
  tr->add_option("--episodes", episodes);
  tr->add_option("--lr", lr);
  tr->add_option("--lambda", lambda);
  tr->add_option("--seed", seed);
  tr->add_option("--mode", mode)->check(CLI::IsMember({"fsor", "gfsor"}));
  tr->add_option("--objective", objective)->check(CLI::IsMember({"tane", "no_negative"}));
  tr->add_option("--checkpoint", checkpoint);
  tr->add_option("--log", log_path);
  tr->add_flag("--exclude-conjugate", exclude_conjugate);

  EvalFlags eval_flags;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on held-out tasks");
  ev->add_option("--config", config_path)->required();
  ev->add_option("--checkpoint", checkpoint);
  ev->add_option("--report", report_path);
  ev->add_option("--tasks", tasks)->check(CLI::PositiveNumber);
  ev->add_option("--threads", threads)->check(CLI::PositiveNumber);
  ev->add_option("--seed", seed);
  ev->add_option("--mode", mode)->check(CLI::IsMember({"fsor", "gfsor"}));
  ev->add_option("--scores", scores, "Comma list of neg, diff, max");
  ev->add_option("--sweep-openness", eval_flags.sweep_openness, "Negative-way range lo:hi");
  ev->add_option("--sweep-memory", eval_flags.sweep_memory, "Largest memory size");
  ev->add_option("--csv", eval_flags.csv, "Sweep output path");

  std::uint64_t gc_seed = 0;
  double gc_tolerance = 1e-4;
  auto* gc = app.add_subcommand("grad-check", "Finite-difference check of the episode loss");
  gc->add_option("--seed", gc_seed);
  gc->add_option("--tolerance", gc_tolerance)->check(CLI::PositiveNumber);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return kExitUsage;
  }

  auto load_config = [&]() {
    RunConfig cfg = load_run_config(config_path);
    if (episodes) cfg.train.episodes = *episodes;
    if (lr) cfg.train.lr = *lr;
    if (lambda) cfg.train.lambda = *lambda;
    if (exclude_conjugate) cfg.train.exclude_conjugate_classes = true;
    if (objective) {
      cfg.train.objective = *objective == "tane" ? Objective::Tane : Objective::NoNegative;
    }
    if (checkpoint) cfg.checkpoint = *checkpoint;
    if (log_path) cfg.log = *log_path;
    if (report_path) cfg.report = *report_path;
    if (tasks) cfg.eval.num_tasks = *tasks;
    if (threads) cfg.eval.threads = *threads;
    if (scores) {
      cfg.eval.scores.clear();
      for (const auto& s : CLI::detail::split(*scores, ',')) {
        cfg.eval.scores.push_back(parse_score_kind(s));
      }
    }
    const TaskMode m = mode && *mode == "gfsor" ? TaskMode::Gfsor : TaskMode::Fsor;
    if (tr->parsed()) {
      if (seed) cfg.train.seed = *seed;
      if (mode) cfg.train.mode = m;
      cfg.train.validate();
    } else {
      if (seed) cfg.eval.seed = *seed;
      if (mode) cfg.eval.mode = m;
    }
    return cfg;
  };

  try {
    if (gen->parsed()) return cmd_gen_data(sc, gen_out, out);
    if (gc->parsed()) return cmd_grad_check(gc_seed, gc_tolerance, out);
    RunConfig cfg;
    try {
      cfg = load_config();
    } catch (const Error& e) {
      err << "error: " << e.what() << '\n';
      return kExitUsage;
    }
    if (tr->parsed()) return cmd_train(cfg, out, *logger);
    return cmd_eval(cfg, eval_flags, out, *logger);
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  } catch (const InvalidConfig& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace tane::cli
