#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "auecrl/checkpoint.hpp"
#include "auecrl/config.hpp"
#include "auecrl/errors.hpp"
#include "auecrl/gradient_suite.hpp"
#include "auecrl/knowledge.hpp"
#include "auecrl/losses.hpp"
#include "auecrl/synthdata.hpp"
#include "auecrl/training.hpp"

namespace auecrl::cli {

namespace {

namespace fs = std::filesystem;

struct CommonFlags {
  std::string config_path;
  std::string knowledge_path;
  std::string data_path;
  std::string out;
  std::optional<std::int64_t> seed;
};

// Config/knowledge inputs are configuration: their parse and validation
// problems surface as ConfigError so the exit-code contract stays stable.
KnowledgeBase load_kb_checked(const std::string& path) {
  try {
    return path.empty() ? KnowledgeBase::builtin_default() : load_knowledge(path);
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
}

RunConfig resolve_config(const CommonFlags& flags) {
  RunConfig cfg;
  if (!flags.config_path.empty()) {
    try {
      cfg = load_run_config(flags.config_path);
    } catch (const ParseError& e) {
      throw ConfigError(e.what());
    }
  }
  if (!flags.knowledge_path.empty()) cfg.knowledge_path = flags.knowledge_path;
  if (!flags.data_path.empty()) cfg.data_path = flags.data_path;
  if (!flags.out.empty()) cfg.output_dir = flags.out;
  if (flags.seed) cfg.seed = static_cast<std::uint64_t>(*flags.seed);
  return cfg;
}

struct RunSetup {
  RunConfig cfg;
  KnowledgeBase kb;
  PriorMatrix prior;
  TrainContext ctx;
};

RunSetup prepare_run(const CommonFlags& flags) {
  RunSetup setup{resolve_config(flags), KnowledgeBase::builtin_default(), {}, {}};
  setup.kb = load_kb_checked(setup.cfg.knowledge_path);
  setup.cfg.validate_against(setup.kb);
  try {
    setup.prior = prior_matrix(setup.kb, setup.cfg.effective_levels(setup.kb));
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  setup.ctx.prior = setup.prior.values;
  auto [pos, neg] = pair_sets(setup.kb);
  setup.ctx.positive_pairs = std::move(pos);
  setup.ctx.negative_pairs = std::move(neg);
  setup.ctx.lambda = setup.cfg.lambda;
  setup.ctx.alpha = setup.cfg.alpha;
  return setup;
}

std::string format_g(double v, int precision = 12) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

void write_loss_csv(const std::string& path,
                    const std::vector<std::pair<int, LossHistory>>& stages) {
  std::ofstream out(path);
  if (!out) throw IOError("cannot open '" + path + "' for writing");
  out << "stage,epoch,loss,l_c,l_p,l_n,l_au\n";
  for (const auto& [stage, history] : stages) {
    for (size_t epoch = 0; epoch < history.size(); ++epoch) {
      const EpochStats& s = history[epoch];
      out << stage << ',' << epoch + 1 << ',' << format_g(s.loss) << ','
          << format_g(s.l_c) << ',' << format_g(s.l_p) << ',' << format_g(s.l_n) << ','
          << format_g(s.l_au) << "\n";
    }
  }
  if (!out) throw IOError("write failed for '" + path + "'");
}

Dataset load_data_checked(const std::string& path) {
  if (path.empty()) throw ConfigError("no dataset given; pass --data or set it in the config");
  return read_dataset(path);
}

// --- gen-data ----------------------------------------------------------------

struct GenDataArgs {
  CommonFlags common;
  std::int64_t n = 2000;
  int dim = 32;
  double mu = 0.5;
  double sigma = 0.05;
};

int cmd_gen_data(const GenDataArgs& args) {
  RunConfig cfg = resolve_config(args.common);
  KnowledgeBase kb = load_kb_checked(cfg.knowledge_path);
  PriorMatrix prior = prior_matrix(kb, cfg.effective_levels(kb));

  GenConfig gen;
  gen.n_samples = args.n;
  gen.input_dim = args.dim;
  gen.num_expressions = kb.num_expressions();
  gen.num_aus = kb.num_aus();
  gen.signal_strength = args.mu;
  gen.noise_std = args.sigma;
  gen.seed = cfg.seed;

  Dataset data = generate(gen, kb, prior);
  write_dataset(data, args.common.out);

  std::vector<std::int64_t> histogram(static_cast<size_t>(kb.num_expressions()), 0);
  for (const SynthSample& s : data.samples) histogram[static_cast<size_t>(s.label)]++;
  std::cout << "wrote " << data.size() << " samples (dim=" << gen.input_dim
            << ", E=" << gen.num_expressions << ", A=" << gen.num_aus << ") to "
            << args.common.out << "\n";
  std::cout << "class histogram:";
  for (size_t e = 0; e < histogram.size(); ++e) {
    std::cout << ' ' << kb.expressions()[e] << '=' << histogram[e];
  }
  std::cout << "\n";
  return 0;
}

// --- train -------------------------------------------------------------------

struct TrainArgs {
  CommonFlags common;
  int stage = 0;  // 0 = all three stages
  std::string init_path;
};

int cmd_train(const TrainArgs& args) {
  RunSetup setup = prepare_run(args.common);
  Dataset data = load_data_checked(setup.cfg.data_path);

  fs::create_directories(setup.cfg.output_dir);
  const std::uint64_t hash = config_hash(setup.cfg.model);
  ModelState state(setup.cfg.model, setup.prior, setup.cfg.seed);

  int first_stage = 1, last_stage = 3;
  if (args.stage != 0) {
    if (args.stage < 1 || args.stage > 3) throw ConfigError("--stage must be 1, 2 or 3");
    first_stage = last_stage = args.stage;
    if (args.stage > 1) {
      std::string init = args.init_path;
      if (init.empty()) {
        init = (fs::path(setup.cfg.output_dir) /
                ("stage" + std::to_string(args.stage - 1) + ".ckpt")).string();
      }
      if (!fs::exists(init)) {
        throw ConfigError("stage " + std::to_string(args.stage) + " resumes from a stage " +
                          std::to_string(args.stage - 1) +
                          " checkpoint; none found at '" + init +
                          "' (train the earlier stages first or pass --init)");
      }
      CheckpointMeta meta = load_checkpoint(state, init);
      if (meta.stage != args.stage - 1) {
        throw ConfigError("checkpoint '" + init + "' is from stage " +
                          std::to_string(meta.stage) + ", expected stage " +
                          std::to_string(args.stage - 1));
      }
      if (meta.config_hash != hash) {
        throw ConfigError("checkpoint '" + init + "' was produced under a different model config");
      }
    } else if (!args.init_path.empty()) {
      throw ConfigError("--init is only meaningful with --stage 2 or 3");
    }
  }

  std::vector<std::pair<int, LossHistory>> all_history;
  for (int s = first_stage; s <= last_stage; ++s) {
    const auto start = std::chrono::steady_clock::now();
    LossHistory history = run_stage(setup.cfg.stage(s), state, data, setup.ctx, setup.cfg.seed);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const std::string ckpt =
        (fs::path(setup.cfg.output_dir) / ("stage" + std::to_string(s) + ".ckpt")).string();
    save_checkpoint(state, CheckpointMeta{1, s, hash}, ckpt);
    std::cout << "[stage " << s << "] epochs=" << history.size() << " objective "
              << format_g(history.front().loss, 6) << " -> "
              << format_g(history.back().loss, 6) << "  (" << format_g(secs, 3)
              << " s, " << ckpt << ")\n";
    all_history.emplace_back(s, std::move(history));
  }
  const std::string csv = (fs::path(setup.cfg.output_dir) / "loss.csv").string();
  write_loss_csv(csv, all_history);
  std::cout << "loss history written to " << csv << "\n";
  return 0;
}

// --- eval --------------------------------------------------------------------

struct EvalArgs {
  CommonFlags common;
  std::string ckpt;
  bool json = false;
};

nlohmann::json metrics_to_json(const Metrics& m, const KnowledgeBase& kb) {
  nlohmann::json j;
  j["schema"] = 1;
  j["n"] = m.n;
  j["average_acc"] = m.average_acc;
  j["overall_acc"] = m.overall_acc;
  nlohmann::json per;
  for (size_t e = 0; e < m.per_class_acc.size(); ++e) {
    if (m.per_class_acc[e]) per.push_back(*m.per_class_acc[e]);
    else per.push_back(nullptr);
  }
  j["per_class_acc"] = per;
  j["classes"] = kb.expressions();
  j["confusion"] = m.confusion;
  return j;
}

void print_metrics(const Metrics& m, const KnowledgeBase& kb) {
  std::cout << "per-class accuracy:\n";
  for (size_t e = 0; e < m.per_class_acc.size(); ++e) {
    std::cout << "  " << kb.expressions()[e] << ": ";
    if (m.per_class_acc[e]) std::cout << format_g(*m.per_class_acc[e], 4) << "%\n";
    else std::cout << "n/a\n";
  }
  std::cout << "average accuracy: " << format_g(m.average_acc, 4) << "%\n";
  std::cout << "overall accuracy: " << format_g(m.overall_acc, 4) << "%  (n=" << m.n << ")\n";
  std::cout << "confusion (rows = truth):\n";
  for (const auto& row : m.confusion) {
    std::cout << " ";
    for (std::int64_t v : row) std::cout << ' ' << v;
    std::cout << "\n";
  }
}

int cmd_eval(const EvalArgs& args) {
  RunSetup setup = prepare_run(args.common);
  Dataset data = load_data_checked(setup.cfg.data_path);
  ModelState state(setup.cfg.model, setup.prior, setup.cfg.seed);
  load_checkpoint(state, args.ckpt);
  Metrics m = evaluate(state, data);
  if (args.json) {
    std::cout << metrics_to_json(m, setup.kb).dump(2) << "\n";
  } else {
    print_metrics(m, setup.kb);
  }
  return 0;
}

// --- gradcheck ---------------------------------------------------------------

struct GradcheckArgs {
  CommonFlags common;
  double tol = 1e-4;  // realistic floor is ~1e-7 with h=1e-5 central differences
  double step = 1e-5;
  int instances = 20;
  std::vector<std::string> ops;
};

int cmd_gradcheck(const GradcheckArgs& args) {
  GradientSuiteOptions options;
  options.tolerance = args.tol;
  options.step = args.step;
  options.instances = args.instances;
  options.ops = args.ops;
  if (args.common.seed) options.seed = static_cast<std::uint64_t>(*args.common.seed);

  GradientSuiteResult result = run_gradient_suite(options);

  std::map<std::string, std::pair<int, double>> per_op;  // count, worst err
  for (const auto& item : result.items) {
    auto& agg = per_op[item.op];
    agg.first += 1;
    agg.second = std::max(agg.second, item.report.worst_err);
    if (!item.report.pass) {
      std::cout << "FAIL " << item.op << " instance " << item.instance << ": worst "
                << item.report.worst_param << " rel err " << format_g(item.report.worst_err, 4)
                << " (tol " << format_g(args.tol, 4) << ")\n";
    }
  }
  for (const auto& [op, agg] : per_op) {
    std::cout << (result.pass ? "ok   " : "     ") << op << ": " << agg.first
              << " checks, max rel err " << format_g(agg.second, 4) << "\n";
  }
  std::cout << (result.pass ? "PASS" : "FAIL") << " gradient suite in "
            << format_g(result.seconds, 3) << " s; worst " << result.worst_param
            << " rel err " << format_g(result.worst_err, 4) << "\n";
  return result.pass ? 0 : 5;
}

// --- inspect -----------------------------------------------------------------

struct InspectArgs {
  CommonFlags common;
  std::string ckpt;
  int topk = 3;
};

int cmd_inspect(const InspectArgs& args) {
  if (args.topk < 1) throw ConfigError("--topk must be positive");
  RunSetup setup = prepare_run(args.common);
  ModelState state(setup.cfg.model, setup.prior, setup.cfg.seed);
  load_checkpoint(state, args.ckpt);

  const KnowledgeBase& kb = setup.kb;
  const Tensor& w = state.w_ea().value;
  const int e_count = kb.num_expressions();
  const int a_count = kb.num_aus();

  std::cout << "W_EA (rows = expressions):\n";
  std::cout << "            ";
  for (int a = 0; a < a_count; ++a) std::printf(" %6s", kb.aus()[static_cast<size_t>(a)].id.c_str());
  std::cout << "\n";
  for (int e = 0; e < e_count; ++e) {
    std::printf("  %-10s", kb.expressions()[static_cast<size_t>(e)].c_str());
    for (int a = 0; a < a_count; ++a) std::printf(" %6.3f", w(e, a));
    std::cout << "\n";
  }

  double fro = 0.0;
  for (std::int64_t i = 0; i < w.size(); ++i) {
    const double d = w[i] - setup.prior.values[i];
    fro += d * d;
  }
  std::cout << "Frobenius distance to prior: " << format_g(std::sqrt(fro), 6) << "\n";

  std::cout << "top-" << args.topk << " AUs per expression (by W_EA):\n";
  for (int e = 0; e < e_count; ++e) {
    std::vector<int> order(static_cast<size_t>(a_count));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int lhs, int rhs) { return w(e, lhs) > w(e, rhs); });
    std::cout << "  " << kb.expressions()[static_cast<size_t>(e)] << ":";
    for (int k = 0; k < std::min(args.topk, a_count); ++k) {
      const int a = order[static_cast<size_t>(k)];
      std::cout << ' ' << kb.aus()[static_cast<size_t>(a)].id << '('
                << format_g(w(e, a), 3) << ')';
    }
    std::cout << "\n";
  }

  if (!setup.cfg.data_path.empty()) {
    Dataset data = load_data_checked(setup.cfg.data_path);
    Tensor mean_weight = Tensor::zeros({a_count});
    Tensor exist_rate = Tensor::zeros({a_count});
    for (const SynthSample& s : data.samples) {
      ForwardResult r = forward(s.x, state);
      for (int a = 0; a < a_count; ++a) {
        mean_weight(a) += r.attention.normalized(a);
        if (r.attention.logits(a) > 0.0) exist_rate(a) += 1.0;
      }
    }
    const double inv = 1.0 / static_cast<double>(data.size());
    std::cout << "per-AU attention over " << data.size() << " samples:\n";
    std::cout << "  AU      mean_weight  existence_rate\n";
    for (int a = 0; a < a_count; ++a) {
      std::printf("  %-6s  %11.4f  %14.4f\n", kb.aus()[static_cast<size_t>(a)].id.c_str(),
                  mean_weight(a) * inv, exist_rate(a) * inv);
    }
  }
  return 0;
}

void add_common(CLI::App* sub, CommonFlags& flags, bool with_data = true) {
  sub->add_option("--config", flags.config_path, "run config file (key = value lines)");
  sub->add_option("--knowledge", flags.knowledge_path,
                  "knowledge file (default: built-in 7x12 table)");
  if (with_data) sub->add_option("--data", flags.data_path, "dataset file");
  sub->add_option("--seed", flags.seed, "RNG seed (overrides config)");
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"desk-scale AU/expression knowledge-constrained training"};
  app.require_subcommand(1);

  GenDataArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen-data", "generate a planted synthetic dataset");
  add_common(gen_cmd, gen.common, false);
  gen_cmd->add_option("--n", gen.n, "number of samples");
  gen_cmd->add_option("--dim", gen.dim, "input dimension");
  gen_cmd->add_option("--mu", gen.mu, "AU signal strength");
  gen_cmd->add_option("--sigma", gen.sigma, "noise standard deviation");
  gen_cmd->add_option("--out", gen.common.out, "output dataset path")->required();

  TrainArgs train;
  CLI::App* train_cmd = app.add_subcommand("train", "run the three-stage training schedule");
  add_common(train_cmd, train.common);
  train_cmd->add_option("--out", train.common.out, "output directory (checkpoints + loss.csv)");
  train_cmd->add_option("--stage", train.stage, "run a single stage (1-3) instead of all");
  train_cmd->add_option("--init", train.init_path, "checkpoint to resume from (stages 2-3)");

  EvalArgs eval_args;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  add_common(eval_cmd, eval_args.common);
  eval_cmd->add_option("--ckpt", eval_args.ckpt, "checkpoint path")->required();
  eval_cmd->add_flag("--json", eval_args.json, "emit metrics as JSON (schema 1)");

  GradcheckArgs grad;
  CLI::App* grad_cmd = app.add_subcommand(
      "gradcheck", "verify analytic gradients against central finite differences");
  add_common(grad_cmd, grad.common, false);
  grad_cmd->add_option("--tol", grad.tol,
                       "max relative error (default 1e-4; the h=1e-5 central-difference "
                       "precision floor is around 1e-7)");
  grad_cmd->add_option("--step", grad.step, "finite-difference step");
  grad_cmd->add_option("--instances", grad.instances, "random instances per op");
  grad_cmd->add_option("--ops", grad.ops,
                       "subset of l_au,l_p,l_n,l_e,pipeline (default all)")
      ->delimiter(',');

  InspectArgs inspect;
  CLI::App* inspect_cmd =
      app.add_subcommand("inspect", "print W_EA, its prior distance and attention stats");
  add_common(inspect_cmd, inspect.common);
  inspect_cmd->add_option("--ckpt", inspect.ckpt, "checkpoint path")->required();
  inspect_cmd->add_option("--topk", inspect.topk, "AUs listed per expression");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen_data(gen);
    if (train_cmd->parsed()) return cmd_train(train);
    if (eval_cmd->parsed()) return cmd_eval(eval_args);
    if (grad_cmd->parsed()) return cmd_gradcheck(grad);
    if (inspect_cmd->parsed()) return cmd_inspect(inspect);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ShapeError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericsError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const IOError& e) {
    std::cerr << "file error: " << e.what() << "\n";
    return 3;
  } catch (const ParseError& e) {
    std::cerr << "file error: " << e.what() << "\n";
    return 3;
  } catch (const FormatError& e) {
    std::cerr << "file error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace auecrl::cli
