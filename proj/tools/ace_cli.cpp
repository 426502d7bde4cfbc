// ace: dataset generation, training, evaluation, gradient checks and
// benchmarks from the command line.
//
// Exit codes: 0 success, 1 a check failed (or training diverged), 2 usage or
// parameter error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ace/bench.hpp"
#include "ace/experiments.hpp"
#include "ace/gradcheck.hpp"
#include "ace/train.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

// Every option of a subcommand with its effective value.
json echo_flags(const CLI::App& cmd) {
  json flags = json::object();
  for (const CLI::Option* opt : cmd.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string name = "--" + opt->get_lnames().front();
    if (opt->count() > 0) {
      const auto& res = opt->results();
      flags[name] = res.size() == 1 ? json(res.front()) : json(res);
    } else if (!opt->get_default_str().empty()) {
      flags[name] = opt->get_default_str();
    }
  }
  return flags;
}

void print_header(const CLI::App& cmd) {
  std::cout << "# ace " << cmd.get_name() << ' ' << echo_flags(cmd).dump() << '\n';
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ace::IoError("cannot open '" + path + "' for writing");
  return out;
}

ace::Alphabet alphabet_for(std::size_t classes) {
  if (classes < 2) throw ace::InvalidInputError("--classes must be at least 2");
  return classes == 11 ? ace::Alphabet::digits() : ace::Alphabet::numbered(classes - 1);
}

std::vector<std::string> split_list(const std::string& raw) {
  std::vector<std::string> out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// gen-data ------------------------------------------------------------------

struct GenDataOpts {
  std::string task = "seq1d";
  std::string out;
  std::uint64_t seed = 1;
  std::size_t count = 2000;
  std::size_t classes = 11;
  std::size_t timesteps = 20;
  std::size_t min_len = 1;
  std::size_t max_len = 8;
  std::size_t height = 4;
  std::size_t width = 6;
  std::size_t min_objects = 0;
  std::size_t max_objects = 5;
  std::string layout = "random";
  double noise = 0.0;
  std::size_t feature_dim = 0;
  double shuffle = 0.0;
};

int run_gen_data(const GenDataOpts& o, const CLI::App& cmd) {
  const ace::Alphabet alphabet = alphabet_for(o.classes);
  const ace::TaskKind task = ace::parse_task_kind(o.task);
  ace::Dataset ds;
  if (task == ace::TaskKind::kSeq1d) {
    ds = ace::gen_sequences({o.seed, o.count, o.timesteps, o.min_len, o.max_len, o.noise,
                             o.feature_dim},
                            alphabet);
  } else {
    ds = ace::gen_grids({o.seed, o.count, o.height, o.width, o.min_objects, o.max_objects,
                         ace::parse_layout(o.layout), o.noise, o.feature_dim},
                        alphabet, task);
  }
  if (o.shuffle > 0.0) ds = ace::apply_shuffle(std::move(ds), {o.shuffle}, o.seed);
  ds.params["cli"] = echo_flags(cmd);
  ds.params["cli"].erase("--out");
  ace::write_dataset(o.out, ds);
  print_header(cmd);
  std::cout << "wrote " << ds.samples.size() << " samples to " << o.out << '\n';
  return kExitOk;
}

// loss ------------------------------------------------------------------------

struct LossOpts {
  std::string data;
  std::string model;
  std::string loss = "ace-ce";
  std::uint64_t seed = 1;
  std::size_t hidden = 0;
  bool per_sample = false;
};

ace::ToyModel model_for(const std::string& path, const ace::Dataset& data, std::size_t hidden,
                        std::uint64_t seed) {
  if (!path.empty()) return ace::load_model(path);
  return ace::ToyModel::random(data.feature_dim, data.alphabet.size(), hidden, seed);
}

int run_loss(const LossOpts& o, const CLI::App& cmd) {
  const ace::Dataset data = ace::read_dataset(o.data);
  const ace::ToyModel model = model_for(o.model, data, o.hidden, o.seed);
  const ace::LossVariant variant = ace::parse_loss_variant(o.loss);
  print_header(cmd);
  double total = 0.0;
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const ace::Sample& s = data.samples[i];
    const ace::ProbGrid probs = ace::softmax(ace::forward(model, s.features, s.grid));
    ace::Matrix grad(probs.timesteps(), probs.classes());
    const double l = ace::sample_loss(variant, probs, s, grad);
    total += l;
    if (o.per_sample) std::cout << json{{"index", i}, {"loss", l}}.dump() << '\n';
  }
  const double mean = data.samples.empty() ? 0.0 : total / static_cast<double>(data.samples.size());
  std::cout << json{{"loss", o.loss}, {"samples", data.samples.size()}, {"mean", mean}}.dump()
            << '\n';
  return kExitOk;
}

// grad-check ------------------------------------------------------------------

struct GradCheckOpts {
  std::string loss = "ace-ce";
  std::size_t trials = 200;
  double tol = 1e-6;
  double tiny = 1e-8;
  std::uint64_t seed = 1;
  std::size_t t_max = 30;
  std::size_t k_max = 100;
  double perturb = 0.0;
};

int run_grad_check(const GradCheckOpts& o, const CLI::App& cmd) {
  ace::gradcheck::CheckOptions opt;
  opt.trials = o.trials;
  opt.tol = {o.tol, o.tiny};
  opt.seed = o.seed;
  opt.t_max = o.t_max;
  opt.k_max = o.k_max;
  opt.perturb = o.perturb;
  if (opt.t_max < 1 || opt.k_max < 2) throw ace::InvalidInputError("need --t-max >= 1, --k-max >= 2");
  const auto variant = ace::parse_loss_variant(o.loss);
  const auto r = ace::gradcheck::run_grad_check(variant, opt);
  print_header(cmd);
  json report = {{"loss", ace::to_string(r.loss)},
                 {"trials", r.trials},
                 {"failed_trials", r.failed_trials},
                 {"max_rel_error", r.max_rel_error},
                 {"max_abs_tiny", r.max_abs_tiny},
                 {"passed", r.passed}};
  if (variant == ace::LossVariant::kCtc) {
    report["oracle"] = {{"cases", r.oracle_cases},
                        {"max_abs_diff", r.oracle_max_diff},
                        {"passed", r.oracle_passed}};
  }
  std::cout << report.dump(2) << '\n';
  return r.passed ? kExitOk : kExitCheckFailed;
}

// train / eval ------------------------------------------------------------------

struct TrainOpts {
  std::string data;
  std::string test;
  std::string loss = "ace-ce";
  double lr = 0.0;
  int epochs = 30;
  std::size_t batch = 16;
  std::uint64_t seed = 1;
  int eval_every = 1;
  std::size_t hidden = 0;
  std::string model_out;
  std::string log_out;
};

int run_train(const TrainOpts& o, const CLI::App& cmd) {
  const ace::Dataset data = ace::read_dataset(o.data);
  std::unique_ptr<ace::Dataset> test;
  if (!o.test.empty()) test = std::make_unique<ace::Dataset>(ace::read_dataset(o.test));

  ace::TrainConfig cfg;
  cfg.loss = ace::parse_loss_variant(o.loss);
  cfg.learning_rate = o.lr > 0.0 ? o.lr : ace::default_learning_rate(cfg.loss);
  cfg.epochs = o.epochs;
  cfg.batch_size = o.batch;
  cfg.seed = o.seed;
  cfg.eval_every = o.eval_every;
  cfg.validate();

  const auto init =
      ace::ToyModel::random(data.feature_dim, data.alphabet.size(), o.hidden, o.seed);
  print_header(cmd);
  const ace::TrainResult result = ace::train(cfg, data, init, test.get());
  if (!o.log_out.empty()) {
    auto out = open_out(o.log_out);
    ace::write_metrics_log(out, result.log);
  }
  ace::write_metrics_log(std::cout, result.log);
  if (!o.model_out.empty()) ace::save_model(o.model_out, result.model);
  return kExitOk;
}

struct EvalOpts {
  std::string model;
  std::string data;
  std::string loss = "ace-ce";
  std::uint64_t seed = 1;
  std::size_t threads = 0;
};

int run_eval(const EvalOpts& o, const CLI::App& cmd) {
  const ace::ToyModel model = ace::load_model(o.model);
  const ace::Dataset data = ace::read_dataset(o.data);
  const ace::EvalMetrics m = ace::evaluate(model, data, ace::parse_loss_variant(o.loss), o.threads);
  print_header(cmd);
  std::cout << json{{"loss", m.loss},
                    {"cer", m.cer},
                    {"seq_acc", m.seq_acc},
                    {"count_acc", m.count_acc},
                    {"m_rmse", m.counting.m_rmse},
                    {"m_rel_rmse", m.counting.m_rel_rmse}}
                   .dump()
            << '\n';
  return kExitOk;
}

// bench -------------------------------------------------------------------------

struct BenchOpts {
  ace::bench::BenchSpec spec;
  std::string csv;
};

int run_bench(const BenchOpts& o, const CLI::App& cmd) {
  const auto results = ace::bench::run_bench(o.spec);
  print_header(cmd);
  ace::bench::write_table(std::cout, results);
  if (!o.csv.empty()) {
    auto out = open_out(o.csv);
    ace::bench::write_csv(out, results);
  }
  return kExitOk;
}

// shuffle-exp -------------------------------------------------------------------

struct ShuffleOpts {
  std::string ratios = "0,0.25,0.5,0.75,1.0";
  std::string losses = "ace-ce,ctc";
  ace::experiments::ShuffleExpConfig cfg;
  std::string out;
};

int run_shuffle(ShuffleOpts o, const CLI::App& cmd) {
  o.cfg.ratios.clear();
  for (const auto& r : split_list(o.ratios)) {
    try {
      o.cfg.ratios.push_back(std::stod(r));
    } catch (const std::exception&) {
      throw ace::InvalidInputError("bad ratio '" + r + "'");
    }
  }
  o.cfg.losses.clear();
  for (const auto& l : split_list(o.losses)) o.cfg.losses.push_back(ace::parse_loss_variant(l));

  const auto result = ace::experiments::run_shuffle_experiment(o.cfg);
  print_header(cmd);
  ace::experiments::write_shuffle_table(std::cout, result);
  if (!o.out.empty()) {
    auto out = open_out(o.out);
    ace::experiments::write_shuffle_table(out, result);
  }
  std::cout << "# ace logs identical across ratios: "
            << (result.ace_logs_identical ? "yes" : "no") << '\n';
  if (result.ran_ctc) {
    std::cout << "# ctc mean cer: lowest ratio " << result.ctc_cer_low << ", highest ratio "
              << result.ctc_cer_high << '\n';
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Aggregation cross-entropy and CTC losses: data, training, checks, benchmarks"};
  app.require_subcommand(1);

  GenDataOpts gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen_cmd->add_option("--task", gen.task, "seq1d, grid2d or count")
      ->check(CLI::IsMember({"seq1d", "grid2d", "count"}))
      ->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output path (JSONL)")->required();
  gen_cmd->add_option("--seed", gen.seed)->capture_default_str();
  gen_cmd->add_option("--count", gen.count)->capture_default_str();
  gen_cmd->add_option("--classes", gen.classes, "Alphabet size including blank")
      ->capture_default_str();
  gen_cmd->add_option("--timesteps", gen.timesteps)->capture_default_str();
  gen_cmd->add_option("--min-len", gen.min_len)->capture_default_str();
  gen_cmd->add_option("--max-len", gen.max_len)->capture_default_str();
  gen_cmd->add_option("--height", gen.height)->capture_default_str();
  gen_cmd->add_option("--width", gen.width)->capture_default_str();
  gen_cmd->add_option("--min-objects", gen.min_objects)->capture_default_str();
  gen_cmd->add_option("--max-objects", gen.max_objects)->capture_default_str();
  gen_cmd->add_option("--layout", gen.layout)
      ->check(CLI::IsMember({"lines", "curve", "random"}))
      ->capture_default_str();
  gen_cmd->add_option("--noise", gen.noise, "Feature noise sigma")->capture_default_str();
  gen_cmd->add_option("--feature-dim", gen.feature_dim, "0 means one-hot, D = K")
      ->capture_default_str();
  gen_cmd->add_option("--shuffle", gen.shuffle, "Fraction of annotations to permute")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();

  LossOpts loss;
  auto* loss_cmd = app.add_subcommand("loss", "Evaluate a loss over a dataset");
  loss_cmd->add_option("--data", loss.data)->required();
  loss_cmd->add_option("--model", loss.model, "Checkpoint; random init when omitted");
  loss_cmd->add_option("--loss", loss.loss)->capture_default_str();
  loss_cmd->add_option("--seed", loss.seed)->capture_default_str();
  loss_cmd->add_option("--hidden", loss.hidden)->capture_default_str();
  loss_cmd->add_flag("--per-sample", loss.per_sample);

  GradCheckOpts gc;
  auto* gc_cmd = app.add_subcommand("grad-check", "Finite-difference gradient check");
  gc_cmd->add_option("--loss", gc.loss)->capture_default_str();
  gc_cmd->add_option("--trials", gc.trials)->capture_default_str();
  gc_cmd->add_option("--tol", gc.tol, "Max relative error")->capture_default_str();
  gc_cmd->add_option("--tiny", gc.tiny, "Absolute bound for tiny entries")->capture_default_str();
  gc_cmd->add_option("--seed", gc.seed)->capture_default_str();
  gc_cmd->add_option("--t-max", gc.t_max)->capture_default_str();
  gc_cmd->add_option("--k-max", gc.k_max)->capture_default_str();
  gc_cmd->add_option("--perturb", gc.perturb, "Offset added to one analytic entry per trial")
      ->capture_default_str();

  TrainOpts tr;
  auto* tr_cmd = app.add_subcommand("train", "Train the toy model with SGD");
  tr_cmd->add_option("--data", tr.data)->required();
  tr_cmd->add_option("--test", tr.test, "Evaluation set; the training set when omitted");
  tr_cmd->add_option("--loss", tr.loss)->capture_default_str();
  tr_cmd->add_option("--lr", tr.lr, "0 selects the per-loss default")->capture_default_str();
  tr_cmd->add_option("--epochs", tr.epochs)->capture_default_str();
  tr_cmd->add_option("--batch-size", tr.batch)->capture_default_str();
  tr_cmd->add_option("--seed", tr.seed)->capture_default_str();
  tr_cmd->add_option("--eval-every", tr.eval_every)->capture_default_str();
  tr_cmd->add_option("--hidden", tr.hidden)->capture_default_str();
  tr_cmd->add_option("--model-out", tr.model_out);
  tr_cmd->add_option("--log-out", tr.log_out);

  EvalOpts ev;
  auto* ev_cmd = app.add_subcommand("eval", "Evaluate a trained model");
  ev_cmd->add_option("--model", ev.model)->required();
  ev_cmd->add_option("--data", ev.data)->required();
  ev_cmd->add_option("--loss", ev.loss)->capture_default_str();
  ev_cmd->add_option("--seed", ev.seed)->capture_default_str();
  ev_cmd->add_option("--threads", ev.threads, "0 uses ACE_SEQ_THREADS / hardware")
      ->capture_default_str();

  BenchOpts bo;
  auto* bench_cmd = app.add_subcommand("bench", "Time ACE and CTC on identical inputs");
  bench_cmd->add_option("--timesteps", bo.spec.timesteps)->capture_default_str();
  bench_cmd->add_option("--classes", bo.spec.classes)->capture_default_str();
  bench_cmd->add_option("--batch", bo.spec.batch)->capture_default_str();
  bench_cmd->add_option("--repeats", bo.spec.repeats)->capture_default_str();
  bench_cmd->add_option("--seq-len", bo.spec.seq_len)->capture_default_str();
  bench_cmd->add_option("--warmup", bo.spec.warmup)->capture_default_str();
  bench_cmd->add_option("--seed", bo.spec.seed)->capture_default_str();
  bench_cmd->add_flag("--parallel", bo.spec.parallel);
  bench_cmd->add_option("--threads", bo.spec.threads)->capture_default_str();
  bench_cmd->add_option("--csv", bo.csv, "Also write CSV here");

  ShuffleOpts sh;
  auto* sh_cmd = app.add_subcommand("shuffle-exp", "Train under shuffled annotation order");
  sh_cmd->add_option("--ratios", sh.ratios)->capture_default_str();
  sh_cmd->add_option("--losses", sh.losses)->capture_default_str();
  sh_cmd->add_option("--seeds", sh.cfg.seeds, "Number of seeds")->capture_default_str();
  sh_cmd->add_option("--seed", sh.cfg.seed, "First seed")->capture_default_str();
  sh_cmd->add_option("--train-count", sh.cfg.train_count)->capture_default_str();
  sh_cmd->add_option("--test-count", sh.cfg.test_count)->capture_default_str();
  sh_cmd->add_option("--timesteps", sh.cfg.timesteps)->capture_default_str();
  sh_cmd->add_option("--max-len", sh.cfg.max_len)->capture_default_str();
  sh_cmd->add_option("--noise", sh.cfg.noise_sigma)->capture_default_str();
  sh_cmd->add_option("--epochs", sh.cfg.epochs)->capture_default_str();
  sh_cmd->add_option("--batch-size", sh.cfg.batch_size)->capture_default_str();
  sh_cmd->add_option("--out", sh.out, "Also write CSV here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*gen_cmd) return run_gen_data(gen, *gen_cmd);
    if (*loss_cmd) return run_loss(loss, *loss_cmd);
    if (*gc_cmd) return run_grad_check(gc, *gc_cmd);
    if (*tr_cmd) return run_train(tr, *tr_cmd);
    if (*ev_cmd) return run_eval(ev, *ev_cmd);
    if (*bench_cmd) return run_bench(bo, *bench_cmd);
    if (*sh_cmd) return run_shuffle(sh, *sh_cmd);
  } catch (const ace::TrainingFailure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitCheckFailed;
  } catch (const ace::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
