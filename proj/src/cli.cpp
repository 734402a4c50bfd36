#include "wqoe/cli.hpp"

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <algorithm>
#include <sstream>

#include <CLI11.hpp>

#include "wqoe/bench.hpp"
#include "wqoe/errors.hpp"
#include "wqoe/evaluate.hpp"
#include "wqoe/features.hpp"
#include "wqoe/model_io.hpp"
#include "wqoe/split.hpp"
#include "wqoe/stream.hpp"
#include "wqoe/synthetic.hpp"
#include "wqoe/train.hpp"

namespace wqoe {

namespace {

namespace fs = std::filesystem;

using KeyValues = std::vector<std::pair<std::string, std::string>>;

// Goes to stderr so stdout stays clean for piped output.
void print_resolved(const std::string& subcommand, const KeyValues& kv) {
  std::cerr << "resolved config [" << subcommand << "]\n";
  for (const auto& [k, v] : kv) std::cerr << "  " << k << " = " << v << "\n";
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

/// Merges a flat `key = value` config file (# comments) into the argument
/// list. Keys become --key=value entries; anything already given on the
/// command line wins. The --config option itself is consumed here.
std::vector<std::string> merge_config_args(std::vector<std::string> args) {
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) {
        throw CLI::ParseError("--config requires a file path", 105);
      }
      config_path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
                 args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (config_path.empty()) return args;

  std::ifstream in(config_path);
  if (!in) throw DataError("cannot open config file '" + config_path + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw DataError("config file '" + config_path + "': expected 'key = value' at line " +
                      std::to_string(lineno));
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) {
      throw DataError("config file '" + config_path + "': empty key at line " +
                      std::to_string(lineno));
    }
    const std::string flag = "--" + key;
    bool overridden = false;
    for (const std::string& a : args) {
      if (a == flag || a.rfind(flag + "=", 0) == 0) {
        overridden = true;
        break;
      }
    }
    if (!overridden) args.push_back(flag + "=" + value);
  }
  return args;
}

std::vector<const SessionTrace*> select_sessions(
    const std::vector<SessionTrace>& pool, const std::vector<std::string>& ids) {
  std::map<std::string, const SessionTrace*> by_id;
  for (const SessionTrace& s : pool) by_id[s.session_id] = &s;
  std::vector<const SessionTrace*> out;
  for (const std::string& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw DataError("unknown session id '" + id + "'");
    out.push_back(it->second);
  }
  return out;
}

struct TrainOptions {
  std::string traces;
  std::string protocol = "holdout";
  int test_count = 0;
  std::string model_kind = "wavenet";
  std::string model_out = "model.wqoe";
  std::string out_dir;
  std::string log_out;
  TrainConfig cfg;

  KeyValues resolved() const {
    return {{"traces", traces},
            {"protocol", protocol},
            {"test-count", std::to_string(test_count)},
            {"model-kind", model_kind},
            {"model-out", model_out},
            {"out-dir", out_dir},
            {"log-out", log_out},
            {"window", std::to_string(cfg.window_len)},
            {"batch", std::to_string(cfg.batch_size)},
            {"epochs", std::to_string(cfg.max_epochs)},
            {"lr", format_double(cfg.learning_rate)},
            {"patience", std::to_string(cfg.early_stop_patience)},
            {"seed", std::to_string(cfg.seed)},
            {"filter-size", std::to_string(cfg.wavenet.filter_size)},
            {"filters", std::to_string(cfg.wavenet.num_filters)},
            {"dilation", std::to_string(cfg.wavenet.dilation_base)},
            {"layers", std::to_string(cfg.wavenet.num_layers)},
            {"hidden", std::to_string(cfg.lstm.hidden_size)}};
  }
};

void add_train_options(CLI::App* cmd, TrainOptions& o) {
  cmd->add_option("--traces", o.traces, "Directory of trace CSV files")->required();
  cmd->add_option("--protocol", o.protocol,
                  "Split protocol: holdout, lfovia-loo, live-random80 or all")
      ->default_val(o.protocol);
  cmd->add_option("--test-count", o.test_count,
                  "Holdout test sessions (0: last 20% of sessions)")
      ->default_val(o.test_count);
  cmd->add_option("--model-kind", o.model_kind, "wavenet or lstm")
      ->default_val(o.model_kind);
  cmd->add_option("--window", o.cfg.window_len, "Training window length (timesteps)")
      ->default_val(o.cfg.window_len);
  cmd->add_option("--batch", o.cfg.batch_size, "Mini-batch size")
      ->default_val(o.cfg.batch_size);
  cmd->add_option("--epochs", o.cfg.max_epochs, "Maximum training epochs")
      ->default_val(o.cfg.max_epochs);
  cmd->add_option("--lr", o.cfg.learning_rate, "Adam learning rate")
      ->default_val(o.cfg.learning_rate);
  cmd->add_option("--patience", o.cfg.early_stop_patience,
                  "Early-stop patience (epochs without validation improvement)")
      ->default_val(o.cfg.early_stop_patience);
  cmd->add_option("--seed", o.cfg.seed, "Training seed")->default_val(o.cfg.seed);
  cmd->add_option("--filter-size", o.cfg.wavenet.filter_size, "Conv filter size k")
      ->default_val(o.cfg.wavenet.filter_size);
  cmd->add_option("--filters", o.cfg.wavenet.num_filters, "Channel width n")
      ->default_val(o.cfg.wavenet.num_filters);
  cmd->add_option("--dilation", o.cfg.wavenet.dilation_base, "Dilation base d")
      ->default_val(o.cfg.wavenet.dilation_base);
  cmd->add_option("--layers", o.cfg.wavenet.num_layers, "Conv layers L")
      ->default_val(o.cfg.wavenet.num_layers);
  cmd->add_option("--hidden", o.cfg.lstm.hidden_size, "LSTM hidden size")
      ->default_val(o.cfg.lstm.hidden_size);
}

int cmd_generate(std::uint64_t seed, int sessions, int duration, double stall,
                 const std::string& out_dir) {
  print_resolved("generate", {{"seed", std::to_string(seed)},
                              {"sessions", std::to_string(sessions)},
                              {"duration", std::to_string(duration)},
                              {"stall", format_double(stall)},
                              {"out", out_dir}});
  SyntheticConfig cfg{seed, sessions, duration, stall};
  const std::vector<SessionTrace> traces = generate_synthetic(cfg);
  fs::create_directories(out_dir);
  for (const SessionTrace& t : traces) {
    save_trace_csv(t, (fs::path(out_dir) / (t.session_id + ".csv")).string());
  }
  std::cout << "wrote " << traces.size() << " traces to " << out_dir << "\n";
  return 0;
}

int cmd_features(const std::string& trace_path, const std::string& out_path) {
  print_resolved("features", {{"trace", trace_path}, {"out", out_path}});
  const SessionTrace trace = load_trace_csv(trace_path);
  const FeatureMatrix fm = derive_features(trace);
  std::ofstream out(out_path);
  if (!out) throw DataError("cannot write '" + out_path + "'");
  out << "t,stsq,pi,nr,tr,qoe\n";
  for (std::size_t t = 0; t < fm.length(); ++t) {
    out << t << ',' << format_double(fm.values.at(kStsq, t)) << ','
        << static_cast<int>(fm.values.at(kPi, t)) << ','
        << format_double(fm.values.at(kNr, t)) << ','
        << format_double(fm.values.at(kTr, t)) << ',';
    if (trace.samples[t].qoe) out << format_double(*trace.samples[t].qoe);
    out << "\n";
  }
  std::cout << "wrote features for " << fm.length() << " samples to " << out_path << "\n";
  return 0;
}

int cmd_train(const TrainOptions& o) {
  print_resolved("train", o.resolved());
  const std::vector<SessionTrace> pool = load_trace_dir(o.traces);
  TrainConfig cfg = o.cfg;
  cfg.kind = parse_model_kind(o.model_kind);

  const KeyValues log_header = o.resolved();
  if (o.protocol == "all") {
    std::vector<const SessionTrace*> all;
    for (const SessionTrace& s : pool) all.push_back(&s);
    TrainResult r = train(all, cfg);
    save_model(r.model, o.model_out);
    if (!o.log_out.empty()) write_train_log_csv(r.log, o.log_out, log_header);
    std::cout << "trained on " << all.size() << " sessions (best epoch "
              << r.best_epoch << "), model written to " << o.model_out << "\n";
    return 0;
  }

  const SplitProtocol protocol = parse_protocol(o.protocol);
  const SplitPlan plan = build_split_plan(pool, protocol, cfg.seed, o.test_count);

  if (protocol == SplitProtocol::holdout) {
    // One shared training list; train a single model.
    TrainResult r = train(pool, plan.entries.front().train_sessions, cfg);
    save_model(r.model, o.model_out);
    if (!o.log_out.empty()) write_train_log_csv(r.log, o.log_out, log_header);
    std::cout << "trained on " << plan.entries.front().train_sessions.size()
              << " sessions, holding out " << plan.entries.size()
              << " test sessions (best epoch " << r.best_epoch
              << "); model written to " << o.model_out << "\n";
    return 0;
  }

  // Per-entry protocols train one model per test session.
  if (o.out_dir.empty()) {
    throw DataError("protocol '" + o.protocol + "' trains one model per test "
                    "session; pass --out-dir for the model files");
  }
  fs::create_directories(o.out_dir);
  for (const SplitEntry& entry : plan.entries) {
    TrainResult r = train(pool, entry.train_sessions, cfg);
    const fs::path base = fs::path(o.out_dir) / entry.test_session;
    save_model(r.model, base.string() + ".wqoe");
    write_train_log_csv(r.log, base.string() + ".log.csv", log_header);
    std::cout << "entry " << entry.test_session << ": trained on "
              << entry.train_sessions.size() << " sessions (best epoch "
              << r.best_epoch << ")\n";
  }
  std::cout << "wrote " << plan.entries.size() << " models to " << o.out_dir << "\n";
  return 0;
}

int cmd_eval(const std::string& traces, const std::string& protocol, int test_count,
             std::uint64_t seed, const std::string& model_path,
             const std::string& models_dir, const std::string& report_out,
             const std::string& pred_dir) {
  print_resolved("eval", {{"traces", traces},
                          {"protocol", protocol},
                          {"test-count", std::to_string(test_count)},
                          {"seed", std::to_string(seed)},
                          {"model", model_path},
                          {"models-dir", models_dir},
                          {"report-out", report_out},
                          {"pred-dir", pred_dir}});
  const std::vector<SessionTrace> pool = load_trace_dir(traces);
  const SplitPlan plan =
      build_split_plan(pool, parse_protocol(protocol), seed, test_count);

  EvalReport report;
  std::map<std::string, Model> per_entry;
  std::optional<Model> shared;
  if (!models_dir.empty()) {
    for (const SplitEntry& e : plan.entries) {
      const fs::path p = fs::path(models_dir) / (e.test_session + ".wqoe");
      per_entry.emplace(e.test_session, load_model(p.string()));
    }
    report = evaluate(
        [&per_entry](const std::string& id) -> Model& { return per_entry.at(id); },
        plan, pool);
  } else if (!model_path.empty()) {
    shared = load_model(model_path);
    report = evaluate(*shared, plan, pool);
  } else {
    throw DataError("eval: pass --model or --models-dir");
  }

  if (!report_out.empty()) {
    write_eval_report_csv(report, report_out,
                          {{"traces", traces},
                           {"protocol", protocol},
                           {"test-count", std::to_string(test_count)},
                           {"seed", std::to_string(seed)},
                           {"model", model_path.empty() ? models_dir : model_path}});
  }
  if (!pred_dir.empty()) {
    fs::create_directories(pred_dir);
    std::map<std::string, const SessionTrace*> by_id;
    for (const SessionTrace& s : pool) by_id[s.session_id] = &s;
    for (const SplitEntry& e : plan.entries) {
      const SessionTrace* t = by_id.at(e.test_session);
      if (!t->labeled()) continue;
      Model& m = per_entry.empty() ? *shared : per_entry.at(e.test_session);
      write_predictions_csv(m, *t,
                            (fs::path(pred_dir) / (e.test_session + ".pred.csv")).string());
    }
  }
  std::cout << render_eval_table(report);
  return 0;
}

int cmd_predict(const std::string& model_path, const std::string& trace_path,
                const std::string& out_path, bool stream) {
  print_resolved("predict", {{"model", model_path},
                             {"trace", trace_path},
                             {"out", out_path},
                             {"stream", stream ? "true" : "false"}});
  Model model = load_model(model_path);
  if (stream) {
    StreamState state(model);
    std::string line;
    std::cout << "t,qoe_pred,warmup\n";
    int t = 0;
    while (std::getline(std::cin, line)) {
      if (line.empty()) continue;
      const std::size_t comma = line.find(',');
      if (comma == std::string::npos) {
        throw DataError("stream input: expected 'stsq,pi' at line " +
                        std::to_string(t + 1));
      }
      double stsq;
      int pi;
      try {
        stsq = std::stod(line.substr(0, comma));
        pi = std::stoi(line.substr(comma + 1));
      } catch (const std::exception&) {
        throw DataError("stream input: bad 'stsq,pi' pair at line " +
                        std::to_string(t + 1));
      }
      const StreamState::Output out = push_sample(state, stsq, pi, model);
      // One line per second, flushed so downstream consumers see it live.
      std::cout << t << ',' << format_double(out.qoe_pred) << ','
                << (out.warmup ? 1 : 0) << std::endl;
      ++t;
    }
    return 0;
  }
  const SessionTrace trace = load_trace_csv(trace_path);
  write_predictions_csv(model, trace, out_path);
  std::cout << "wrote " << trace.length() << " predictions to " << out_path << "\n";
  return 0;
}

int cmd_bench(const std::string& traces, int epochs, int inference_n,
              std::uint64_t seed, const std::string& out_path,
              TrainOptions& base) {
  print_resolved("bench", {{"traces", traces},
                           {"epochs", std::to_string(epochs)},
                           {"inference-n", std::to_string(inference_n)},
                           {"seed", std::to_string(seed)},
                           {"out", out_path}});
  const std::vector<SessionTrace> pool = load_trace_dir(traces);
  std::vector<const SessionTrace*> all;
  for (const SessionTrace& s : pool) all.push_back(&s);
  TrainConfig cfg = base.cfg;
  cfg.seed = seed;
  BenchReport report = bench_training(all, cfg, epochs);

  Model wn, lstm;
  {
    TrainConfig c = cfg;
    c.kind = ModelKind::wavenet;
    c.max_epochs = 1;
    c.early_stop_patience = 2;
    wn = train(all, c).model;
    c.kind = ModelKind::lstm;
    lstm = train(all, c).model;
  }
  bench_inference(wn, lstm, inference_n, seed, report);

  if (!out_path.empty()) {
    write_bench_csv(report, out_path,
                    {{"traces", traces},
                     {"epochs", std::to_string(epochs)},
                     {"inference-n", std::to_string(inference_n)},
                     {"seed", std::to_string(seed)}});
  }
  std::cout << render_bench_markdown(report);
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Continuous per-second QoE prediction for video streaming:\n"
               "a dilated causal convolutional predictor with an LSTM baseline,\n"
               "synthetic data tooling, training, evaluation and benchmarks."};
  app.name("wqoe");
  app.require_subcommand(1);

  // generate
  std::uint64_t gen_seed = 42;
  int gen_sessions = 10;
  int gen_duration = 120;
  double gen_stall = 0.3;
  std::string gen_out;
  CLI::App* gen = app.add_subcommand("generate", "Write synthetic playback traces");
  gen->add_option("--seed", gen_seed, "Generator seed")->default_val(gen_seed);
  gen->add_option("--sessions", gen_sessions, "Number of sessions")
      ->default_val(gen_sessions);
  gen->add_option("--duration", gen_duration, "Session length in seconds (>= 30)")
      ->default_val(gen_duration);
  gen->add_option("--stall", gen_stall, "Rebuffering intensity in [0, 1]")
      ->default_val(gen_stall);
  gen->add_option("--out", gen_out, "Output directory")->required();

  // features
  std::string feat_trace, feat_out;
  CLI::App* feat = app.add_subcommand("features", "Derive model inputs from a trace");
  feat->add_option("--trace", feat_trace, "Trace CSV file")->required();
  feat->add_option("--out", feat_out, "Output CSV file")->required();

  // train
  TrainOptions train_opts;
  CLI::App* tr = app.add_subcommand("train", "Train a QoE predictor");
  add_train_options(tr, train_opts);
  tr->add_option("--model-out", train_opts.model_out,
                 "Model file (holdout/all protocols)")
      ->default_val(train_opts.model_out);
  tr->add_option("--out-dir", train_opts.out_dir,
                 "Model directory (per-entry protocols)");
  tr->add_option("--log-out", train_opts.log_out, "Training log CSV");

  // predict
  std::string pred_model, pred_trace, pred_out = "predictions.csv";
  bool pred_stream = false;
  CLI::App* pred = app.add_subcommand("predict", "Predict QoE for a trace");
  pred->add_option("--model", pred_model, "Model file")->required();
  pred->add_option("--trace", pred_trace, "Trace CSV (batch mode)");
  pred->add_option("--out", pred_out, "Prediction CSV (batch mode)")
      ->default_val(pred_out);
  pred->add_flag("--stream", pred_stream,
                 "Read stsq,pi lines from stdin, write t,qoe_pred,warmup");

  // eval
  std::string eval_traces, eval_protocol = "holdout", eval_model, eval_models_dir;
  std::string eval_report = "eval_report.csv", eval_pred_dir;
  int eval_test_count = 0;
  std::uint64_t eval_seed = 42;
  CLI::App* ev = app.add_subcommand("eval", "Evaluate a model over a split plan");
  ev->add_option("--traces", eval_traces, "Directory of trace CSV files")->required();
  ev->add_option("--protocol", eval_protocol,
                 "holdout, lfovia-loo or live-random80")
      ->default_val(eval_protocol);
  ev->add_option("--test-count", eval_test_count,
                 "Holdout test sessions (0: last 20%)")
      ->default_val(eval_test_count);
  ev->add_option("--seed", eval_seed, "Plan seed (live-random80)")
      ->default_val(eval_seed);
  ev->add_option("--model", eval_model, "Shared model file");
  ev->add_option("--models-dir", eval_models_dir,
                 "Per-entry model directory (<test_session>.wqoe)");
  ev->add_option("--report-out", eval_report, "Report CSV path")
      ->default_val(eval_report);
  ev->add_option("--pred-dir", eval_pred_dir, "Per-session prediction CSV directory");

  // bench
  TrainOptions bench_base;
  std::string bench_traces, bench_out = "bench_report.csv";
  int bench_epochs = 5, bench_n = 2000;
  std::uint64_t bench_seed = 42;
  CLI::App* be = app.add_subcommand(
      "bench", "Measure per-epoch training time and per-prediction latency");
  be->add_option("--traces", bench_traces, "Directory of trace CSV files")->required();
  be->add_option("--epochs", bench_epochs, "Timed epochs per model (>= 5)")
      ->default_val(bench_epochs);
  be->add_option("--inference-n", bench_n, "Single predictions per model (>= 1000)")
      ->default_val(bench_n);
  be->add_option("--seed", bench_seed, "Seed")->default_val(bench_seed);
  be->add_option("--out", bench_out, "Report CSV path")->default_val(bench_out);
  be->add_option("--window", bench_base.cfg.window_len, "Training window length")
      ->default_val(bench_base.cfg.window_len);
  be->add_option("--batch", bench_base.cfg.batch_size, "Mini-batch size")
      ->default_val(bench_base.cfg.batch_size);

  // --config is handled by merge_config_args before CLI11 sees the
  // arguments; the bound string only keeps the flag in --help.
  std::string config_doc;
  for (CLI::App* sub : {gen, feat, tr, pred, ev, be}) {
    sub->add_option("--config", config_doc, "Read options from a key = value file");
  }

  try {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    args = merge_config_args(std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
    if (gen->parsed()) {
      return cmd_generate(gen_seed, gen_sessions, gen_duration, gen_stall, gen_out);
    }
    if (feat->parsed()) return cmd_features(feat_trace, feat_out);
    if (tr->parsed()) return cmd_train(train_opts);
    if (pred->parsed()) {
      if (!pred_stream && pred_trace.empty()) {
        throw DataError("predict: pass --trace or --stream");
      }
      return cmd_predict(pred_model, pred_trace, pred_out, pred_stream);
    }
    if (ev->parsed()) {
      return cmd_eval(eval_traces, eval_protocol, eval_test_count, eval_seed,
                      eval_model, eval_models_dir, eval_report, eval_pred_dir);
    }
    if (be->parsed()) {
      return cmd_bench(bench_traces, bench_epochs, bench_n, bench_seed, bench_out,
                       bench_base);
    }
    return 0;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // help/version exit 0, any usage problem exits 1
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace wqoe
