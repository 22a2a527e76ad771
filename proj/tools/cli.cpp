#include "cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>

#include "kws/arch.hpp"
#include "kws/checkpoint.hpp"
#include "kws/error.hpp"
#include "kws/evaluation.hpp"
#include "kws/wav.hpp"

namespace kws::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json metrics_json(const EpochMetrics& m) {
  return {{"epoch", m.epoch},
          {"train_loss", number(m.train_loss)},
          {"train_accuracy", number(m.train_accuracy)},
          {"validation_accuracy", number(m.validation_accuracy)},
          {"learning_rate", m.learning_rate},
          {"steps", m.steps}};
}

json config_json(const RunConfig& c) {
  const auto& t = c.train;
  const auto& a = c.augmentation;
  return {{"arch", c.arch},
          {"seed", c.seed},
          {"limit", c.limit},
          {"train",
           {{"lr0", t.lr0},
            {"lr_decay", t.lr_decay},
            {"momentum", t.momentum},
            {"weight_decay", t.weight_decay},
            {"batch_size", t.batch_size},
            {"epochs", t.epochs},
            {"plateau_patience", t.plateau_patience},
            {"plateau_min_delta", t.plateau_min_delta},
            {"lr_floor", t.lr_floor}}},
          {"augmentation",
           {{"noise_prob", a.noise_prob},
            {"shift_ms", a.shift_ms},
            {"cache_eviction_frac", a.cache_eviction_frac},
            {"silence_frac", a.silence_frac},
            {"unknown_frac", a.unknown_frac},
            {"noise_volume_max", a.noise_volume_max}}}};
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path.string());
  f << text;
}

fs::path data_root(const RunConfig& c) {
  if (c.data_root.empty()) throw ConfigError("no dataset root: pass --data or set KWS_DATA_ROOT");
  return c.data_root;
}

struct Data {
  ScanResult scan;
  SplitSet splits;
};

Data load_data(const RunConfig& c) {
  Data d;
  d.scan = scan_dataset(data_root(c));
  d.splits = compose_splits(d.scan.samples, c.augmentation, c.limit);
  return d;
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "validation") return Split::validation;
  if (s == "test") return Split::test;
  throw ConfigError("unknown split '" + s + "' (train, validation, test)");
}

// Builds the network a checkpoint describes; `arch` (if set) must agree.
Network network_from(const Checkpoint& ckpt, const std::string& arch) {
  if (!arch.empty() && arch != ckpt.arch) {
    throw MismatchError("checkpoint/arch mismatch: checkpoint holds " + ckpt.arch + ", --arch asked for " + arch);
  }
  Network net(arch_by_name(ckpt.arch), 0);
  apply_model(ckpt, net);
  return net;
}

std::string footprint_text(const ArchSpec& spec, const Footprint& fp, std::size_t frames, std::size_t coeffs) {
  std::ostringstream o;
  o << spec.name << " at " << frames << "x" << coeffs << "\n";
  o << std::left << std::setw(10) << "type" << std::right << std::setw(4) << "m" << std::setw(4) << "r"
    << std::setw(5) << "n" << std::setw(14) << "d_w" << std::setw(14) << "d_h" << std::setw(10) << "params"
    << std::setw(14) << "multiplies" << "\n";
  for (const auto& g : fp.groups()) {
    const std::string type = g.group.starts_with("res x") ? g.group : g.type;
    auto dim = [](std::size_t v) { return v ? std::to_string(v) : std::string("-"); };
    o << std::left << std::setw(10) << type << std::right << std::setw(4) << dim(g.m) << std::setw(4) << dim(g.r)
      << std::setw(5) << g.n << std::setw(14) << g.d_w << std::setw(14) << g.d_h << std::setw(10) << g.params
      << std::setw(14) << g.multiplies << "\n";
  }
  o << std::left << std::setw(10) << "total" << std::right << std::setw(79 - 10 - 24) << fp.n_params
    << std::setw(14) << fp.n_multiplies << "\n";
  return o.str();
}

json footprint_json(const ArchSpec& spec, const Footprint& fp, std::size_t frames, std::size_t coeffs) {
  json rows = json::array();
  for (const auto& g : fp.groups()) {
    rows.push_back({{"group", g.group},
                    {"type", g.type},
                    {"m", g.m},
                    {"r", g.r},
                    {"n", g.n},
                    {"d_w", g.d_w},
                    {"d_h", g.d_h},
                    {"params", g.params},
                    {"multiplies", g.multiplies}});
  }
  json layers = json::array();
  for (const auto& r : fp.rows) {
    layers.push_back({{"name", r.name},
                      {"type", layer_kind_name(r.kind)},
                      {"n", r.n},
                      {"d_w", r.dilation.width},
                      {"d_h", r.dilation.height},
                      {"positions", r.positions},
                      {"params", r.params},
                      {"multiplies", r.multiplies}});
  }
  const auto rf = receptive_field(spec);
  return {{"arch", spec.name},
          {"frames", frames},
          {"coeffs", coeffs},
          {"params", fp.n_params},
          {"multiplies", fp.n_multiplies},
          {"receptive_field", {{"frames", rf.height}, {"coeffs", rf.width}}},
          {"groups", rows},
          {"layers", layers}};
}

struct TrainOutcome {
  TrainResult result;
  double test_accuracy = std::nan("");
};

TrainOutcome train_run(const RunConfig& c, const fs::path& resume, std::ostream& err) {
  const ArchSpec spec = arch_by_name(c.arch);
  c.train.validate();
  c.augmentation.validate();
  const Data data = load_data(c);
  err << "data: " << data.splits.train.size() << " train, " << data.splits.validation.size() << " validation, "
      << data.splits.test.size() << " test, " << data.scan.noise.clips.size() << " noise clips\n";

  std::optional<Checkpoint> from;
  if (!resume.empty()) {
    from = load_checkpoint(resume);
    if (from->arch != spec.name) {
      throw MismatchError("checkpoint/arch mismatch: " + resume.string() + " holds " + from->arch);
    }
  }
  TrainConfig cfg = c.train;
  cfg.seed = c.seed;
  const DiskAudioSource source(data_root(c));
  TrainOutcome outcome;
  outcome.result = train(spec, data.splits, source, data.scan.noise, cfg, c.augmentation, from,
                         [&](const EpochMetrics& m) {
                           err << "epoch " << m.epoch << "/" << cfg.epochs << " loss " << m.train_loss << " train "
                               << m.train_accuracy << " val " << m.validation_accuracy << " lr " << m.learning_rate
                               << " steps " << m.steps << std::endl;
                         });

  // On resume an earlier best may still be the best.
  const fs::path best_path = c.out_dir / "best.ckpt";
  if (from && fs::exists(best_path)) {
    const Checkpoint previous = load_checkpoint(best_path);
    if (previous.arch == spec.name && previous.validation_accuracy >= outcome.result.best.validation_accuracy) {
      outcome.result.best = previous;
    }
  }
  if (!data.splits.test.empty()) {
    Network net = network_from(outcome.result.best, spec.name);
    const auto features = clean_features(data.splits.test, source, data.scan.noise);
    outcome.test_accuracy = accuracy(predict(net, features), labels_of(data.splits.test));
  }
  return outcome;
}

int cmd_train(const RunConfig& c, const fs::path& resume, std::ostream& out, std::ostream& err) {
  const TrainOutcome o = train_run(c, resume, err);
  fs::create_directories(c.out_dir);
  save_checkpoint(o.result.best, c.out_dir / "best.ckpt");
  save_checkpoint(o.result.last, c.out_dir / "last.ckpt");

  json epochs = json::array();
  for (const auto& m : o.result.epochs) epochs.push_back(metrics_json(m));
  const json metrics = {{"arch", c.arch}, {"seed", c.seed}, {"epochs", epochs}};
  write_text(c.out_dir / "metrics.json", metrics.dump(2) + "\n");

  const json meta = {{"command", "train"},
                     {"version", std::string(version_string())},
                     {"config", config_json(c)},
                     {"workers", 1},
                     {"bit_deterministic", true},
                     {"resumed_from", resume.empty() ? json(nullptr) : json(resume.string())},
                     {"best_epoch", o.result.best.epoch},
                     {"best_validation_accuracy", number(o.result.best.validation_accuracy)},
                     {"test_accuracy", number(o.test_accuracy)}};
  write_text(c.out_dir / "run.json", meta.dump(2) + "\n");

  out << json{{"checkpoint", (c.out_dir / "best.ckpt").string()},
              {"metrics", (c.out_dir / "metrics.json").string()},
              {"epochs", o.result.epochs.size()},
              {"best_epoch", o.result.best.epoch},
              {"best_validation_accuracy", number(o.result.best.validation_accuracy)},
              {"test_accuracy", number(o.test_accuracy)}}
             .dump(2)
      << "\n";
  return kOk;
}

struct EvalOptions {
  std::string split = "test";
  bool untrained = false;
  fs::path roc_csv;
  fs::path average_csv;
  double roc_step = 0.005;
};

int cmd_eval(const RunConfig& c, const EvalOptions& e, std::ostream& out, std::ostream& err) {
  std::optional<Network> net;
  if (e.untrained) {
    net.emplace(arch_by_name(c.arch), c.seed);
  } else {
    if (c.checkpoint.empty()) throw ConfigError("eval needs --checkpoint (or --untrained)");
    net.emplace(network_from(load_checkpoint(c.checkpoint), c.arch_explicit));
  }
  const Data data = load_data(c);
  const Split split = parse_split(e.split);
  const auto& samples = data.splits[split];
  if (samples.empty()) throw DataError(std::string(split_name(split)) + " split is empty");
  const DiskAudioSource source(data_root(c));
  const auto features = clean_features(samples, source, data.scan.noise);
  const EvalReport report = evaluate(predict(*net, features), labels_of(samples), e.roc_step);
  if (!e.roc_csv.empty()) {
    std::ostringstream csv;
    write_roc_csv(csv, report.roc);
    write_text(e.roc_csv, csv.str());
  }
  if (!e.average_csv.empty()) {
    std::ostringstream csv;
    write_average_csv(csv, report.roc);
    write_text(e.average_csv, csv.str());
  }
  for (const auto& k : report.roc.excluded) err << "roc: keyword '" << k << "' has no positives or negatives; excluded\n";
  out << report_json(report) << "\n";
  return kOk;
}

int cmd_footprint(const RunConfig& c, std::size_t frames, std::size_t coeffs, bool as_json, std::ostream& out) {
  const ArchSpec spec = arch_by_name(c.arch);
  const Footprint fp = footprint(spec, frames, coeffs);
  if (as_json) {
    out << footprint_json(spec, fp, frames, coeffs).dump(2) << "\n";
  } else {
    out << footprint_text(spec, fp, frames, coeffs);
  }
  return kOk;
}

int cmd_predict(const RunConfig& c, const fs::path& wav, std::ostream& out) {
  if (c.checkpoint.empty()) throw ConfigError("predict needs --checkpoint");
  Network net = network_from(load_checkpoint(c.checkpoint), c.arch_explicit);
  auto audio = read_wav(wav);
  if (audio.samples.empty()) throw DataError(wav.string() + ": no samples");
  const FeatureMatrix features = extract_mfcc(pad_or_clip(AudioBuffer{std::move(audio.samples), audio.sample_rate_hz}));
  const FeatureMatrix* batch[] = {&features};
  const Tensor p = net.forward(make_batch(batch), Mode::eval);
  const int label = predicted_class(p.data());
  json probs = json::object();
  for (int k = 0; k < LabelSpace::n_classes; ++k) probs[std::string(LabelSpace::class_name(k))] = p[static_cast<std::size_t>(k)];
  out << json{{"label", LabelSpace::class_name(label)}, {"index", label}, {"probabilities", probs}}.dump(2) << "\n";
  return kOk;
}

int cmd_manifest(const RunConfig& c, std::ostream& out) {
  const Data data = load_data(c);
  for (Split s : {Split::train, Split::validation, Split::test}) write_manifest(out, data.splits[s]);
  return kOk;
}

int cmd_trials(const RunConfig& c, const std::vector<std::uint64_t>& seeds, std::ostream& out, std::ostream& err) {
  if (seeds.size() < 2) throw ConfigError("trials needs at least two seeds");
  std::vector<double> accs;
  json runs = json::array();
  for (std::uint64_t seed : seeds) {
    RunConfig one = c;
    one.seed = seed;
    one.out_dir = c.out_dir / ("seed-" + std::to_string(seed));
    err << "trial seed " << seed << "\n";
    std::ostringstream discard;
    cmd_train(one, {}, discard, err);
    const json summary = json::parse(discard.str());
    const double acc = summary["test_accuracy"].is_null() ? std::nan("") : summary["test_accuracy"].get<double>();
    accs.push_back(100.0 * acc);
    runs.push_back({{"seed", seed}, {"test_accuracy", number(acc)}});
  }
  const auto ci = confidence_interval(accs);
  out << json{{"arch", c.arch}, {"runs", runs}, {"mean", number(ci.mean)}, {"half_width", number(ci.half_width)}}.dump(2)
      << "\n";
  return kOk;
}

int cmd_ci(const std::vector<double>& values, std::ostream& out) {
  const auto ci = confidence_interval(values);
  out << json{{"n", values.size()}, {"mean", ci.mean}, {"stddev", ci.stddev}, {"half_width", ci.half_width}}.dump(2)
      << "\n";
  return kOk;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> defaults_table() {
  const RunConfig c;
  auto num = [](double v) {
    std::ostringstream o;
    o << v;
    return o.str();
  };
  return {
      {"--arch", c.arch},
      {"--seed", std::to_string(c.seed)},
      {"--limit", std::to_string(c.limit)},
      {"--lr", num(c.train.lr0)},
      {"--lr-decay", num(c.train.lr_decay)},
      {"--momentum", num(c.train.momentum)},
      {"--weight-decay", num(c.train.weight_decay)},
      {"--batch-size", std::to_string(c.train.batch_size)},
      {"--epochs", std::to_string(c.train.epochs)},
      {"--patience", std::to_string(c.train.plateau_patience)},
      {"--min-delta", num(c.train.plateau_min_delta)},
      {"--lr-floor", num(c.train.lr_floor)},
      {"--noise-prob", num(c.augmentation.noise_prob)},
      {"--shift-ms", num(c.augmentation.shift_ms)},
      {"--eviction", num(c.augmentation.cache_eviction_frac)},
      {"--silence-frac", num(c.augmentation.silence_frac)},
      {"--unknown-frac", num(c.augmentation.unknown_frac)},
      {"--noise-volume", num(c.augmentation.noise_volume_max)},
  };
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig c;
  CLI::App app{"Residual keyword-spotting toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(version_string()));

  auto add_data = [&](CLI::App* sub) {
    sub->add_option("--data", c.data_root, "Speech Commands root")->envname("KWS_DATA_ROOT");
    sub->add_option("--limit", c.limit, "Keep at most N samples per split (0 = all)")->capture_default_str();
  };
  auto add_arch = [&](CLI::App* sub) { sub->add_option("--arch", c.arch, "Model variant")->capture_default_str(); };
  auto add_recipe = [&](CLI::App* sub) {
    auto& t = c.train;
    auto& a = c.augmentation;
    sub->add_option("--seed", c.seed)->capture_default_str();
    sub->add_option("--out", c.out_dir, "Output directory")->capture_default_str();
    sub->add_option("--lr", t.lr0)->capture_default_str();
    sub->add_option("--lr-decay", t.lr_decay)->capture_default_str();
    sub->add_option("--momentum", t.momentum)->capture_default_str();
    sub->add_option("--weight-decay", t.weight_decay)->capture_default_str();
    sub->add_option("--batch-size", t.batch_size)->capture_default_str();
    sub->add_option("--epochs", t.epochs)->capture_default_str();
    sub->add_option("--patience", t.plateau_patience)->capture_default_str();
    sub->add_option("--min-delta", t.plateau_min_delta)->capture_default_str();
    sub->add_option("--lr-floor", t.lr_floor)->capture_default_str();
    sub->add_option("--noise-prob", a.noise_prob)->capture_default_str();
    sub->add_option("--shift-ms", a.shift_ms)->capture_default_str();
    sub->add_option("--eviction", a.cache_eviction_frac)->capture_default_str();
    sub->add_option("--silence-frac", a.silence_frac)->capture_default_str();
    sub->add_option("--unknown-frac", a.unknown_frac)->capture_default_str();
    sub->add_option("--noise-volume", a.noise_volume_max)->capture_default_str();
  };

  auto* train_cmd = app.add_subcommand("train", "Train a model; writes best/last checkpoints and metrics");
  fs::path resume;
  add_arch(train_cmd);
  add_data(train_cmd);
  add_recipe(train_cmd);
  train_cmd->add_option("--resume", resume, "Continue from a checkpoint");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint; EvalReport JSON on stdout");
  EvalOptions eval;
  std::string eval_arch;
  eval_cmd->add_option("--checkpoint", c.checkpoint);
  eval_cmd->add_option("--arch", eval_arch, "Expected architecture (checked against the checkpoint)");
  eval_cmd->add_option("--seed", c.seed, "Init seed for --untrained")->capture_default_str();
  eval_cmd->add_flag("--untrained", eval.untrained, "Evaluate a freshly initialized --arch model");
  eval_cmd->add_option("--split", eval.split)->capture_default_str();
  eval_cmd->add_option("--roc-csv", eval.roc_csv, "Write per-keyword ROC points");
  eval_cmd->add_option("--average-csv", eval.average_csv, "Write the averaged ROC curve");
  eval_cmd->add_option("--roc-step", eval.roc_step)->capture_default_str();
  add_data(eval_cmd);

  auto* roc_cmd = app.add_subcommand("roc", "Write ROC plot data (roc.csv, roc_average.csv) to --out");
  std::string roc_arch;
  roc_cmd->add_option("--checkpoint", c.checkpoint)->required();
  roc_cmd->add_option("--arch", roc_arch);
  roc_cmd->add_option("--out", c.out_dir)->capture_default_str();
  roc_cmd->add_option("--split", eval.split)->capture_default_str();
  add_data(roc_cmd);

  auto* fp_cmd = app.add_subcommand("footprint", "Parameter and multiply table");
  std::size_t frames = 98, coeffs = 40;
  bool as_json = false;
  add_arch(fp_cmd);
  fp_cmd->add_option("--frames", frames)->capture_default_str();
  fp_cmd->add_option("--coeffs", coeffs)->capture_default_str();
  fp_cmd->add_flag("--json", as_json);

  auto* predict_cmd = app.add_subcommand("predict", "Classify one WAV file");
  fs::path wav;
  std::string predict_arch;
  predict_cmd->add_option("--checkpoint", c.checkpoint)->required();
  predict_cmd->add_option("--arch", predict_arch);
  predict_cmd->add_option("--wav", wav)->required();

  auto* manifest_cmd = app.add_subcommand("manifest", "Composed splits as JSON lines");
  add_data(manifest_cmd);

  auto* trials_cmd = app.add_subcommand("trials", "Train once per seed; mean and 95% CI of test accuracy");
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  add_arch(trials_cmd);
  add_data(trials_cmd);
  add_recipe(trials_cmd);
  trials_cmd->add_option("--seeds", seeds)->capture_default_str();

  auto* ci_cmd = app.add_subcommand("ci", "Mean and 95% CI of the given values");
  std::vector<double> values;
  ci_cmd->add_option("values", values)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(c, resume, out, err);
    if (eval_cmd->parsed()) {
      c.arch_explicit = eval_arch;
      if (eval.untrained && !eval_arch.empty()) c.arch = eval_arch;
      return cmd_eval(c, eval, out, err);
    }
    if (roc_cmd->parsed()) {
      c.arch_explicit = roc_arch;
      eval.roc_csv = c.out_dir / "roc.csv";
      eval.average_csv = c.out_dir / "roc_average.csv";
      std::ostringstream report;
      cmd_eval(c, eval, report, err);
      const json r = json::parse(report.str());
      out << json{{"roc_csv", eval.roc_csv.string()},
                  {"average_csv", eval.average_csv.string()},
                  {"average_auc", r["roc"]["average_auc"]},
                  {"excluded", r["roc"]["excluded"]}}
                 .dump(2)
          << "\n";
      return kOk;
    }
    if (fp_cmd->parsed()) return cmd_footprint(c, frames, coeffs, as_json, out);
    if (predict_cmd->parsed()) {
      c.arch_explicit = predict_arch;
      return cmd_predict(c, wav, out);
    }
    if (manifest_cmd->parsed()) return cmd_manifest(c, out);
    if (trials_cmd->parsed()) return cmd_trials(c, seeds, out, err);
    if (ci_cmd->parsed()) return cmd_ci(values, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const MismatchError& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << "\n";
    return kData;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}

}  // namespace kws::cli
