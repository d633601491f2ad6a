// SPDX-License-Identifier: Apache-2.0
//
// hnsa: command-line driver for corpus preparation, training and evaluation.
//
// Exit codes: 0 success, 1 runtime failure, 2 bad flags or invalid inputs.
#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hnsa/baselines.hpp"
#include "hnsa/checkpoint.hpp"
#include "hnsa/corpus.hpp"
#include "hnsa/embeddings.hpp"
#include "hnsa/error.hpp"
#include "hnsa/evaluator.hpp"
#include "hnsa/grad_check.hpp"
#include "hnsa/model.hpp"
#include "hnsa/rng.hpp"
#include "hnsa/trainer.hpp"
#include "json.hpp"
#include "run_manifest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace hnsa::cli {
namespace {

constexpr const char* kDataDirEnv = "HNSA_DATA_DIR";

// Relative input paths that do not exist under the working directory are
// looked up under $HNSA_DATA_DIR.
std::string resolve_input(const std::string& path) {
  const fs::path p(path);
  if (p.is_absolute() || fs::exists(p)) return path;
  if (const char* dir = std::getenv(kDataDirEnv); dir != nullptr && *dir != '\0') {
    const fs::path candidate = fs::path(dir) / p;
    if (fs::exists(candidate)) return candidate.string();
  }
  return path;
}

CLI::Option* input_file(CLI::App* app, const std::string& name, std::string& target,
                        const std::string& help) {
  return app->add_option(name, target, help)
      ->transform(CLI::Validator(
          [](std::string& s) {
            s = resolve_input(s);
            return std::string{};
          },
          "PATH"))
      ->check(CLI::ExistingFile);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

fs::path prepare_dir(const std::string& dir) {
  fs::create_directories(dir);
  return fs::path(dir);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json parse_json_file(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
}

// ---------------------------------------------------------------- settings

struct TrainSettings {
  TrainConfig train;
  ModelDims dims;
  bool attention = true;
  std::size_t min_count = 1;
  SplitOptions split;
};

template <typename T>
T get_field(const json& value, const std::string& key) {
  try {
    return value.get<T>();
  } catch (const json::exception&) {
    throw ValidationError("config field '" + key + "' has the wrong type");
  }
}

void apply_split_settings(const json& j, SplitOptions& opts) {
  if (!j.is_object()) throw ValidationError("config field 'split' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "seed") opts.seed = get_field<std::uint64_t>(value, key);
    else if (key == "min_dialogs") opts.min_dialogs = get_field<std::size_t>(value, key);
    else if (key == "test_fraction") opts.test_fraction = get_field<double>(value, key);
    else if (key == "dev_fraction") opts.dev_fraction = get_field<double>(value, key);
    else throw ValidationError("unknown split config field '" + key + "'");
  }
}

TrainSettings parse_train_settings(const json& j) {
  if (!j.is_object()) throw ValidationError("training config must be a JSON object");
  TrainSettings s;
  for (const auto& [key, value] : j.items()) {
    if (key == "lr0") s.train.lr0 = get_field<double>(value, key);
    else if (key == "max_epochs") s.train.max_epochs = get_field<std::size_t>(value, key);
    else if (key == "lr_halve_on_plateau") s.train.lr_halve_on_plateau = get_field<bool>(value, key);
    else if (key == "plateau_patience_epochs") s.train.plateau_patience_epochs = get_field<std::size_t>(value, key);
    else if (key == "min_lr") s.train.min_lr = get_field<double>(value, key);
    else if (key == "grad_clip_norm") s.train.grad_clip_norm = get_field<double>(value, key);
    else if (key == "seed") s.train.seed = get_field<std::uint64_t>(value, key);
    else if (key == "shuffle") s.train.shuffle = get_field<bool>(value, key);
    else if (key == "embed_dim") s.dims.embed_dim = get_field<std::size_t>(value, key);
    else if (key == "hidden_dim") s.dims.hidden_dim = get_field<std::size_t>(value, key);
    else if (key == "attention_dim") s.dims.attention_dim = get_field<std::size_t>(value, key);
    else if (key == "max_utterance_len") s.dims.max_utterance_len = get_field<std::size_t>(value, key);
    else if (key == "max_dialog_len") s.dims.max_dialog_len = get_field<std::size_t>(value, key);
    else if (key == "attention") s.attention = get_field<bool>(value, key);
    else if (key == "min_count") s.min_count = get_field<std::size_t>(value, key);
    else if (key == "split") apply_split_settings(value, s.split);
    else throw ValidationError("unknown config field '" + key + "'");
  }
  return s;
}

json to_json(const TrainSettings& s) {
  return {{"lr0", s.train.lr0},
          {"max_epochs", s.train.max_epochs},
          {"lr_halve_on_plateau", s.train.lr_halve_on_plateau},
          {"plateau_patience_epochs", s.train.plateau_patience_epochs},
          {"min_lr", s.train.min_lr},
          {"grad_clip_norm", s.train.grad_clip_norm},
          {"seed", s.train.seed},
          {"shuffle", s.train.shuffle},
          {"embed_dim", s.dims.embed_dim},
          {"hidden_dim", s.dims.hidden_dim},
          {"attention_dim", s.dims.attention_dim},
          {"max_utterance_len", s.dims.max_utterance_len},
          {"max_dialog_len", s.dims.max_dialog_len},
          {"attention", s.attention},
          {"min_count", s.min_count},
          {"split",
           {{"seed", s.split.seed},
            {"min_dialogs", s.split.min_dialogs},
            {"test_fraction", s.split.test_fraction},
            {"dev_fraction", s.split.dev_fraction}}}};
}

SynthSpec parse_synth_spec(const json& j) {
  if (!j.is_object()) throw ValidationError("synth spec must be a JSON object");
  SynthSpec s;
  for (const auto& [key, value] : j.items()) {
    if (key == "n_topics") s.n_topics = get_field<std::size_t>(value, key);
    else if (key == "dialogs_per_topic") s.dialogs_per_topic = get_field<std::size_t>(value, key);
    else if (key == "utterances_per_dialog") s.utterances_per_dialog = get_field<std::size_t>(value, key);
    else if (key == "utterance_len") s.utterance_len = get_field<std::size_t>(value, key);
    else if (key == "keyword_rate") s.keyword_rate = get_field<double>(value, key);
    else if (key == "vocab_size") s.vocab_size = get_field<std::size_t>(value, key);
    else if (key == "seed") s.seed = get_field<std::uint64_t>(value, key);
    else throw ValidationError("unknown synth spec field '" + key + "'");
  }
  return s;
}

json to_json(const SynthSpec& s) {
  return {{"n_topics", s.n_topics},
          {"dialogs_per_topic", s.dialogs_per_topic},
          {"utterances_per_dialog", s.utterances_per_dialog},
          {"utterance_len", s.utterance_len},
          {"keyword_rate", s.keyword_rate},
          {"vocab_size", s.vocab_size},
          {"seed", s.seed}};
}

// Chooses the dialogs an evaluation runs on: the whole corpus, or one part
// of a split manifest.
Corpus select_part(const Corpus& corpus, const std::string& split_path, const std::string& part,
                   RunManifest& manifest) {
  if (split_path.empty()) {
    if (part != "all") throw UsageError("--split-part " + part + " needs --split");
    return corpus;
  }
  manifest.add_input("split", split_path);
  const auto split = apply_split(corpus, load_split_manifest(split_path));
  if (part == "train") return split.train;
  if (part == "dev") return split.dev;
  if (part == "test") return split.test;
  std::vector<Dialog> all = split.train.dialogs();
  all.insert(all.end(), split.dev.dialogs().begin(), split.dev.dialogs().end());
  all.insert(all.end(), split.test.dialogs().begin(), split.test.dialogs().end());
  return Corpus(std::move(all));
}

// ---------------------------------------------------------------- commands

struct SplitArgs {
  std::string corpus;
  std::uint64_t seed = 0;
  std::size_t min_dialogs = 10;
  double test_frac = 0.1;
  double dev_frac = 0.05;
  std::string out;
};

int cmd_split(const SplitArgs& a) {
  RunManifest manifest("split");
  const SplitOptions opts{a.seed, a.min_dialogs, a.test_frac, a.dev_frac};
  manifest.set_config({{"seed", a.seed},
                       {"min_dialogs", a.min_dialogs},
                       {"test_fraction", a.test_frac},
                       {"dev_fraction", a.dev_frac}});
  manifest.add_seed("split", a.seed);
  manifest.add_input("corpus", a.corpus);
  const auto split = make_covering_split(load_corpus(a.corpus), opts);

  const fs::path dir = prepare_dir(a.out);
  save_split_manifest(manifest_of(split), dir / "split.json");
  const auto rows = corpus_stats(split);
  const auto table = format_stats_table(rows);
  write_text(dir / "stats.txt", table);
  std::cout << table;
  if (!split.removed_topics.empty()) {
    std::cout << "removed topics (< " << a.min_dialogs << " dialogs): " << split.removed_topics.size()
              << '\n';
  }
  manifest.add_artifact("split_manifest", dir / "split.json");
  manifest.add_artifact("stats", dir / "stats.txt");
  manifest.set_result({{"train", split.train.size()},
                       {"dev", split.dev.size()},
                       {"test", split.test.size()},
                       {"removed_topics", split.removed_topics}});
  manifest.write(dir / "run_manifest.json");
  return 0;
}

struct SynthArgs {
  std::string spec;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int cmd_synth(const SynthArgs& a) {
  RunManifest manifest("synth");
  SynthSpec spec;
  if (!a.spec.empty()) {
    manifest.add_input("spec", a.spec);
    spec = parse_synth_spec(parse_json_file(a.spec));
  }
  if (a.seed) spec.seed = *a.seed;
  manifest.set_config(to_json(spec));
  manifest.add_seed("synth", spec.seed);
  const Corpus corpus = synth_corpus(spec);
  const fs::path out(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_corpus(corpus, out);
  manifest.add_artifact("corpus", out);
  manifest.set_result({{"dialogs", corpus.size()}, {"topics", corpus.topic_set().size()}});
  manifest.write(out.string() + ".manifest.json");
  std::cout << "wrote " << corpus.size() << " dialogs over " << corpus.topic_set().size()
            << " topics to " << out.string() << '\n';
  return 0;
}

struct TrainArgs {
  std::string corpus;
  std::string split;
  std::string embeddings;
  std::string config;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  bool no_attention = false;
};

int cmd_train(const TrainArgs& a) {
  RunManifest manifest("train");
  TrainSettings s;
  if (!a.config.empty()) {
    manifest.add_input("config", a.config);
    s = parse_train_settings(parse_json_file(a.config));
  }
  if (a.seed) s.train.seed = *a.seed;
  if (a.epochs) s.train.max_epochs = *a.epochs;
  if (a.no_attention) s.attention = false;
  s.train.validate();

  manifest.add_input("corpus", a.corpus);
  const Corpus corpus = load_corpus(a.corpus);
  const fs::path dir = prepare_dir(a.out_dir);

  SplitCorpus split;
  if (!a.split.empty()) {
    manifest.add_input("split", a.split);
    const auto loaded = load_split_manifest(a.split);
    split = apply_split(corpus, loaded);
    s.split.seed = loaded.seed;
  } else {
    split = make_covering_split(corpus, s.split);
    save_split_manifest(manifest_of(split), dir / "split.json");
    manifest.add_artifact("split_manifest", dir / "split.json");
  }
  manifest.set_config(to_json(s));
  manifest.add_seed("root", s.train.seed);
  manifest.add_seed("split", s.split.seed);

  const Vocab vocab = build_vocab(split.train, s.min_count);
  std::optional<EmbeddingMatrix> embeddings;
  if (!a.embeddings.empty()) {
    manifest.add_input("embeddings", a.embeddings);
    embeddings = load_pretrained(a.embeddings, vocab, s.dims.embed_dim, s.train.seed);
  }
  const auto topics = split.train.topic_set();
  Model model{vocab, topics, s.dims,
              init_params(vocab, topics.size(), s.train.seed, s.dims, s.attention, embeddings)};
  spdlog::info("vocabulary {} tokens, {} topics, {}/{}/{} dialogs", vocab.size(), topics.size(),
               split.train.size(), split.dev.size(), split.test.size());

  const fs::path ckpt = dir / "model.ckpt";
  const auto result = train(model, split, s.train,
                            [&](const Model& best, const EpochRecord&, bool improved) {
                              if (improved) save_checkpoint(best, ckpt);
                              return true;
                            });
  write_text(dir / "history.csv", history_csv(result.history));
  manifest.add_artifact("checkpoint", ckpt);
  manifest.add_artifact("history", dir / "history.csv");
  manifest.set_result({{"epochs", result.history.epochs.size()},
                       {"best_epoch", result.history.best_epoch},
                       {"best_dev_acc", result.history.best_dev_acc},
                       {"skipped_steps", result.history.skipped_steps},
                       {"embedding_coverage", result.best.params.embeddings.coverage}});
  manifest.write(dir / "run_manifest.json");
  std::cout << "best epoch " << result.history.best_epoch << ", dev accuracy "
            << result.history.best_dev_acc << "%, checkpoint " << ckpt.string() << '\n';
  return 0;
}

struct EvalArgs {
  std::string model;
  std::string corpus;
  std::string split;
  std::string part = "all";
  std::string out_dir = ".";
  bool with_baselines = false;
};

int cmd_eval(const EvalArgs& a) {
  RunManifest manifest("eval");
  manifest.set_config({{"split_part", a.part}, {"with_baselines", a.with_baselines}});
  manifest.add_input("model", a.model);
  manifest.add_input("corpus", a.corpus);
  if (a.with_baselines && a.split.empty()) throw UsageError("--with-baselines needs --split");
  const Model model = load_checkpoint(a.model);
  const Corpus full = load_corpus(a.corpus);
  const Corpus corpus = select_part(full, a.split, a.part, manifest);

  const fs::path dir = prepare_dir(a.out_dir);
  const auto report = evaluate(model, corpus);
  write_text(dir / "eval_report.csv", report_csv(report));
  write_text(dir / "eval_summary.json", report_summary_json(report) + "\n");
  const auto matrix = confusion_from_report(report, model.topics);
  write_text(dir / "confusion.csv", confusion_csv(matrix, false));
  write_text(dir / "confusion_normalized.csv", confusion_csv(matrix, true));
  for (const char* name : {"eval_report.csv", "eval_summary.json", "confusion.csv",
                           "confusion_normalized.csv"}) {
    manifest.add_artifact(name, dir / name);
  }
  json result = json::parse(report_summary_json(report));

  if (a.with_baselines) {
    const auto split = apply_split(full, load_split_manifest(a.split));
    const auto bow = fit_bow_baseline(split.train, {});
    const auto bow_report = evaluate(bow, corpus);
    write_text(dir / "bow_report.csv", report_csv(bow_report));
    write_text(dir / "bow_summary.json", report_summary_json(bow_report) + "\n");
    const double majority = majority_baseline(split);
    write_text(dir / "majority_summary.json", json({{"accuracy", majority}}).dump() + "\n");
    manifest.add_artifact("bow_report.csv", dir / "bow_report.csv");
    manifest.add_artifact("bow_summary.json", dir / "bow_summary.json");
    manifest.add_artifact("majority_summary.json", dir / "majority_summary.json");
    result["bow_accuracy"] = bow_report.accuracy;
    result["majority_accuracy"] = majority;
  }
  manifest.set_result(result);
  manifest.write(dir / "run_manifest.json");
  std::cout << result.dump() << '\n';
  return 0;
}

struct OnlineArgs {
  std::string model;
  std::string corpus;
  std::string split;
  std::string part = "all";
  std::string out_dir = ".";
  std::vector<double> fractions = default_fractions();
};

int cmd_online(const OnlineArgs& a) {
  RunManifest manifest("online");
  manifest.set_config({{"split_part", a.part}, {"fractions", a.fractions}});
  manifest.add_input("model", a.model);
  manifest.add_input("corpus", a.corpus);
  const Model model = load_checkpoint(a.model);
  const Corpus corpus = select_part(load_corpus(a.corpus), a.split, a.part, manifest);
  const auto curve = online_eval(model, corpus, a.fractions);
  const fs::path dir = prepare_dir(a.out_dir);
  const auto csv = online_csv(curve);
  write_text(dir / "online.csv", csv);
  manifest.add_artifact("online.csv", dir / "online.csv");
  json points = json::array();
  for (const auto& p : curve.points) {
    points.push_back({{"fraction", p.fraction},
                      {"absolute_acc", p.absolute_accuracy},
                      {"relative_acc", std::isnan(p.relative_accuracy) ? json(nullptr)
                                                                       : json(p.relative_accuracy)}});
  }
  manifest.set_result({{"points", points}});
  manifest.write(dir / "run_manifest.json");
  std::cout << csv;
  return 0;
}

struct PredictArgs {
  std::string model;
  std::string out_dir = ".";
  bool attention = false;
};

int cmd_predict(const PredictArgs& a) {
  RunManifest manifest("predict");
  manifest.set_config({{"attention", a.attention}});
  manifest.add_input("model", a.model);
  const Model model = load_checkpoint(a.model);
  std::string line;
  std::size_t line_no = 0;
  std::size_t n = 0;
  while (std::getline(std::cin, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    // Unlabelled dialogs are accepted; a placeholder keeps the record valid.
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
    }
    const bool labelled = record.is_object() && record.contains("topic");
    if (record.is_object() && !labelled) record["topic"] = "?";
    const Dialog dialog = parse_dialog_line(record.dump(), line_no);
    const auto pred = predict(model, dialog);
    json probs = json::object();
    for (std::size_t t = 0; t < model.topics.size(); ++t) probs[model.topics[t]] = pred.probs[t];
    json out = {{"id", dialog.id},
                {"topic", model.topics[pred.label]},
                {"confidence", pred.confidence()},
                {"probs", probs}};
    if (labelled) out["gold"] = dialog.topic;
    if (a.attention) out["attention"] = pred.attention;
    std::cout << out.dump() << '\n' << std::flush;
    ++n;
  }
  manifest.set_result({{"dialogs", n}});
  manifest.write(prepare_dir(a.out_dir) / "run_manifest.json");
  return 0;
}

struct GradCheckArgs {
  std::string dims = "tiny";
  std::uint64_t seed = 0;
  std::size_t max_coords = 0;
  std::string out_dir = ".";
};

int cmd_gradcheck(const GradCheckArgs& a) {
  RunManifest manifest("gradcheck");
  ModelDims dims;
  std::size_t vocab_size = 20, topics = 3, utterances = 2, length = 3;
  if (a.dims == "tiny") {
    dims.embed_dim = 8;
    dims.hidden_dim = 4;
    dims.attention_dim = 4;
  } else {
    vocab_size = 50;
    topics = 5;
    utterances = 3;
    length = 5;
    dims.embed_dim = 16;
    dims.hidden_dim = 8;
    dims.attention_dim = 8;
  }
  manifest.set_config({{"dims", a.dims},
                       {"vocab_size", vocab_size},
                       {"n_topics", topics},
                       {"embed_dim", dims.embed_dim},
                       {"hidden_dim", dims.hidden_dim},
                       {"attention_dim", dims.attention_dim},
                       {"utterances", utterances},
                       {"utterance_len", length},
                       {"max_coords_per_tensor", a.max_coords}});
  manifest.add_seed("root", a.seed);

  std::vector<std::string> tokens;
  for (std::size_t i = 2; i < vocab_size; ++i) tokens.push_back("w" + std::to_string(i));
  const Vocab vocab = Vocab::from_tokens(tokens);
  ModelParams params = init_params(vocab, topics, a.seed, dims);
  Rng rng = substream(a.seed, "grad_check");
  EncodedDialog dialog;
  for (std::size_t u = 0; u < utterances; ++u) {
    std::vector<TokenId> ids(length);
    for (auto& id : ids) id = 1 + rng.below(vocab_size - 1);
    dialog.utterances.push_back(ids);
  }
  const std::size_t label = rng.below(topics);

  std::vector<ad::Tensor> tensors;
  for (auto& named : params.named_tensors()) tensors.push_back(named.tensor);
  ad::GradCheckOptions opts;
  opts.max_coords_per_tensor = a.max_coords;
  opts.seed = a.seed;
  const auto result = ad::grad_check(
      [&](ad::Tape& tape) { return dialog_loss(tape, params, dialog, label); }, tensors, opts);
  const auto names = params.named_tensors();
  const bool ok = result.max_rel_error < 1e-3;
  const json summary = {{"max_rel_err", result.max_rel_error},
                        {"coords_checked", result.coords_checked},
                        {"worst_tensor", names[result.worst_tensor].name},
                        {"worst_index", result.worst_index},
                        {"threshold", 1e-3},
                        {"passed", ok}};
  const fs::path dir = prepare_dir(a.out_dir);
  write_text(dir / "gradcheck.json", summary.dump(2) + "\n");
  manifest.add_artifact("gradcheck.json", dir / "gradcheck.json");
  manifest.set_result(summary);
  manifest.write(dir / "run_manifest.json");
  std::cout << "max_rel_err = " << result.max_rel_error << (ok ? " < " : " >= ") << "1e-3 over "
            << result.coords_checked << " coordinates (worst: " << names[result.worst_tensor].name
            << "[" << result.worst_index << "])\n";
  return ok ? 0 : 1;
}

// ---------------------------------------------------------------- main

int run(int argc, char** argv) {
  CLI::App app{"Hierarchical self-attention topic classifier for dialogs"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")
      ->capture_default_str()
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));
  app.footer(std::string("Relative input paths are also searched under $") + kDataDirEnv + ".");

  SplitArgs split_args;
  auto* split = app.add_subcommand("split", "Drop rare topics and write a covering train/dev/test split");
  input_file(split, "--corpus", split_args.corpus, "Corpus file (JSON lines)")->required();
  split->add_option("--seed", split_args.seed, "Shuffle seed")->capture_default_str();
  split->add_option("--min-dialogs", split_args.min_dialogs, "Drop topics with fewer dialogs")
      ->capture_default_str();
  split->add_option("--test-frac", split_args.test_frac, "Per-topic test fraction")->capture_default_str();
  split->add_option("--dev-frac", split_args.dev_frac, "Per-topic dev fraction")->capture_default_str();
  split->add_option("--out", split_args.out, "Output directory")->required();

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic keyword-planted corpus");
  input_file(synth, "--spec", synth_args.spec,
             "JSON generator spec (n_topics, dialogs_per_topic, utterances_per_dialog, "
             "utterance_len, keyword_rate, vocab_size, seed); defaults 8, 50, 8, 10, 0.3, 2000, 7");
  synth->add_option("--seed", synth_args.seed, "Overrides the seed given in --spec");
  synth->add_option("--out", synth_args.out, "Output corpus file")->required();

  TrainArgs train_args;
  auto* trainc = app.add_subcommand("train", "Train a model and write the best-dev checkpoint");
  input_file(trainc, "--corpus", train_args.corpus, "Corpus file")->required();
  input_file(trainc, "--split", train_args.split,
             "Split manifest; when omitted the split is built from the config's split settings");
  input_file(trainc, "--embeddings", train_args.embeddings,
             "Pretrained vectors, text or gzip (\"token v1 ... vd\" per line)");
  input_file(trainc, "--config", train_args.config,
             "JSON training config; keys: lr0 (0.001), max_epochs (30), lr_halve_on_plateau (true), "
             "plateau_patience_epochs (1), min_lr (1e-5), grad_clip_norm (5, 0 disables), seed (0), "
             "shuffle (true), embed_dim (300), hidden_dim (256), attention_dim (128), "
             "max_utterance_len (128), max_dialog_len (512), attention (true), min_count (1), "
             "split {seed, min_dialogs, test_fraction, dev_fraction}");
  trainc->add_option("--out-dir", train_args.out_dir, "Output directory")->required();
  trainc->add_option("--seed", train_args.seed, "Overrides the config seed");
  trainc->add_option("--epochs", train_args.epochs, "Overrides max_epochs");
  trainc->add_flag("--no-attention", train_args.no_attention,
                   "Train the ablation that pools utterances by final states");

  const std::vector<std::string> parts{"all", "train", "dev", "test"};
  EvalArgs eval_args;
  auto* evalc = app.add_subcommand("eval", "Accuracy, per-dialog report and confusion matrix");
  input_file(evalc, "--model", eval_args.model, "Checkpoint")->required();
  input_file(evalc, "--corpus", eval_args.corpus, "Corpus file")->required();
  input_file(evalc, "--split", eval_args.split, "Split manifest");
  evalc->add_option("--split-part", eval_args.part, "Part of the split to evaluate")
      ->capture_default_str()
      ->check(CLI::IsMember(parts));
  evalc->add_option("--out-dir", eval_args.out_dir, "Output directory")->capture_default_str();
  evalc->add_flag("--with-baselines", eval_args.with_baselines,
                  "Also fit and score the bag-of-words and majority baselines (needs --split)");

  OnlineArgs online_args;
  auto* online = app.add_subcommand("online", "Accuracy on dialog prefixes");
  input_file(online, "--model", online_args.model, "Checkpoint")->required();
  input_file(online, "--corpus", online_args.corpus, "Corpus file")->required();
  input_file(online, "--split", online_args.split, "Split manifest");
  online->add_option("--split-part", online_args.part, "Part of the split to evaluate")
      ->capture_default_str()
      ->check(CLI::IsMember(parts));
  online->add_option("--fractions", online_args.fractions, "Prefix fractions in (0, 1]")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  online->add_option("--out-dir", online_args.out_dir, "Output directory")->capture_default_str();

  PredictArgs predict_args;
  auto* predictc = app.add_subcommand(
      "predict", "Read dialog records on stdin and print one JSON prediction per line");
  input_file(predictc, "--model", predict_args.model, "Checkpoint")->required();
  predictc->add_flag("--attention", predict_args.attention, "Include attention weights");
  predictc->add_option("--out-dir", predict_args.out_dir, "Directory for the run manifest")
      ->capture_default_str();

  GradCheckArgs grad_args;
  auto* gradc = app.add_subcommand("gradcheck", "Compare model gradients with finite differences");
  gradc->add_option("--dims", grad_args.dims, "Model size")
      ->capture_default_str()
      ->check(CLI::IsMember({"tiny", "small"}));
  gradc->add_option("--seed", grad_args.seed, "Parameter and data seed")->capture_default_str();
  gradc->add_option("--max-coords", grad_args.max_coords,
                    "Coordinates checked per tensor, 0 for all")
      ->capture_default_str();
  gradc->add_option("--out-dir", grad_args.out_dir, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));
  spdlog::set_default_logger(spdlog::default_logger());

  try {
    if (*split) return cmd_split(split_args);
    if (*synth) return cmd_synth(synth_args);
    if (*trainc) return cmd_train(train_args);
    if (*evalc) return cmd_eval(eval_args);
    if (*online) return cmd_online(online_args);
    if (*predictc) return cmd_predict(predict_args);
    if (*gradc) return cmd_gradcheck(grad_args);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace
}  // namespace hnsa::cli

int main(int argc, char** argv) { return hnsa::cli::run(argc, argv); }
