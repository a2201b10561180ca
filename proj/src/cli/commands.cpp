#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "cfx/cfe.hpp"
#include "cfx/classifier.hpp"
#include "cfx/cli.hpp"
#include "cfx/dataset_io.hpp"
#include "cfx/error.hpp"
#include "cfx/metrics.hpp"
#include "config.hpp"
#include "outputs.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cfx::cli {
namespace {

constexpr const char* kManifestName = "manifest.json";

std::vector<fs::path> to_paths(const std::vector<std::string>& items) {
  return {items.begin(), items.end()};
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

std::string instance_id(std::size_t test_index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "test_%05zu", test_index);
  return buf;
}

json loss_json(const cfe::LossTerms& l) {
  return {{"prox", l.prox}, {"sparse", l.sparse}, {"valid", l.valid}, {"dtw", l.dtw}, {"total", l.total}};
}

json stats_json(const NormStats& s) { return {{"mean", s.mean}, {"stddev", s.stddev}}; }

json metrics_json(const metrics::MetricsReport& r) {
  return {{"n", r.n},
          {"val", r.validity},
          {"l1", r.l1},
          {"l2", r.l2},
          {"dtw_plausibility", r.dtw_plausibility},
          {"dtw_plausibility_original", r.dtw_plausibility_original},
          {"iso_nominal_fraction", r.iso_nominal_fraction}};
}

/// Loads and z-normalizes a dataset and checks it against the model's input manifest.
Dataset load_for_model(const std::vector<std::string>& data, const nn::Classifier& classifier) {
  Dataset ds = z_normalize(load_dataset(to_paths(data)));
  if (ds.length() != classifier.length() || ds.channels() != classifier.channels() ||
      ds.num_classes() != classifier.num_classes()) {
    throw PreconditionError("dataset '" + ds.name + "' has shape (T=" + std::to_string(ds.length()) +
                            ", d=" + std::to_string(ds.channels()) + ", c=" + std::to_string(ds.num_classes()) +
                            ") but the model expects (T=" + std::to_string(classifier.length()) +
                            ", d=" + std::to_string(classifier.channels()) +
                            ", c=" + std::to_string(classifier.num_classes()) + ")");
  }
  if (ds.labels != classifier.labels()) {
    throw PreconditionError("dataset labels do not match the labels stored in the model");
  }
  return ds;
}

json read_manifest(const fs::path& results) {
  if (!fs::is_directory(results)) throw IoError("results directory not found: " + results.string());
  const fs::path path = results / kManifestName;
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

template <typename T>
T manifest_field(const json& node, const char* key) {
  try {
    return node.at(key).get<T>();
  } catch (const json::exception&) {
    throw IoError(std::string("manifest entry is missing field '") + key + "'");
  }
}

// ---------------------------------------------------------------------------

int cmd_generate(const GenerateOptions& o) {
  if (o.format != "tsv" && o.format != "ts") throw ConfigError("format must be 'tsv' or 'ts', got '" + o.format + "'");
  const Dataset ds = generate_cbf(o.length, o.per_class, o.test_per_class, o.seed);
  const auto write_split = [&](const std::vector<LabeledSeries>& samples, const std::string& split) {
    const SplitData data{ds.labels, samples};
    std::ostringstream out;
    if (o.format == "tsv") {
      write_ucr_tsv(out, data);
    } else {
      TsHeader header;
      header.problem_name = "CBF";
      header.univariate = true;
      header.class_labels = ds.labels;
      header.dimensions = 1;
      write_uea_ts(out, header, data);
    }
    const fs::path path = fs::path(o.out) / ("CBF_" + split + "." + o.format);
    write_file_atomic(path, out.str());
    logger()->info("wrote {} series to {}", samples.size(), path.string());
  };
  write_split(ds.train, "TRAIN");
  write_split(ds.test, "TEST");
  return kSuccess;
}

int cmd_train(const TrainOptions& o) {
  const Dataset ds = z_normalize(load_dataset(to_paths(o.data)));
  logger()->info("training on '{}': {} train / {} test series, T={}, d={}, c={}", ds.name, ds.train.size(),
                 ds.test.size(), ds.length(), ds.channels(), ds.num_classes());
  const nn::TrainResult result = nn::train(ds, o.train);
  const auto& r = result.report;

  std::ostringstream model;
  nn::save_model(result.classifier, model);
  write_file_atomic(o.out, model.str());

  const json report = {
      {"dataset", ds.name},
      {"n_train", ds.train.size()},
      {"n_test", ds.test.size()},
      {"length", ds.length()},
      {"channels", ds.channels()},
      {"labels", ds.labels},
      {"normalization", stats_json(ds.stats)},
      {"accuracy", {{"train", r.train_accuracy}, {"validation", r.validation_accuracy}, {"test", r.test_accuracy}}},
      {"epochs_run", r.epochs_run},
      {"best_epoch", r.best_epoch},
      {"early_stopped", r.early_stopped},
      {"best_validation_loss", r.best_validation_loss},
      {"train_loss", r.train_loss},
      {"validation_loss", r.validation_loss},
      {"config", echo(o)},
  };
  const fs::path report_path = o.report.empty() ? fs::path(o.out).parent_path() / "train_report.json" : fs::path(o.report);
  write_file_atomic(report_path, dump(report));
  logger()->info("epochs {} (best {}), test accuracy {:.4f}; model {}", r.epochs_run, r.best_epoch, r.test_accuracy,
                 o.out);
  return kSuccess;
}

struct InstanceOutcome {
  json record;
  bool skipped = false;
  bool valid = false;
  cfe::LossTerms final_loss;
};

int cmd_explain(ExplainOptions o) {
  o.cfe.neighbor_metric = parse_neighbor_metric(o.neighbor_metric);
  cfe::validate(o.cfe);
  const auto policy = cfe::TargetPolicy::parse(o.target);

  const nn::Classifier classifier = nn::load_model(fs::path(o.model));
  const Dataset ds = load_for_model(o.data, classifier);

  std::optional<std::size_t> fixed_target;
  if (policy.kind == cfe::TargetPolicy::Kind::fixed) {
    const auto it = std::find(ds.labels.begin(), ds.labels.end(), policy.label);
    if (it == ds.labels.end()) throw ConfigError("target label '" + policy.label + "' is not a class of " + ds.name);
    fixed_target = static_cast<std::size_t>(it - ds.labels.begin());
  }
  if (o.offset >= ds.test.size()) {
    throw ConfigError("offset " + std::to_string(o.offset) + " is past the test split (" +
                      std::to_string(ds.test.size()) + " series)");
  }
  const std::size_t end = o.limit == 0 ? ds.test.size() : std::min(ds.test.size(), o.offset + o.limit);
  const std::size_t jobs = end - o.offset;
  const fs::path series_dir(o.series_out);
  fs::create_directories(series_dir);

  std::vector<InstanceOutcome> outcomes(jobs);
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  const auto work = [&] {
    for (std::size_t j = next++; j < jobs; j = next++) {
      {
        std::lock_guard lock(error_mutex);
        if (first_error) return;
      }
      try {
        const std::size_t index = o.offset + j;
        const auto& x = ds.test[index].series;
        const std::string id = instance_id(index);
        InstanceOutcome& out = outcomes[j];
        out.record = {{"id", id}, {"test_index", index}, {"true_label", ds.labels[ds.test[index].label]}};

        const std::size_t predicted = classifier.predict(x);
        if (fixed_target && *fixed_target == predicted) {
          logger()->warn("skipping {}: target '{}' is already the predicted class", id, policy.label);
          out.skipped = true;
          out.record["skipped"] = true;
          out.record["skip_reason"] = "target already predicted";
          out.record["source"] = ds.labels[predicted];
          out.record["target"] = ds.labels[*fixed_target];
          continue;
        }
        const std::size_t target = cfe::pick_target(x, classifier, policy);
        const cfe::CfeResult result = cfe::generate(x, target, classifier, ds.train, o.cfe);

        std::vector<Neighbor> neighbors;
        for (std::size_t n : result.neighbor_ids) neighbors.push_back({n, ds.train[n].series});
        const json files = {{"original", id + "_original.csv"},
                            {"counterfactual", id + "_counterfactual.csv"},
                            {"loss", id + "_loss.csv"},
                            {"neighbors", id + "_neighbors.csv"}};
        write_file_atomic(series_dir / files["original"].get<std::string>(), series_csv(result.original));
        write_file_atomic(series_dir / files["counterfactual"].get<std::string>(), series_csv(result.counterfactual));
        write_file_atomic(series_dir / files["loss"].get<std::string>(), loss_csv(result.trajectory));
        write_file_atomic(series_dir / files["neighbors"].get<std::string>(), neighbors_csv(neighbors));

        out.valid = result.valid;
        if (!result.trajectory.empty()) out.final_loss = result.trajectory.at(result.selected_iteration);
        out.record["skipped"] = false;
        out.record["source"] = result.source.name;
        out.record["target"] = result.target.name;
        out.record["valid"] = result.valid;
        out.record["trivial"] = result.trivial;
        out.record["target_probability"] = result.target_probability;
        out.record["iterations_used"] = result.iterations_used;
        out.record["selected_iteration"] = result.selected_iteration;
        out.record["final_loss"] = loss_json(out.final_loss);
        out.record["neighbor_ids"] = result.neighbor_ids;
        out.record["files"] = files;
        logger()->debug("{}: {} -> {} valid={}", id, result.source.name, result.target.name, result.valid);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  const std::size_t workers = worker_count(o.threads, jobs);
  logger()->info("explaining {} test series of '{}' with {} worker(s)", jobs, ds.name, workers);
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (first_error) std::rethrow_exception(first_error);

  std::size_t explained = 0, skipped = 0, valid = 0;
  cfe::LossTerms mean;
  json instances = json::array();
  for (const auto& out : outcomes) {
    instances.push_back(out.record);
    if (out.skipped) {
      ++skipped;
      continue;
    }
    ++explained;
    valid += out.valid ? 1 : 0;
    mean.prox += out.final_loss.prox;
    mean.sparse += out.final_loss.sparse;
    mean.valid += out.final_loss.valid;
    mean.dtw += out.final_loss.dtw;
    mean.total += out.final_loss.total;
  }
  json summary = {{"n_requested", jobs}, {"n_explained", explained}, {"n_skipped", skipped}, {"n_valid", valid}};
  if (explained > 0) {
    const double n = static_cast<double>(explained);
    summary["validity"] = static_cast<double>(valid) / n;
    summary["mean_final_loss"] =
        loss_json({mean.prox / n, mean.sparse / n, mean.valid / n, mean.dtw / n, mean.total / n});
  } else {
    summary["validity"] = nullptr;
    summary["mean_final_loss"] = nullptr;
  }

  const json report = {{"dataset", ds.name},
                       {"space", "z-normalized"},
                       {"labels", ds.labels},
                       {"normalization", stats_json(ds.stats)},
                       {"summary", summary},
                       {"instances", instances},
                       {"config", echo(o)}};
  write_file_atomic(series_dir / kManifestName, dump(report));
  write_file_atomic(o.out, dump(report));
  logger()->info("explained {} ({} skipped), validity {}/{}", explained, skipped, valid, explained);
  return kSuccess;
}

int cmd_evaluate(const EvaluateOptions& o) {
  const fs::path results(o.results);
  const json manifest = read_manifest(results);
  const nn::Classifier classifier = nn::load_model(fs::path(o.model));
  const Dataset ds = load_for_model(o.data, classifier);

  std::vector<metrics::Explanation> batch;
  std::vector<std::string> ids;
  for (const auto& inst : manifest_field<json>(manifest, "instances")) {
    if (manifest_field<bool>(inst, "skipped")) continue;
    const auto files = manifest_field<json>(inst, "files");
    metrics::Explanation e;
    e.original = read_series_csv(results / manifest_field<std::string>(files, "original"));
    e.counterfactual = read_series_csv(results / manifest_field<std::string>(files, "counterfactual"));
    e.target = ds.label_index(manifest_field<std::string>(inst, "target"));
    classifier.check_input(e.original.length(), e.original.channels());
    classifier.check_input(e.counterfactual.length(), e.counterfactual.channels());
    batch.push_back(std::move(e));
    ids.push_back(manifest_field<std::string>(inst, "id"));
  }
  if (batch.empty()) throw PreconditionError("no explained instances in " + results.string());

  const metrics::Evaluation ev = metrics::evaluate(batch, classifier, ds.train, o.seed);
  json instances = json::array();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    instances.push_back({{"id", ids[i]},
                         {"flipped", static_cast<bool>(ev.flipped[i])},
                         {"l1", ev.l1[i]},
                         {"l2", ev.l2[i]},
                         {"dtw_plausibility", ev.dtw_counterfactual[i]},
                         {"dtw_plausibility_original", ev.dtw_original[i]},
                         {"iso_score", ev.iso_score[i]}});
  }
  json doc = metrics_json(ev.all);
  doc["dataset"] = ds.name;
  doc["mode"] = {{"all", metrics_json(ev.all)}, {"valid_only", ev.valid_only ? metrics_json(*ev.valid_only) : json()}};
  doc["short_neighbor_pool"] = ev.short_neighbor_pool;
  doc["instances"] = instances;
  doc["config"] = echo(o);
  write_file_atomic(o.out, dump(doc));
  logger()->info("n={} validity={:.3f} l1={:.4f} l2={:.4f} dtw={:.4f} (originals {:.4f}) iso={:.3f}", ev.all.n,
                 ev.all.validity, ev.all.l1, ev.all.l2, ev.all.dtw_plausibility, ev.all.dtw_plausibility_original,
                 ev.all.iso_nominal_fraction);
  return kSuccess;
}

int cmd_plot(const PlotOptions& o) {
  const fs::path results(o.results);
  const json manifest = read_manifest(results);
  std::size_t written = 0;
  for (const auto& inst : manifest_field<json>(manifest, "instances")) {
    if (manifest_field<bool>(inst, "skipped")) continue;
    const auto files = manifest_field<json>(inst, "files");
    const TimeSeries original = read_series_csv(results / manifest_field<std::string>(files, "original"));
    const TimeSeries counterfactual = read_series_csv(results / manifest_field<std::string>(files, "counterfactual"));
    const auto neighbors = read_neighbors_csv(results / manifest_field<std::string>(files, "neighbors"));
    const auto id = manifest_field<std::string>(inst, "id");
    if (!original.same_shape(counterfactual)) throw IoError(id + ": original and counterfactual differ in shape");
    for (const auto& n : neighbors) {
      if (!n.series.same_shape(original)) throw IoError(id + ": neighbor shape differs from the original");
    }
    write_file_atomic(fs::path(o.out) / (id + "_plot.csv"), plot_csv(original, counterfactual, neighbors));
    ++written;
  }
  logger()->info("wrote {} plot files to {}", written, o.out);
  return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Counterfactual explanations for time series classifiers", "cfx"};
  app.require_subcommand(1, 1);
  app.failure_message(CLI::FailureMessage::help);
  app.set_config("--config", "", "INI-style file: one [command] section of key=value lines per command");
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")->capture_default_str();

  GenerateOptions gen;
  auto* g = app.add_subcommand("generate-cbf", "Write a synthetic cylinder-bell-funnel dataset");
  g->add_option("--length", gen.length, "Series length T (>= 16)")->capture_default_str();
  g->add_option("--per-class", gen.per_class, "Train series per class")->capture_default_str();
  g->add_option("--test-per-class", gen.test_per_class, "Test series per class")->capture_default_str();
  g->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
  g->add_option("--format", gen.format, "tsv or ts")->capture_default_str();
  g->add_option("--out", gen.out, "Output directory")->required();

  TrainOptions tr;
  auto* t = app.add_subcommand("train", "Train the CNN classifier");
  t->add_option("--data", tr.data, "Dataset directory or TRAIN/TEST files")->required();
  t->add_option("--out", tr.out, "Model file")->required();
  t->add_option("--report", tr.report, "Report path (default: train_report.json next to the model)");
  t->add_option("--seed", tr.train.seed, "Split, init, shuffle and dropout seed")->capture_default_str();
  t->add_option("--epochs", tr.train.max_epochs, "Maximum epochs")->capture_default_str()->check(CLI::PositiveNumber);
  t->add_option("--patience", tr.train.patience, "Epochs without validation improvement before stopping")->capture_default_str()->check(CLI::PositiveNumber);
  t->add_option("--lr", tr.train.learning_rate, "Adam learning rate")->capture_default_str()->check(CLI::PositiveNumber);
  t->add_option("--weight-decay", tr.train.weight_decay, "L2 penalty")->capture_default_str()->check(CLI::NonNegativeNumber);
  t->add_option("--dropout", tr.train.dropout, "Dropout before the linear head")->capture_default_str()->check(CLI::Range(0.0, 0.99));
  t->add_option("--batch", tr.train.batch_size, "Mini-batch size")->capture_default_str()->check(CLI::PositiveNumber);
  t->add_option("--validation-fraction", tr.train.validation_fraction)
      ->capture_default_str()
      ->check(CLI::Range(0.05, 0.5));

  ExplainOptions ex;
  auto* e = app.add_subcommand("explain", "Generate counterfactuals for test series");
  e->add_option("--model", ex.model, "Model file from train")->required();
  e->add_option("--data", ex.data, "Dataset directory or TRAIN/TEST files")->required();
  e->add_option("--target", ex.target, "second or fixed:LABEL")->capture_default_str();
  e->add_option("--lambda", ex.cfe.lambda, "Weight of the validity and alignment terms")->capture_default_str();
  e->add_option("--k", ex.cfe.k, "Target-class neighbors")->capture_default_str();
  e->add_option("--gamma", ex.cfe.gamma, "Soft-DTW smoothing")->capture_default_str();
  e->add_option("--tau", ex.cfe.tau, "Target probability threshold")->capture_default_str();
  e->add_option("--iters", ex.cfe.iterations, "Optimizer iterations per series")->capture_default_str();
  e->add_option("--lr", ex.cfe.learning_rate, "Adam learning rate on the counterfactual")->capture_default_str();
  e->add_option("--seed", ex.cfe.seed, "Recorded in the report; generation is deterministic")->capture_default_str();
  e->add_option("--neighbor-metric", ex.neighbor_metric, "euclidean or dtw")->capture_default_str();
  e->add_option("--offset", ex.offset, "First test index")->capture_default_str();
  e->add_option("--limit", ex.limit, "Number of test series (0 = all)")->capture_default_str();
  e->add_option("--threads", ex.threads, "Workers (0 = all cores; CFX_THREADS caps)")->capture_default_str();
  e->add_option("--out", ex.out, "Report JSON")->required();
  e->add_option("--series-out", ex.series_out, "Directory for per-instance CSVs")->required();

  EvaluateOptions ev;
  auto* v = app.add_subcommand("evaluate", "Score explain results");
  v->add_option("--model", ev.model, "Model file from train")->required();
  v->add_option("--data", ev.data, "Dataset directory or TRAIN/TEST files")->required();
  v->add_option("--results", ev.results, "explain --series-out directory")->required();
  v->add_option("--seed", ev.seed, "Isolation-forest seed")->capture_default_str();
  v->add_option("--out", ev.out, "Metrics JSON")->required();

  PlotOptions pl;
  auto* p = app.add_subcommand("plot-data", "Emit long-format CSVs for plotting");
  p->add_option("--results", pl.results, "explain --series-out directory")->required();
  p->add_option("--out", pl.out, "Output directory")->required();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& error) {
    std::ostringstream out, err;
    const int code = app.exit(error, out, err);
    std::fputs(out.str().c_str(), stdout);
    std::fputs(err.str().c_str(), stderr);
    return code == 0 ? kSuccess : kConfigError;
  }

  try {
    set_log_level(log_level);
    if (g->parsed()) return cmd_generate(gen);
    if (t->parsed()) return cmd_train(tr);
    if (e->parsed()) return cmd_explain(ex);
    if (v->parsed()) return cmd_evaluate(ev);
    return cmd_plot(pl);
  } catch (...) {
    return report_failure(std::current_exception());
  }
}

int run(int argc, const char* const* argv) { return run(std::vector<std::string>(argv, argv + argc)); }

}  // namespace cfx::cli
