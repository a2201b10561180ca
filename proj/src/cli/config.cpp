#include "config.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <thread>

#include <spdlog/sinks/stdout_sinks.h>

#include "cfx/cli.hpp"
#include "cfx/error.hpp"
#include "cfx/text.hpp"

namespace cfx::cli {

nlohmann::json echo(const GenerateOptions& o) {
  return {{"command", "generate-cbf"},
          {"length", o.length},
          {"per_class", o.per_class},
          {"test_per_class", o.test_per_class},
          {"seed", o.seed},
          {"format", o.format},
          {"out", o.out}};
}

nlohmann::json echo(const TrainOptions& o) {
  return {{"command", "train"},
          {"data", o.data},
          {"out", o.out},
          {"seed", o.train.seed},
          {"epochs", o.train.max_epochs},
          {"patience", o.train.patience},
          {"lr", o.train.learning_rate},
          {"weight_decay", o.train.weight_decay},
          {"dropout", o.train.dropout},
          {"batch", o.train.batch_size},
          {"validation_fraction", o.train.validation_fraction}};
}

nlohmann::json echo(const ExplainOptions& o) {
  return {{"command", "explain"},
          {"model", o.model},
          {"data", o.data},
          {"target", o.target},
          {"lambda", o.cfe.lambda},
          {"k", o.cfe.k},
          {"gamma", o.cfe.gamma},
          {"tau", o.cfe.tau},
          {"iters", o.cfe.iterations},
          {"lr", o.cfe.learning_rate},
          {"seed", o.cfe.seed},
          {"neighbor_metric", o.neighbor_metric},
          {"offset", o.offset},
          {"limit", o.limit},
          {"out", o.out},
          {"series_out", o.series_out}};
}

nlohmann::json echo(const EvaluateOptions& o) {
  return {{"command", "evaluate"}, {"model", o.model}, {"data", o.data},
          {"results", o.results},  {"seed", o.seed},   {"out", o.out}};
}

nlohmann::json echo(const PlotOptions& o) {
  return {{"command", "plot-data"}, {"results", o.results}, {"out", o.out}};
}

cfe::NeighborMetric parse_neighbor_metric(const std::string& text) {
  if (text::iequals(text, "euclidean")) return cfe::NeighborMetric::euclidean;
  if (text::iequals(text, "dtw")) return cfe::NeighborMetric::dtw;
  throw ConfigError("neighbor-metric must be 'euclidean' or 'dtw', got '" + text + "'");
}

std::size_t worker_count(std::size_t requested, std::size_t jobs) {
  std::size_t n = requested != 0 ? requested : std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CFX_THREADS"); env != nullptr && *env != '\0') {
    const auto cap = text::parse_double(env);
    if (!cap || *cap < 1 || *cap != static_cast<double>(static_cast<std::size_t>(*cap))) {
      throw ConfigError(std::string("CFX_THREADS must be a positive integer, got '") + env + "'");
    }
    n = std::min(n, static_cast<std::size_t>(*cap));
  }
  return std::max<std::size_t>(1, std::min(n, jobs));
}

std::shared_ptr<spdlog::logger> logger() {
  static const auto instance = [] {
    auto sink = std::make_shared<spdlog::sinks::stderr_sink_mt>();
    auto log = std::make_shared<spdlog::logger>("cfx", sink);
    log->set_pattern("[%l] %v");
    log->set_level(spdlog::level::info);
    return log;
  }();
  return instance;
}

void set_log_level(const std::string& level) {
  const auto parsed = spdlog::level::from_str(text::to_lower(level));
  // from_str maps unknown names to "off"
  if (parsed == spdlog::level::off && !text::iequals(level, "off")) {
    throw ConfigError("unknown log level '" + level + "'");
  }
  logger()->set_level(parsed);
}

int report_failure(std::exception_ptr error) {
  try {
    std::rethrow_exception(error);
  } catch (const ConfigError& e) {
    logger()->error("config error: {}", e.what());
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    logger()->error("config error: {}", e.what());
    return kConfigError;
  } catch (const IoError& e) {
    logger()->error("io error: {}", e.what());
    return kIoError;
  } catch (const std::filesystem::filesystem_error& e) {
    logger()->error("io error: {}", e.what());
    return kIoError;
  } catch (const PreconditionError& e) {
    logger()->error("precondition failed: {}", e.what());
    return kPreconditionError;
  } catch (const std::exception& e) {
    logger()->error("internal error: {}", e.what());
    return kInternalError;
  }
}

}  // namespace cfx::cli
