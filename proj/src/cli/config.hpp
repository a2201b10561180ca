#pragma once

#include <cstdint>
#include <exception>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/logger.h>

#include "cfx/cfe.hpp"
#include "cfx/classifier.hpp"

namespace cfx::cli {

struct GenerateOptions {
  std::size_t length = 64;
  std::size_t per_class = 100;
  std::size_t test_per_class = 50;
  std::uint64_t seed = 0;
  std::string format = "tsv";
  std::string out;
};

struct TrainOptions {
  std::vector<std::string> data;
  std::string out;
  std::string report;  // defaults to train_report.json next to the model
  nn::TrainConfig train;
};

struct ExplainOptions {
  std::string model;
  std::vector<std::string> data;
  std::string target = "second";
  std::string neighbor_metric = "euclidean";
  cfe::CfeConfig cfe;
  std::string out;
  std::string series_out;
  std::size_t offset = 0;
  std::size_t limit = 0;  // 0 = the whole test split
  std::size_t threads = 0;  // 0 = hardware concurrency, capped by CFX_THREADS
};

struct EvaluateOptions {
  std::string model;
  std::vector<std::string> data;
  std::string results;
  std::uint64_t seed = 0;
  std::string out;
};

struct PlotOptions {
  std::string results;
  std::string out;
};

// Effective configuration echoed into output JSON. Only settings that change
// outputs are included, so the echo itself is reproducible.
nlohmann::json echo(const GenerateOptions& o);
nlohmann::json echo(const TrainOptions& o);
nlohmann::json echo(const ExplainOptions& o);
nlohmann::json echo(const EvaluateOptions& o);
nlohmann::json echo(const PlotOptions& o);

cfe::NeighborMetric parse_neighbor_metric(const std::string& text);

/// Worker count for explain: requested (0 = hardware), capped by CFX_THREADS.
std::size_t worker_count(std::size_t requested, std::size_t jobs);

/// The stderr logger; level names follow spdlog ("trace" .. "off").
std::shared_ptr<spdlog::logger> logger();
void set_log_level(const std::string& level);

/// Maps an in-flight exception onto the exit-code contract and logs it.
int report_failure(std::exception_ptr error);

}  // namespace cfx::cli
