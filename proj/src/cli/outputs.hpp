#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cfx/cfe.hpp"
#include "cfx/series.hpp"

namespace cfx::cli {

/// Writes `content` to `path` through a temporary file and a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

/// Header `t,ch0,ch1,...`, one row per timestep.
std::string series_csv(const TimeSeries& series);
TimeSeries read_series_csv(const std::filesystem::path& path);

/// Header `iteration,prox,sparse,valid,dtw,total`.
std::string loss_csv(const std::vector<cfe::LossTerms>& trajectory);

struct Neighbor {
  std::size_t train_index = 0;
  TimeSeries series;
};

/// Header `rank,train_index,t,ch0,...`; ranks start at 1.
std::string neighbors_csv(const std::vector<Neighbor>& neighbors);
std::vector<Neighbor> read_neighbors_csv(const std::filesystem::path& path);

/// Header `series_role,t,ch,value` with roles original, counterfactual, neighbor_1..k.
std::string plot_csv(const TimeSeries& original, const TimeSeries& counterfactual,
                     const std::vector<Neighbor>& neighbors);

}  // namespace cfx::cli
