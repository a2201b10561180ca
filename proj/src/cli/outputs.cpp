#include "outputs.hpp"

#include <fstream>
#include <sstream>

#include "cfx/error.hpp"
#include "cfx/text.hpp"

namespace cfx::cli {
namespace {

std::vector<std::vector<std::string_view>> csv_rows(const std::string& content, std::string& header_out) {
  std::vector<std::vector<std::string_view>> rows;
  std::string_view rest = content;
  bool first = true;
  while (!rest.empty()) {
    const std::size_t nl = rest.find('\n');
    std::string_view line = rest.substr(0, nl);
    rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (first) {
      header_out = std::string(line);
      first = false;
      continue;
    }
    rows.push_back(text::split(line, ','));
  }
  return rows;
}

double cell(std::string_view token, const std::filesystem::path& path, std::size_t row) {
  const auto v = text::parse_double(text::trim(token));
  if (!v) throw IoError(path.string() + ": non-numeric cell '" + std::string(token) + "' in row " + std::to_string(row));
  return *v;
}

std::string channel_header(std::size_t channels) {
  std::string h;
  for (std::size_t ch = 0; ch < channels; ++ch) h += ",ch" + std::to_string(ch);
  return h;
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << content;
    out.close();
    if (!out) throw IoError("failed to write " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string series_csv(const TimeSeries& series) {
  std::string out = "t" + channel_header(series.channels()) + "\n";
  for (std::size_t t = 0; t < series.length(); ++t) {
    out += std::to_string(t);
    for (std::size_t ch = 0; ch < series.channels(); ++ch) out += "," + text::format_double(series(t, ch));
    out += '\n';
  }
  return out;
}

TimeSeries read_series_csv(const std::filesystem::path& path) {
  std::string header;
  const std::string content = read_file(path);
  const auto rows = csv_rows(content, header);
  const auto columns = text::split(header, ',');
  if (columns.size() < 2 || columns.front() != "t") throw IoError(path.string() + ": expected a 't,ch0,...' header");
  const std::size_t channels = columns.size() - 1;
  if (rows.empty()) throw IoError(path.string() + ": no rows");
  std::vector<double> values;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != columns.size()) throw IoError(path.string() + ": ragged row " + std::to_string(r + 2));
    for (std::size_t c = 1; c < rows[r].size(); ++c) values.push_back(cell(rows[r][c], path, r + 2));
  }
  return TimeSeries(rows.size(), channels, std::move(values));
}

std::string loss_csv(const std::vector<cfe::LossTerms>& trajectory) {
  std::string out = "iteration,prox,sparse,valid,dtw,total\n";
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    const auto& l = trajectory[i];
    out += std::to_string(i) + "," + text::format_double(l.prox) + "," + text::format_double(l.sparse) + "," +
           text::format_double(l.valid) + "," + text::format_double(l.dtw) + "," + text::format_double(l.total) + "\n";
  }
  return out;
}

std::string neighbors_csv(const std::vector<Neighbor>& neighbors) {
  const std::size_t channels = neighbors.empty() ? 1 : neighbors.front().series.channels();
  std::string out = "rank,train_index,t" + channel_header(channels) + "\n";
  for (std::size_t k = 0; k < neighbors.size(); ++k) {
    const auto& s = neighbors[k].series;
    for (std::size_t t = 0; t < s.length(); ++t) {
      out += std::to_string(k + 1) + "," + std::to_string(neighbors[k].train_index) + "," + std::to_string(t);
      for (std::size_t ch = 0; ch < s.channels(); ++ch) out += "," + text::format_double(s(t, ch));
      out += '\n';
    }
  }
  return out;
}

std::vector<Neighbor> read_neighbors_csv(const std::filesystem::path& path) {
  std::string header;
  const std::string content = read_file(path);
  const auto rows = csv_rows(content, header);
  const auto columns = text::split(header, ',');
  if (columns.size() < 4 || columns[0] != "rank" || columns[1] != "train_index" || columns[2] != "t") {
    throw IoError(path.string() + ": expected a 'rank,train_index,t,ch0,...' header");
  }
  const std::size_t channels = columns.size() - 3;
  std::vector<Neighbor> out;
  std::vector<double> values;
  std::size_t current_rank = 0, length = 0, train_index = 0;
  const auto flush = [&] {
    if (current_rank == 0) return;
    out.push_back(Neighbor{train_index, TimeSeries(length, channels, std::move(values))});
    values.clear();
    length = 0;
  };
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != columns.size()) throw IoError(path.string() + ": ragged row " + std::to_string(r + 2));
    const auto rank = static_cast<std::size_t>(cell(rows[r][0], path, r + 2));
    if (rank != current_rank) {
      flush();
      current_rank = rank;
      train_index = static_cast<std::size_t>(cell(rows[r][1], path, r + 2));
    }
    ++length;
    for (std::size_t c = 3; c < rows[r].size(); ++c) values.push_back(cell(rows[r][c], path, r + 2));
  }
  flush();
  return out;
}

std::string plot_csv(const TimeSeries& original, const TimeSeries& counterfactual,
                     const std::vector<Neighbor>& neighbors) {
  std::string out = "series_role,t,ch,value\n";
  const auto emit = [&out](const std::string& role, const TimeSeries& s) {
    for (std::size_t t = 0; t < s.length(); ++t) {
      for (std::size_t ch = 0; ch < s.channels(); ++ch) {
        out += role + "," + std::to_string(t) + "," + std::to_string(ch) + "," + text::format_double(s(t, ch)) + "\n";
      }
    }
  };
  emit("original", original);
  emit("counterfactual", counterfactual);
  for (std::size_t k = 0; k < neighbors.size(); ++k) emit("neighbor_" + std::to_string(k + 1), neighbors[k].series);
  return out;
}

}  // namespace cfx::cli
