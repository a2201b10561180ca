#include "cfx/dataset_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <stdexcept>

#include "cfx/error.hpp"
#include "cfx/seed.hpp"
#include "cfx/text.hpp"

namespace cfx {
namespace {

double parse_value(std::string_view token, std::size_t line, std::size_t column) {
  const auto trimmed = text::trim(token);
  const auto value = text::parse_double(trimmed);
  if (!value) throw ParseError("non-numeric token '" + std::string(trimmed) + "'", line, column);
  if (!std::isfinite(*value)) throw ParseError("non-finite value '" + std::string(trimmed) + "'", line, column);
  return *value;
}

std::size_t column_of(std::string_view line, std::string_view token) {
  return static_cast<std::size_t>(token.data() - line.data()) + 1;
}

bool skippable(std::string_view line) {
  const auto t = text::trim(line);
  return t.empty() || t.front() == '#';
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

SplitData index_labels(std::vector<TimeSeries> series, const std::vector<std::string>& raw,
                       std::vector<std::string> vocabulary) {
  std::sort(vocabulary.begin(), vocabulary.end());
  vocabulary.erase(std::unique(vocabulary.begin(), vocabulary.end()), vocabulary.end());
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < vocabulary.size(); ++i) index[vocabulary[i]] = i;

  SplitData out;
  out.labels = std::move(vocabulary);
  out.samples.reserve(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    out.samples.push_back(LabeledSeries{std::move(series[i]), index.at(raw[i])});
  }
  return out;
}

}  // namespace

SplitData parse_ucr_tsv(std::istream& in) {
  std::vector<TimeSeries> series;
  std::vector<std::string> raw_labels;
  std::size_t expected = 0;
  std::string line_buf;
  for (std::size_t line_no = 1; std::getline(in, line_buf); ++line_no) {
    const std::string_view line = strip_cr(line_buf);
    if (skippable(line)) continue;
    const auto fields = text::split(line, '\t');
    const auto label = text::trim(fields.front());
    if (label.empty()) throw ParseError("missing class label", line_no, 1);
    const std::size_t count = fields.size() - 1;
    if (count == 0) throw ParseError("row has no values", line_no);
    if (expected == 0) {
      expected = count;
    } else if (count != expected) {
      throw ParseError("ragged row: " + std::to_string(count) + " values, expected " + std::to_string(expected),
                       line_no);
    }
    std::vector<double> values;
    values.reserve(count);
    for (std::size_t i = 1; i < fields.size(); ++i) {
      values.push_back(parse_value(fields[i], line_no, column_of(line, fields[i])));
    }
    series.emplace_back(count, 1, std::move(values));
    raw_labels.emplace_back(label);
  }
  if (series.empty()) throw IoError("no series found in UCR file");
  return index_labels(std::move(series), raw_labels, raw_labels);
}

TsFile parse_uea_ts(std::istream& in) {
  TsFile file;
  bool have_labels = false;
  bool in_data = false;
  std::vector<TimeSeries> series;
  std::vector<std::string> raw_labels;
  std::set<std::string> vocabulary;
  std::size_t expected_length = 0;
  std::size_t expected_dims = 0;

  std::string line_buf;
  std::size_t line_no = 0;
  while (std::getline(in, line_buf)) {
    ++line_no;
    const std::string_view raw = strip_cr(line_buf);
    const std::string_view line = text::trim(raw);
    if (skippable(line)) continue;

    if (!in_data) {
      if (line.front() != '@') throw ParseError("missing @data: data line before the @data header", line_no, 1);
      std::vector<std::string_view> words;
      for (auto w : text::split(line, ' ')) {
        w = text::trim(w);
        if (!w.empty()) words.push_back(w);
      }
      const std::string key = text::to_lower(words.front());
      const auto flag = [&](std::size_t idx) {
        if (words.size() <= idx) throw ParseError("header " + std::string(words.front()) + " needs a value", line_no);
        if (text::iequals(words[idx], "true")) return true;
        if (text::iequals(words[idx], "false")) return false;
        throw ParseError("expected true/false after " + std::string(words.front()), line_no);
      };
      if (key == "@problemname") {
        if (words.size() > 1) file.header.problem_name = std::string(words[1]);
      } else if (key == "@timestamps") {
        if (flag(1)) throw ParseError("timestamped .ts data is not supported", line_no);
      } else if (key == "@univariate") {
        file.header.univariate = flag(1);
      } else if (key == "@equallength") {
        if (!flag(1)) throw ParseError("unequal-length .ts data is not supported", line_no);
      } else if (key == "@classlabel") {
        if (!flag(1)) throw ParseError("@classLabel false: unlabeled data is not supported", line_no);
        for (std::size_t i = 2; i < words.size(); ++i) {
          file.header.class_labels.emplace_back(words[i]);
          vocabulary.emplace(words[i]);
        }
        if (file.header.class_labels.empty()) throw ParseError("@classLabel lists no labels", line_no);
        have_labels = true;
      } else if (key == "@data") {
        if (!have_labels) throw ParseError("@data reached without a @classLabel header", line_no);
        in_data = true;
      }
      // Other keywords (@missing, @seriesLength, @dimensions, ...) carry nothing we need.
      continue;
    }

    const auto blocks = text::split(line, ':');
    if (blocks.size() < 2) throw ParseError("data line needs at least one dimension and a label", line_no);
    const std::string label(text::trim(blocks.back()));
    if (!vocabulary.contains(label)) {
      throw ParseError("label '" + label + "' is not declared in @classLabel", line_no, column_of(raw, blocks.back()));
    }
    const std::size_t dims = blocks.size() - 1;
    if (file.header.univariate && dims != 1) {
      throw ParseError("@univariate true but line has " + std::to_string(dims) + " dimensions", line_no);
    }
    std::vector<std::vector<double>> channels(dims);
    for (std::size_t ch = 0; ch < dims; ++ch) {
      for (const auto token : text::split(blocks[ch], ',')) {
        if (text::trim(token) == "?") throw ParseError("missing values are not supported", line_no, column_of(raw, token));
        channels[ch].push_back(parse_value(token, line_no, column_of(raw, token)));
      }
      if (channels[ch].size() != channels.front().size()) {
        throw ParseError("dimension " + std::to_string(ch + 1) + " has " + std::to_string(channels[ch].size()) +
                             " values, dimension 1 has " + std::to_string(channels.front().size()),
                         line_no);
      }
    }
    const std::size_t length = channels.front().size();
    if (expected_dims == 0) {
      expected_dims = dims;
      expected_length = length;
    } else if (dims != expected_dims || length != expected_length) {
      throw ParseError("series shape (" + std::to_string(length) + ", " + std::to_string(dims) +
                           ") differs from earlier series (" + std::to_string(expected_length) + ", " +
                           std::to_string(expected_dims) + ")",
                       line_no);
    }
    std::vector<double> values(length * dims);
    for (std::size_t t = 0; t < length; ++t) {
      for (std::size_t ch = 0; ch < dims; ++ch) values[t * dims + ch] = channels[ch][t];
    }
    series.emplace_back(length, dims, std::move(values));
    raw_labels.push_back(label);
  }
  if (!in_data) throw ParseError("missing @data section", line_no == 0 ? 1 : line_no);
  if (series.empty()) throw IoError("no series found after @data");
  file.header.dimensions = expected_dims;
  file.data = index_labels(std::move(series), raw_labels, file.header.class_labels);
  return file;
}

void write_ucr_tsv(std::ostream& out, const SplitData& data) {
  for (const auto& s : data.samples) {
    if (s.series.channels() != 1) throw PreconditionError("UCR .tsv output holds univariate series only");
    out << data.labels.at(s.label);
    for (double v : s.series.values()) out << '\t' << text::format_double(v);
    out << '\n';
  }
}

void write_uea_ts(std::ostream& out, const TsHeader& header, const SplitData& data) {
  const std::size_t dims = data.samples.empty() ? 1 : data.samples.front().series.channels();
  out << "@problemName " << header.problem_name << '\n';
  out << "@timeStamps false\n";
  out << "@missing false\n";
  out << "@univariate " << (dims == 1 ? "true" : "false") << '\n';
  if (dims > 1) out << "@dimensions " << dims << '\n';
  out << "@equalLength true\n";
  if (!data.samples.empty()) out << "@seriesLength " << data.samples.front().series.length() << '\n';
  out << "@classLabel true";
  for (const auto& l : data.labels) out << ' ' << l;
  out << "\n@data\n";
  for (const auto& s : data.samples) {
    for (std::size_t ch = 0; ch < s.series.channels(); ++ch) {
      for (std::size_t t = 0; t < s.series.length(); ++t) {
        if (t) out << ',';
        out << text::format_double(s.series(t, ch));
      }
      out << ':';
    }
    out << data.labels.at(s.label) << '\n';
  }
}

Dataset make_dataset(std::string name, const SplitData& train, const SplitData& test) {
  std::vector<std::string> vocabulary = train.labels;
  vocabulary.insert(vocabulary.end(), test.labels.begin(), test.labels.end());
  std::sort(vocabulary.begin(), vocabulary.end());
  vocabulary.erase(std::unique(vocabulary.begin(), vocabulary.end()), vocabulary.end());

  const auto remap = [&](const SplitData& split) {
    std::vector<LabeledSeries> out = split.samples;
    for (auto& s : out) {
      const auto& raw = split.labels.at(s.label);
      s.label = static_cast<std::size_t>(std::lower_bound(vocabulary.begin(), vocabulary.end(), raw) - vocabulary.begin());
    }
    return out;
  };
  Dataset ds;
  ds.name = std::move(name);
  ds.labels = vocabulary;
  ds.train = remap(train);
  ds.test = remap(test);
  validate(ds);
  return ds;
}

SplitData read_split(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open dataset file " + file.string());
  try {
    if (text::iequals(file.extension().string(), ".ts")) return parse_uea_ts(in).data;
    return parse_ucr_tsv(in);
  } catch (const ParseError& e) {
    throw ParseError(file.string(), e);
  } catch (const IoError& e) {
    throw IoError(file.string() + ": " + e.what());
  }
}

Dataset load_dataset(std::span<const std::filesystem::path> paths) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  for (const auto& p : paths) {
    if (fs::is_directory(p)) {
      std::vector<fs::path> entries;
      for (const auto& e : fs::directory_iterator(p)) {
        if (e.is_regular_file()) entries.push_back(e.path());
      }
      std::sort(entries.begin(), entries.end());
      files.insert(files.end(), entries.begin(), entries.end());
    } else if (fs::exists(p)) {
      files.push_back(p);
    } else {
      throw IoError("dataset path does not exist: " + p.string());
    }
  }

  std::optional<fs::path> train_file;
  std::optional<fs::path> test_file;
  for (const auto& f : files) {
    const std::string ext = text::to_lower(f.extension().string());
    if (ext != ".ts" && ext != ".tsv") continue;
    const std::string stem = f.stem().string();
    const auto assign = [&](std::optional<fs::path>& slot, const char* which) {
      if (slot) throw IoError(std::string("more than one ") + which + " file: " + slot->string() + ", " + f.string());
      slot = f;
    };
    if (stem.find("TRAIN") != std::string::npos) {
      assign(train_file, "TRAIN");
    } else if (stem.find("TEST") != std::string::npos) {
      assign(test_file, "TEST");
    }
  }
  if (!train_file) throw IoError("no *_TRAIN.tsv / *_TRAIN.ts file found in the --data paths");
  if (!test_file) throw IoError("no *_TEST.tsv / *_TEST.ts file found in the --data paths");

  std::string name = train_file->stem().string();
  if (const auto pos = name.rfind("_TRAIN"); pos != std::string::npos) name.erase(pos);
  return make_dataset(name, read_split(*train_file), read_split(*test_file));
}

std::vector<TimeSeries> generate_cbf_samples(const SyntheticSpec& spec, bool noise) {
  const std::size_t T = spec.length;
  if (T < 16) throw std::invalid_argument("CBF series length must be at least 16, got " + std::to_string(T));
  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<std::size_t> onset(T / 8, T / 4);
  std::uniform_int_distribution<std::size_t> duration(T / 4, 3 * T / 4);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<TimeSeries> out;
  out.reserve(spec.count);
  for (std::size_t n = 0; n < spec.count; ++n) {
    const auto a = static_cast<double>(onset(rng));
    const double b = a + static_cast<double>(duration(rng));
    const double amplitude = 6.0 + normal(rng);
    TimeSeries s(T, 1);
    for (std::size_t t = 0; t < T; ++t) {
      const auto x = static_cast<double>(t);
      double v = 0.0;
      if (x >= a && x <= b) {
        switch (spec.kind) {
          case CbfKind::cylinder: v = amplitude; break;
          case CbfKind::bell: v = amplitude * (x - a) / (b - a); break;
          case CbfKind::funnel: v = amplitude * (b - x) / (b - a); break;
        }
      }
      s(t, 0) = v + (noise ? normal(rng) : 0.0);
    }
    out.push_back(std::move(s));
  }
  return out;
}

Dataset generate_cbf(std::size_t length, std::size_t train_per_class, std::size_t test_per_class,
                     std::uint64_t seed) {
  if (train_per_class == 0) throw std::invalid_argument("CBF needs at least one train sample per class");
  constexpr CbfKind kinds[] = {CbfKind::cylinder, CbfKind::bell, CbfKind::funnel};
  Dataset ds;
  ds.name = "CBF";
  ds.labels = {"1", "2", "3"};
  for (std::size_t k = 0; k < 3; ++k) {
    const SyntheticSpec train_spec{kinds[k], length, train_per_class, derive_seed(seed, "cbf/train", k)};
    for (auto& s : generate_cbf_samples(train_spec)) ds.train.push_back({std::move(s), k});
    if (test_per_class > 0) {
      const SyntheticSpec test_spec{kinds[k], length, test_per_class, derive_seed(seed, "cbf/test", k)};
      for (auto& s : generate_cbf_samples(test_spec)) ds.test.push_back({std::move(s), k});
    }
  }
  validate(ds);
  return ds;
}

}  // namespace cfx
