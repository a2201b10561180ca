#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cfx/series.hpp"

namespace cfx {

/// One parsed file: a label vocabulary (sorted, dense) and the samples that index into it.
struct SplitData {
  std::vector<std::string> labels;
  std::vector<LabeledSeries> samples;
};

struct TsHeader {
  std::string problem_name;
  bool univariate = true;
  std::vector<std::string> class_labels;
  std::size_t dimensions = 0;  // filled in from the data section
};

struct TsFile {
  TsHeader header;
  SplitData data;
};

/// UCR archive text: one `label<TAB>v1<TAB>v2...` row per series. Blank and
/// `#` lines are skipped. Throws ParseError naming the offending line.
SplitData parse_ucr_tsv(std::istream& in);

/// UEA `.ts` text restricted to equal-length, untimestamped, class-labelled
/// data. Header keywords are case-insensitive. Throws ParseError.
TsFile parse_uea_ts(std::istream& in);

void write_ucr_tsv(std::ostream& out, const SplitData& data);
void write_uea_ts(std::ostream& out, const TsHeader& header, const SplitData& data);

/// Merges a train and a test file into one dataset over the union vocabulary
/// (sorted lexicographically) and validates it.
Dataset make_dataset(std::string name, const SplitData& train, const SplitData& test);

/// Reads `<name>_TRAIN.{tsv,ts}` / `<name>_TEST.{tsv,ts}`. Each path may be a
/// directory holding both files or an explicit file whose name contains
/// TRAIN or TEST. Throws IoError / ParseError.
Dataset load_dataset(std::span<const std::filesystem::path> paths);

SplitData read_split(const std::filesystem::path& file);

enum class CbfKind { cylinder, bell, funnel };

struct SyntheticSpec {
  CbfKind kind = CbfKind::cylinder;
  std::size_t length = 64;
  std::size_t count = 1;
  std::uint64_t seed = 0;
};

/// Cylinder-bell-funnel samples of a single kind. `noise = false` drops the
/// additive N(0,1) term (the amplitude jitter stays). Throws std::invalid_argument for T < 16.
std::vector<TimeSeries> generate_cbf_samples(const SyntheticSpec& spec, bool noise = true);

/// Balanced three-class CBF dataset. Labels "1", "2", "3" stand for
/// cylinder, bell, funnel as in the UCR archive.
Dataset generate_cbf(std::size_t length, std::size_t train_per_class, std::size_t test_per_class,
                     std::uint64_t seed);

}  // namespace cfx
