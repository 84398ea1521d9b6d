// Copyright 2026 The streamgcd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "streamgcd/data.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>

#include "streamgcd/errors.h"
#include "streamgcd/rng.h"

namespace streamgcd {
namespace {

std::size_t RoundCount(double x) {
  return static_cast<std::size_t>(std::floor(x + 0.5));
}

// Rows accumulated per split before they become FeatureBatches.
struct Collector {
  std::vector<double> values;
  std::vector<std::uint64_t> ids;
  std::vector<int> labels;

  void Add(std::span<const double> row, std::uint64_t id, int label) {
    values.insert(values.end(), row.begin(), row.end());
    ids.push_back(id);
    labels.push_back(label);
  }

  FeatureBatch Build(std::size_t dim, bool keep_labels) {
    FeatureBatch b;
    b.features = Matrix(ids.size(), dim, std::move(values));
    b.ids = std::move(ids);
    if (keep_labels) b.labels = std::move(labels);
    return b;
  }
};

std::vector<std::string_view> SplitComma(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::string LineTag(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

}  // namespace

void ScenarioSpec::Validate() const {
  if (n_base_classes < 1) throw ConfigError("n_base_classes must be >= 1");
  if (n_novel_classes < 1) throw ConfigError("n_novel_classes must be >= 1");
  if (!(labeled_ratio > 0.0 && labeled_ratio < 1.0)) {
    throw ConfigError("labeled_ratio must lie in (0, 1)");
  }
  if (feature_dim < 1) throw ConfigError("feature_dim must be >= 1");
  if (samples_per_class < 1) throw ConfigError("samples_per_class must be >= 1");
  if (!(blob_separation > 0.0)) throw ConfigError("blob_separation must be > 0");
  if (!(blob_std > 0.0)) throw ConfigError("blob_std must be > 0");
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test_fraction must lie in [0, 1)");
  }
}

ClassSplitCounts SplitCounts(std::size_t n, bool known,
                             const ScenarioSpec& spec) {
  ClassSplitCounts c;
  c.test = RoundCount(static_cast<double>(n) * spec.test_fraction);
  const std::size_t rest = n - c.test;
  if (known) {
    c.labeled = RoundCount(static_cast<double>(rest) * spec.labeled_ratio);
    c.unlabeled = rest - c.labeled;
  } else {
    c.unlabeled = rest;
  }
  return c;
}

SplitBundle GenerateSynthetic(const ScenarioSpec& spec) {
  spec.Validate();
  const std::size_t d = spec.feature_dim;
  const std::size_t n_classes = spec.num_classes();
  const Rng root(spec.seed);

  // Class means by rejection sampling on the sphere.
  Rng mean_rng = root.Fork(0);
  std::vector<std::vector<double>> means;
  const double min_distance = 3.0 * spec.blob_std;
  constexpr int kMaxDraws = 10000;
  int draws = 0;
  while (means.size() < n_classes) {
    if (++draws > kMaxDraws) {
      throw ConfigError("could not place " + std::to_string(n_classes) +
                        " class means at least " +
                        std::to_string(min_distance) + " apart in " +
                        std::to_string(d) +
                        " dimensions; feature_dim is too small for the "
                        "class count");
    }
    std::vector<double> dir(d);
    double norm = 0.0;
    for (double& x : dir) {
      x = mean_rng.NextNormal();
      norm += x * x;
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    for (double& x : dir) x *= spec.blob_separation / norm;
    const bool far_enough =
        std::all_of(means.begin(), means.end(), [&](const auto& m) {
          double sq = 0.0;
          for (std::size_t i = 0; i < d; ++i) {
            sq += (m[i] - dir[i]) * (m[i] - dir[i]);
          }
          return std::sqrt(sq) >= min_distance;
        });
    if (far_enough) means.push_back(std::move(dir));
  }

  const std::size_t n_train = spec.samples_per_class;
  const std::size_t n_test = RoundCount(static_cast<double>(n_train) *
                                        spec.test_fraction);
  const std::size_t n_labeled =
      RoundCount(static_cast<double>(n_train) * spec.labeled_ratio);

  Collector base, inc, test_base, test_inc;
  std::uint64_t next_id = 0;
  std::vector<double> row(d);
  for (std::size_t c = 0; c < n_classes; ++c) {
    Rng rng = root.Fork(1 + c);
    const bool known = c < spec.n_base_classes;
    const int label = static_cast<int>(c);
    for (std::size_t s = 0; s < n_train + n_test; ++s) {
      for (std::size_t i = 0; i < d; ++i) {
        row[i] = means[c][i] + spec.blob_std * rng.NextNormal();
      }
      const std::uint64_t id = next_id++;
      if (s >= n_train) {
        (known ? test_base : test_inc).Add(row, id, label);
      } else if (known && s < n_labeled) {
        base.Add(row, id, label);
      } else {
        inc.Add(row, id, label);
      }
    }
  }

  SplitBundle bundle;
  bundle.n_base_classes = spec.n_base_classes;
  bundle.inc_truth = inc.labels;
  bundle.base_labeled = base.Build(d, true);
  bundle.inc_unlabeled = inc.Build(d, false);
  bundle.test_base = test_base.Build(d, true);
  bundle.test_inc = test_inc.Build(d, true);
  return bundle;
}

SplitBundle MakeSplits(const Matrix& features, std::span<const int> labels,
                       const ScenarioSpec& spec) {
  spec.Validate();
  if (labels.size() != features.rows()) {
    throw ShapeError("label count does not match feature rows");
  }
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= spec.num_classes()) {
      throw ConfigError("label " + std::to_string(y) + " outside [0, " +
                        std::to_string(spec.num_classes()) + ")");
    }
    by_class[y].push_back(i);
  }
  const std::size_t d = features.cols();
  const Rng root(spec.seed);
  Collector base, inc, test_base, test_inc;
  for (auto& [y, rows] : by_class) {
    if (rows.size() < 5) {
      throw ConfigError("class " + std::to_string(y) + " has only " +
                        std::to_string(rows.size()) +
                        " samples; at least 5 are needed");
    }
    Rng rng = root.Fork(static_cast<std::uint64_t>(y));
    rng.Shuffle(std::span<std::size_t>(rows));
    const bool known = static_cast<std::size_t>(y) < spec.n_base_classes;
    const ClassSplitCounts counts = SplitCounts(rows.size(), known, spec);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const std::size_t i = rows[k];
      const auto id = static_cast<std::uint64_t>(i);
      if (k < counts.test) {
        (known ? test_base : test_inc).Add(features.row(i), id, y);
      } else if (k < counts.test + counts.labeled) {
        base.Add(features.row(i), id, y);
      } else {
        inc.Add(features.row(i), id, y);
      }
    }
  }
  SplitBundle bundle;
  bundle.n_base_classes = spec.n_base_classes;
  bundle.inc_truth = inc.labels;
  bundle.base_labeled = base.Build(d, true);
  bundle.inc_unlabeled = inc.Build(d, false);
  bundle.test_base = test_base.Build(d, true);
  bundle.test_inc = test_inc.Build(d, true);
  return bundle;
}

FeatureBatch LoadFeatureCsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open feature file " + path.string());
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) {
    throw ParseError(LineTag(path, 1) + "missing header");
  }
  ++line_no;
  const auto header = SplitComma(line);
  bool has_label = !header.empty() && Trim(header.back()) == "label";
  const std::size_t d = header.size() - (has_label ? 1 : 0);
  if (d == 0) throw ParseError(LineTag(path, 1) + "no feature columns");
  for (std::size_t i = 0; i < d; ++i) {
    if (Trim(header[i]) != "f" + std::to_string(i)) {
      throw ParseError(LineTag(path, 1) + "expected column f" +
                       std::to_string(i) + ", found '" +
                       std::string(Trim(header[i])) + "'");
    }
  }

  std::vector<double> values;
  std::vector<int> labels;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    const auto cells = SplitComma(line);
    if (cells.size() != header.size()) {
      throw ParseError(LineTag(path, line_no) + "expected " +
                       std::to_string(header.size()) + " cells, found " +
                       std::to_string(cells.size()));
    }
    for (std::size_t i = 0; i < d; ++i) {
      const std::string_view cell = Trim(cells[i]);
      double v = 0.0;
      const auto [ptr, ec] =
          std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw ParseError(LineTag(path, line_no) + "non-numeric cell '" +
                         std::string(cell) + "' in column f" +
                         std::to_string(i));
      }
      if (!std::isfinite(v)) {
        throw ParseError(LineTag(path, line_no) + "non-finite value in column f" +
                         std::to_string(i));
      }
      values.push_back(v);
    }
    if (has_label) {
      const std::string_view cell = Trim(cells.back());
      int y = 0;
      const auto [ptr, ec] =
          std::from_chars(cell.data(), cell.data() + cell.size(), y);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || y < -1) {
        throw ParseError(LineTag(path, line_no) + "invalid label '" +
                         std::string(cell) + "'");
      }
      labels.push_back(y);
    }
  }
  const std::size_t n = values.size() / d;
  std::optional<std::vector<int>> maybe_labels;
  if (has_label &&
      std::any_of(labels.begin(), labels.end(), [](int y) { return y >= 0; })) {
    maybe_labels = std::move(labels);
  }
  return MakeBatch(Matrix(n, d, std::move(values)), std::move(maybe_labels));
}

void WriteFeatureCsv(const std::filesystem::path& path,
                     const FeatureBatch& batch) {
  batch.Validate();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write feature file " + path.string());
  const std::size_t d = batch.dim();
  for (std::size_t i = 0; i < d; ++i) {
    if (i > 0) out << ',';
    out << 'f' << i;
  }
  if (batch.labels) out << ",label";
  out << '\n';
  char buf[64];
  for (std::size_t r = 0; r < batch.size(); ++r) {
    auto row = batch.features.row(r);
    for (std::size_t i = 0; i < d; ++i) {
      if (i > 0) out << ',';
      const auto res = std::to_chars(buf, buf + sizeof(buf), row[i]);
      out.write(buf, res.ptr - buf);
    }
    if (batch.labels) out << ',' << (*batch.labels)[r];
    out << '\n';
  }
  if (!out) throw ConfigError("failed writing feature file " + path.string());
}

}  // namespace streamgcd
