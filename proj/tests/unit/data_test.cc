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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "streamgcd/data.h"
#include "streamgcd/errors.h"
#include "streamgcd/matrix.h"

namespace streamgcd {
namespace {

namespace fs = std::filesystem;

fs::path TempDir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("streamgcd_data_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void WriteText(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

ScenarioSpec Spec(std::uint64_t seed) {
  ScenarioSpec s;
  s.seed = seed;
  return s;
}

TEST_CASE("spec validation") {
  CHECK_NOTHROW(Spec(0).Validate());
  ScenarioSpec s = Spec(0);
  s.labeled_ratio = 1.0;
  CHECK_THROWS_AS(s.Validate(), ConfigError);
  s = Spec(0);
  s.n_novel_classes = 0;
  CHECK_THROWS_AS(s.Validate(), ConfigError);
  s = Spec(0);
  s.blob_std = 0.0;
  CHECK_THROWS_AS(s.Validate(), ConfigError);
  s = Spec(0);
  s.blob_separation = -1.0;
  CHECK_THROWS_AS(s.Validate(), ConfigError);
}

TEST_CASE("split counts") {
  const ScenarioSpec s = Spec(0);
  const ClassSplitCounts known = SplitCounts(100, true, s);
  CHECK(known.test == 20u);
  CHECK(known.labeled == 64u);
  CHECK(known.unlabeled == 16u);
  const ClassSplitCounts novel = SplitCounts(100, false, s);
  CHECK(novel.labeled == 0u);
  CHECK(novel.unlabeled == 80u);
}

TEST_CASE("generated scenario layout") {
  const SplitBundle b = GenerateSynthetic(Spec(7));
  CHECK(b.n_base_classes == 8u);
  CHECK(b.base_labeled.size() == 8u * 80u);
  CHECK(b.inc_unlabeled.size() == 8u * 20u + 2u * 100u);
  CHECK_FALSE(b.inc_unlabeled.has_labels());
  CHECK(b.inc_truth.size() == b.inc_unlabeled.size());
  CHECK(b.test_base.size() == 8u * 20u);
  CHECK(b.test_inc.size() == 2u * 20u);
  std::vector<std::size_t> per_class(10, 0);
  for (int y : b.inc_truth) ++per_class.at(static_cast<std::size_t>(y));
  for (std::size_t c = 0; c < 8; ++c) CHECK(per_class[c] == 20u);
  CHECK(per_class[8] == 100u);
  CHECK(per_class[9] == 100u);
  for (int y : *b.base_labeled.labels) CHECK(y < 8);
  for (int y : *b.test_inc.labels) CHECK(y >= 8);
}

TEST_CASE("generation is deterministic per seed") {
  const SplitBundle a = GenerateSynthetic(Spec(3));
  const SplitBundle b = GenerateSynthetic(Spec(3));
  const SplitBundle c = GenerateSynthetic(Spec(4));
  CHECK(a.base_labeled.features == b.base_labeled.features);
  CHECK(a.inc_unlabeled.features == b.inc_unlabeled.features);
  CHECK(a.inc_truth == b.inc_truth);
  CHECK(a.test_inc.features == b.test_inc.features);
  CHECK_FALSE(a.base_labeled.features == c.base_labeled.features);
}

TEST_CASE("class centers are separated") {
  ScenarioSpec s = Spec(5);
  s.samples_per_class = 400;
  const SplitBundle b = GenerateSynthetic(s);
  Matrix all = VStack(b.base_labeled.features, b.test_base.features);
  std::vector<int> labels = *b.base_labeled.labels;
  labels.insert(labels.end(), b.test_base.labels->begin(), b.test_base.labels->end());
  std::vector<std::vector<double>> centers(8, std::vector<double>(16, 0.0));
  std::vector<double> counts(8, 0.0);
  for (std::size_t i = 0; i < all.rows(); ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    counts[y] += 1.0;
    for (std::size_t j = 0; j < 16; ++j) centers[y][j] += all(i, j);
  }
  for (std::size_t c = 0; c < 8; ++c) {
    for (double& v : centers[c]) v /= counts[c];
    double norm = 0.0;
    for (double v : centers[c]) norm += v * v;
    CHECK(std::abs(std::sqrt(norm) - 12.0) < 0.5);
  }
  for (std::size_t a = 0; a < 8; ++a) {
    for (std::size_t c = a + 1; c < 8; ++c) {
      CHECK(std::sqrt(SquaredDistance(centers[a], centers[c])) >= 3.0 - 0.5);
    }
  }
}

TEST_CASE("impossible placement is a configuration error") {
  ScenarioSpec s = Spec(0);
  s.feature_dim = 1;
  s.n_base_classes = 40;
  s.blob_separation = 1.0;
  CHECK_THROWS_AS(GenerateSynthetic(s), ConfigError);
}

TEST_CASE("splits never share a row") {
  const SplitBundle b = GenerateSynthetic(Spec(8));
  std::set<std::vector<double>> rows;
  std::size_t total = 0;
  for (const FeatureBatch* fb :
       {&b.base_labeled, &b.inc_unlabeled, &b.test_base, &b.test_inc}) {
    for (std::size_t r = 0; r < fb->size(); ++r) {
      rows.insert(std::vector<double>(fb->features.row(r).begin(),
                                      fb->features.row(r).end()));
      ++total;
    }
  }
  CHECK(rows.size() == total);
}

TEST_CASE("make splits counts and membership") {
  ScenarioSpec s = Spec(0);
  s.n_base_classes = 2;
  s.n_novel_classes = 1;
  s.feature_dim = 2;
  Matrix x(300, 2);
  std::vector<int> y(300);
  for (std::size_t i = 0; i < 300; ++i) {
    x(i, 0) = static_cast<double>(i);
    y[i] = static_cast<int>(i / 100);
  }
  std::set<double> first_labeled;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    s.seed = seed;
    const SplitBundle b = MakeSplits(x, y, s);
    CHECK(b.base_labeled.size() == 2u * 64u);
    CHECK(b.inc_unlabeled.size() == 2u * 16u + 80u);
    CHECK(b.test_base.size() == 40u);
    CHECK(b.test_inc.size() == 20u);
    for (int label : *b.base_labeled.labels) CHECK(label < 2);
    std::set<double> labeled;
    for (std::size_t r = 0; r < b.base_labeled.size(); ++r) {
      labeled.insert(b.base_labeled.features(r, 0));
    }
    if (seed == 0) {
      first_labeled = labeled;
    } else {
      CHECK(labeled != first_labeled);
    }
  }
  std::vector<int> tiny = y;
  std::fill(tiny.begin(), tiny.begin() + 97, 1);
  CHECK_THROWS_AS(MakeSplits(x, tiny, s), ConfigError);
}

TEST_CASE("csv loading") {
  const fs::path dir = TempDir("load");
  WriteText(dir / "ok.csv", "f0,f1,f2,label\n1,2,3,0\n4.5,-5,6e-3,1\n");
  const FeatureBatch b = LoadFeatureCsv(dir / "ok.csv");
  CHECK(b.size() == 2u);
  CHECK(b.dim() == 3u);
  CHECK(*b.labels == std::vector<int>{0, 1});
  CHECK(b.features(1, 2) == 6e-3);
  CHECK(b.ids == std::vector<std::uint64_t>{0, 1});

  WriteText(dir / "unlabeled.csv", "f0,label\n1,-1\n2,-1\n");
  CHECK_FALSE(LoadFeatureCsv(dir / "unlabeled.csv").has_labels());
  WriteText(dir / "nolabel.csv", "f0,f1\n1,2\n");
  CHECK_FALSE(LoadFeatureCsv(dir / "nolabel.csv").has_labels());
}

TEST_CASE("csv errors name the line") {
  const fs::path dir = TempDir("errors");
  const auto message = [&](const std::string& name, const std::string& text) {
    WriteText(dir / name, text);
    try {
      LoadFeatureCsv(dir / name);
    } catch (const ParseError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message("nan.csv", "f0,f1\n1,2\nNaN,3\n").find(":3:") != std::string::npos);
  CHECK(message("inf.csv", "f0\n1\ninf\n").find(":3:") != std::string::npos);
  CHECK(message("ragged.csv", "f0,f1\n1,2\n3\n").find(":3:") != std::string::npos);
  CHECK(message("text.csv", "f0,f1\n1,x\n").find(":2:") != std::string::npos);
  CHECK(message("header.csv", "a,b\n1,2\n").find(":1:") != std::string::npos);
  CHECK_THROWS_AS(LoadFeatureCsv(dir / "missing.csv"), ConfigError);
}

TEST_CASE("csv round trip is bit exact") {
  const fs::path dir = TempDir("roundtrip");
  const SplitBundle b = GenerateSynthetic(Spec(9));
  WriteFeatureCsv(dir / "labeled.csv", b.base_labeled);
  WriteFeatureCsv(dir / "stream.csv", b.inc_unlabeled);
  const FeatureBatch l = LoadFeatureCsv(dir / "labeled.csv");
  const FeatureBatch u = LoadFeatureCsv(dir / "stream.csv");
  CHECK(l.features == b.base_labeled.features);
  CHECK(*l.labels == *b.base_labeled.labels);
  CHECK(u.features == b.inc_unlabeled.features);
  CHECK_FALSE(u.has_labels());
  Matrix odd(1, 3, std::vector<double>{0.1, 1.0 / 3.0, -5e-310});
  WriteFeatureCsv(dir / "odd.csv", MakeBatch(odd));
  CHECK(LoadFeatureCsv(dir / "odd.csv").features == odd);
}

}  // namespace
}  // namespace streamgcd
