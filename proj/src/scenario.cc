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

#include "streamgcd/scenario.h"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>

#include "streamgcd/checkpoint.h"
#include "streamgcd/errors.h"
#include "streamgcd/numeric.h"

namespace streamgcd {
namespace {

using nlohmann::json;

// RNG streams forked from the run seed.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kAdapterStream = 3;
constexpr std::uint64_t kStreamOrder = 4;
constexpr std::uint64_t kLabelingStream = 5;

// Reads typed fields out of a JSON object and rejects unknown keys.
class FieldReader {
 public:
  FieldReader(const json& j, std::string scope)
      : j_(j), scope_(std::move(scope)) {
    if (!j_.is_object()) throw ConfigError(scope_ + " must be a JSON object");
  }

  template <typename T>
  void Read(const std::string& key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    out = Convert<T>(*it, key);
  }

  // Enum fields stored as names.
  template <typename T, typename Parse>
  void ReadEnum(const std::string& key, T& out, Parse parse) {
    std::string name;
    Read(key, name);
    if (j_.contains(key)) {
      try {
        out = parse(name);
      } catch (const ConfigError& e) {
        throw ConfigError(Where(key) + ": " + e.what());
      }
    }
  }

  const json* Child(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void Finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) {
        throw ConfigError("unknown field " + Where(it.key()));
      }
    }
  }

  std::string Where(const std::string& key) const {
    return scope_.empty() ? key : scope_ + "." + key;
  }

 private:
  template <typename T>
  T Convert(const json& v, const std::string& key) const {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(Where(key) + " must be a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(Where(key) + " must be a string");
      return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, std::filesystem::path>) {
      if (!v.is_string()) throw ConfigError(Where(key) + " must be a string");
      return std::filesystem::path(v.get<std::string>());
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw ConfigError(Where(key) + " must be a number");
      return v.get<double>();
    } else if constexpr (std::is_same_v<T, std::optional<double>>) {
      if (v.is_null()) return std::nullopt;
      if (!v.is_number()) {
        throw ConfigError(Where(key) + " must be a number or null");
      }
      return v.get<double>();
    } else if constexpr (std::is_same_v<T, std::vector<std::size_t>>) {
      if (!v.is_array()) throw ConfigError(Where(key) + " must be an array");
      std::vector<std::size_t> out;
      for (const json& e : v) {
        if (!e.is_number_unsigned()) {
          throw ConfigError(Where(key) + " must hold non-negative integers");
        }
        out.push_back(e.get<std::size_t>());
      }
      return out;
    } else {
      static_assert(std::is_unsigned_v<T>);
      if (!v.is_number_unsigned()) {
        throw ConfigError(Where(key) + " must be a non-negative integer");
      }
      return v.get<T>();
    }
  }

  const json& j_;
  std::string scope_;
  std::set<std::string> seen_;
};

json ReadJsonFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void WriteText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("write failed for " + path.string());
}

json OptionalJson(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

// std::vector<bool> has no contiguous storage, so masks use a plain array.
class Mask {
 public:
  explicit Mask(std::size_t n) : data_(new bool[n]()), size_(n) {}
  bool& operator[](std::size_t i) { return data_[i]; }
  std::span<const bool> view() const { return {data_.get(), size_}; }

 private:
  std::unique_ptr<bool[]> data_;
  std::size_t size_;
};

std::vector<int> Predict(const Model& model, const Matrix& x) {
  const Matrix logits = model.Forward(x).logits;
  std::vector<int> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    out[r] = static_cast<int>(ArgMax(logits.row(r)));
  }
  return out;
}

// Stream batches over row positions; a trailing single row joins the previous
// batch so every batch has at least two rows.
std::vector<std::vector<std::size_t>> MakeStream(std::size_t n,
                                                 const StreamConfig& cfg,
                                                 const Rng& root) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (cfg.shuffle_stream) {
    Rng rng = root.Fork(kStreamOrder);
    rng.Shuffle(std::span<std::size_t>(order));
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += cfg.batch_size) {
    const std::size_t end = std::min(n, start + cfg.batch_size);
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  if (batches.size() > 1 && batches.back().size() < 2) {
    auto tail = std::move(batches.back());
    batches.pop_back();
    batches.back().insert(batches.back().end(), tail.begin(), tail.end());
  }
  return batches;
}

json BatchRecord(const BatchOutcome& b) {
  json losses = json::array();
  for (const LossBreakdown& l : b.losses) {
    losses.push_back({{"ce", l.ce}, {"ec", l.ec}, {"total", l.total}});
  }
  json rec = {{"batch", b.batch_index},
              {"size", b.pseudo.labels.size()},
              {"known", b.partition.known.size()},
              {"seen", b.partition.seen.size()},
              {"unseen", b.partition.unseen.size()},
              {"nodes_added", b.nodes_added},
              {"losses", losses}};
  if (b.stage1) {
    rec["stage1"] = {{"fallback", b.stage1->used_fallback},
                     {"reason", b.stage1->reason}};
  }
  if (b.stage2) {
    rec["stage2"] = {{"fallback", b.stage2->used_fallback},
                     {"reason", b.stage2->reason}};
  }
  if (b.clustering) {
    rec["clusters"] = b.clustering->n_clusters;
    rec["ap_converged"] = b.clustering->converged;
  }
  return rec;
}

}  // namespace

void RunConfig::Validate() const {
  if (data_dir.empty()) {
    scenario.Validate();
  } else if (scenario.n_base_classes < 1) {
    throw ConfigError("scenario.n_base_classes must be >= 1");
  }
  stream.Validate();
  if (hidden_dims.empty()) throw ConfigError("hidden_dims must not be empty");
  for (std::size_t h : hidden_dims) {
    if (h == 0) throw ConfigError("hidden_dims entries must be >= 1");
  }
  if (feature_dim == 0) throw ConfigError("feature_dim must be >= 1");
  if (lora_rank == 0) throw ConfigError("lora_rank must be >= 1");
  if (lora_layers == 0) throw ConfigError("lora_layers must be >= 1");
  if (!(ap_damping >= 0.5 && ap_damping < 1.0)) {
    throw ConfigError("ap_damping must lie in [0.5, 1)");
  }
  if (!(optimizer.learning_rate > 0.0)) {
    throw ConfigError("optimizer.learning_rate must be > 0");
  }
  if (!(optimizer.weight_decay >= 0.0)) {
    throw ConfigError("optimizer.weight_decay must be >= 0");
  }
}

json ToJson(const ScenarioSpec& s) {
  return {{"n_base_classes", s.n_base_classes},
          {"n_novel_classes", s.n_novel_classes},
          {"labeled_ratio", s.labeled_ratio},
          {"feature_dim", s.feature_dim},
          {"samples_per_class", s.samples_per_class},
          {"blob_separation", s.blob_separation},
          {"blob_std", s.blob_std},
          {"test_fraction", s.test_fraction},
          {"seed", s.seed}};
}

ScenarioSpec ScenarioSpecFromJson(const json& j) {
  ScenarioSpec s;
  FieldReader r(j, "");
  r.Read("n_base_classes", s.n_base_classes);
  r.Read("n_novel_classes", s.n_novel_classes);
  r.Read("labeled_ratio", s.labeled_ratio);
  r.Read("feature_dim", s.feature_dim);
  r.Read("samples_per_class", s.samples_per_class);
  r.Read("blob_separation", s.blob_separation);
  r.Read("blob_std", s.blob_std);
  r.Read("test_fraction", s.test_fraction);
  r.Read("seed", s.seed);
  r.Finish();
  s.Validate();
  return s;
}

ScenarioSpec LoadScenarioSpec(const std::filesystem::path& path) {
  return ScenarioSpecFromJson(ReadJsonFile(path));
}

json ToJson(const RunConfig& c) {
  std::vector<std::size_t> hidden = c.hidden_dims;
  return {{"mode", ToString(c.mode)},
          {"seed", c.seed},
          {"scenario", ToJson(c.scenario)},
          {"data_dir", c.data_dir.string()},
          {"stream",
           {{"batch_size", c.stream.batch_size},
            {"inner_steps", c.stream.inner_steps},
            {"base_epochs", c.stream.base_epochs},
            {"shuffle", c.stream.shuffle_stream}}},
          {"model",
           {{"hidden_dims", hidden},
            {"feature_dim", c.feature_dim},
            {"activation", ToString(c.activation)}}},
          {"vfa_k", c.vfa_k},
          {"variance_source", ToString(c.variance_source)},
          {"lora_rank", c.lora_rank},
          {"lora_layers", c.lora_layers},
          {"egd_fallback", c.egd_fallback},
          {"ap_damping", c.ap_damping},
          {"ap_preference", OptionalJson(c.ap_preference)},
          {"optimizer",
           {{"learning_rate", c.optimizer.learning_rate},
            {"weight_decay", c.optimizer.weight_decay},
            {"beta1", c.optimizer.beta1},
            {"beta2", c.optimizer.beta2},
            {"epsilon", c.optimizer.epsilon}}},
          {"out_dir", c.out_dir.string()}};
}

RunConfig RunConfigFromJson(const json& j) {
  RunConfig c;
  FieldReader r(j, "");
  r.ReadEnum("mode", c.mode, RunModeFromString);
  r.Read("seed", c.seed);
  c.scenario.seed = c.seed;
  if (const json* s = r.Child("scenario")) {
    if (!s->is_object()) throw ConfigError("scenario must be a JSON object");
    json merged = ToJson(c.scenario);
    merged.update(*s);
    try {
      c.scenario = ScenarioSpecFromJson(merged);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("scenario.") + e.what());
    }
  }
  r.Read("data_dir", c.data_dir);
  if (const json* s = r.Child("stream")) {
    FieldReader sr(*s, "stream");
    sr.Read("batch_size", c.stream.batch_size);
    sr.Read("inner_steps", c.stream.inner_steps);
    sr.Read("base_epochs", c.stream.base_epochs);
    sr.Read("shuffle", c.stream.shuffle_stream);
    sr.Finish();
  }
  if (const json* m = r.Child("model")) {
    FieldReader mr(*m, "model");
    mr.Read("hidden_dims", c.hidden_dims);
    mr.Read("feature_dim", c.feature_dim);
    mr.ReadEnum("activation", c.activation, ActivationFromString);
    mr.Finish();
  }
  r.Read("vfa_k", c.vfa_k);
  r.ReadEnum("variance_source", c.variance_source, VarianceSourceFromString);
  r.Read("lora_rank", c.lora_rank);
  r.Read("lora_layers", c.lora_layers);
  r.Read("egd_fallback", c.egd_fallback);
  r.Read("ap_damping", c.ap_damping);
  r.Read("ap_preference", c.ap_preference);
  if (const json* o = r.Child("optimizer")) {
    FieldReader orr(*o, "optimizer");
    orr.Read("learning_rate", c.optimizer.learning_rate);
    orr.Read("weight_decay", c.optimizer.weight_decay);
    orr.Read("beta1", c.optimizer.beta1);
    orr.Read("beta2", c.optimizer.beta2);
    orr.Read("epsilon", c.optimizer.epsilon);
    orr.Finish();
  }
  r.Read("out_dir", c.out_dir);
  r.Finish();
  c.stream.seed = c.seed;
  c.Validate();
  return c;
}

RunConfig LoadRunConfig(const std::filesystem::path& path) {
  return RunConfigFromJson(ReadJsonFile(path));
}

std::string ConfigHash(const RunConfig& cfg) {
  json j = ToJson(cfg);
  j.erase("out_dir");
  const std::string text = j.dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

void WriteSplitDirectory(const std::filesystem::path& dir,
                         const SplitBundle& b) {
  std::filesystem::create_directories(dir);
  WriteFeatureCsv(dir / "base_labeled.csv", b.base_labeled);
  WriteFeatureCsv(dir / "inc_unlabeled.csv", b.inc_unlabeled);
  WriteFeatureCsv(dir / "test_base.csv", b.test_base);
  WriteFeatureCsv(dir / "test_inc.csv", b.test_inc);
  std::string truth;
  for (int y : b.inc_truth) truth += std::to_string(y) + "\n";
  WriteText(dir / "inc_truth.labels", truth);
}

SplitBundle LoadSplitDirectory(const std::filesystem::path& dir,
                               std::size_t n_base_classes) {
  SplitBundle b;
  b.n_base_classes = n_base_classes;
  b.base_labeled = LoadFeatureCsv(dir / "base_labeled.csv");
  b.inc_unlabeled = LoadFeatureCsv(dir / "inc_unlabeled.csv").WithoutLabels();
  b.test_base = LoadFeatureCsv(dir / "test_base.csv");
  b.test_inc = LoadFeatureCsv(dir / "test_inc.csv");
  const std::filesystem::path truth_path = dir / "inc_truth.labels";
  std::ifstream in(truth_path);
  if (!in) throw ConfigError("cannot open " + truth_path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    int y = 0;
    const auto res = std::from_chars(line.data(), line.data() + line.size(), y);
    if (res.ec != std::errc() || res.ptr != line.data() + line.size()) {
      throw ParseError(truth_path.string() + ":" + std::to_string(line_no) +
                       ": not an integer label");
    }
    b.inc_truth.push_back(y);
  }
  if (b.inc_truth.size() != b.inc_unlabeled.size()) {
    throw ConfigError("inc_truth.labels has " +
                      std::to_string(b.inc_truth.size()) + " labels for " +
                      std::to_string(b.inc_unlabeled.size()) + " stream rows");
  }
  if (!b.base_labeled.labels || !b.test_base.labels || !b.test_inc.labels) {
    throw ConfigError("base_labeled and test CSVs need a label column");
  }
  return b;
}

SplitBundle LoadScenarioData(const RunConfig& cfg) {
  if (cfg.data_dir.empty()) return GenerateSynthetic(cfg.scenario);
  return LoadSplitDirectory(cfg.data_dir, cfg.scenario.n_base_classes);
}

ClusteringAccuracy EvaluateModel(const Model& model,
                                 const FeatureBatch& test_base,
                                 const FeatureBatch& test_inc,
                                 std::size_t n_base_classes) {
  const Matrix x = VStack(test_base.features, test_inc.features);
  std::vector<int> truth = *test_base.labels;
  truth.insert(truth.end(), test_inc.labels->begin(), test_inc.labels->end());
  const std::vector<int> preds = Predict(model, x);
  Mask is_old(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    is_old[i] = truth[i] < static_cast<int>(n_base_classes);
  }
  return ClusteringAccuracyOf(preds, truth, is_old.view());
}

RunResult RunScenario(const RunConfig& cfg, const SplitBundle& data,
                      const ProgressFn& progress) {
  cfg.Validate();
  auto say = [&](const std::string& msg) {
    if (progress) progress(msg);
  };
  if (data.base_labeled.size() == 0) throw ConfigError("base split is empty");
  if (data.inc_unlabeled.size() == 0) throw ConfigError("stream split is empty");
  if (data.test_base.size() + data.test_inc.size() == 0) {
    throw ConfigError("test splits are empty");
  }
  if (data.inc_truth.size() != data.inc_unlabeled.size()) {
    throw ConfigError("stream ground truth does not cover the stream");
  }

  const Rng root(cfg.seed);
  ModelConfig mc;
  mc.input_dim = data.base_labeled.dim();
  mc.hidden_dims = cfg.hidden_dims;
  mc.feature_dim = cfg.feature_dim;
  mc.num_classes = data.n_base_classes;
  mc.activation = cfg.activation;
  Rng init_rng = root.Fork(kInitStream);
  Model initial = Model::Create(mc, init_rng);

  say("base session: " + std::to_string(data.base_labeled.size()) +
      " labeled rows, " + std::to_string(cfg.stream.base_epochs) + " epochs");
  BaseSessionResult base =
      TrainBase(std::move(initial), data.base_labeled, cfg.stream,
                cfg.optimizer);

  RunResult result;
  result.base_model = base.offline;
  result.base_train_accuracy = base.train_accuracy;

  Model online = base.offline;
  if (cfg.mode == RunMode::kFineTune) {
    online.SetFrozen(false);
  } else {
    Rng adapter_rng = root.Fork(kAdapterStream);
    const std::vector<std::size_t> layers = online.LastLayers(cfg.lora_layers);
    online.SetFrozen(false);
    online.SetBackboneFrozen(true);
    online.AttachAdapters(layers, cfg.lora_rank, adapter_rng);
  }

  IncrementalOptions opts;
  opts.mode = cfg.mode;
  opts.inner_steps = cfg.stream.inner_steps;
  opts.discovery.fallback_enabled = cfg.egd_fallback;
  opts.labeling.vfa_k = cfg.vfa_k;
  opts.labeling.variance_source = cfg.variance_source;
  opts.labeling.ap.damping = cfg.ap_damping;
  opts.labeling.ap.preference = cfg.ap_preference;
  opts.optimizer = cfg.optimizer;
  IncrementalSession session(base.offline, std::move(online), base.calibration,
                             base.labeled_feature_std, opts,
                             root.Fork(kLabelingStream));

  const auto batches =
      MakeStream(data.inc_unlabeled.size(), cfg.stream, root);
  std::vector<int> stream_pseudo(data.inc_unlabeled.size(), -1);
  result.stream_sources.assign(data.inc_unlabeled.size(), SampleSource::kKnown);
  std::map<std::uint64_t, std::size_t> position;
  for (std::size_t i = 0; i < data.inc_unlabeled.size(); ++i) {
    position[data.inc_unlabeled.ids[i]] = i;
  }
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const FeatureBatch batch =
        data.inc_unlabeled.Select(batches[b]).WithoutLabels();
    std::optional<std::vector<int>> oracle;
    if (cfg.mode == RunMode::kSupervised) {
      oracle.emplace();
      for (std::size_t i : batches[b]) oracle->push_back(data.inc_truth[i]);
    }
    const BatchOutcome out =
        oracle ? session.ProcessBatch(batch, std::span<const int>(*oracle))
               : session.ProcessBatch(batch);
    for (std::size_t r = 0; r < out.pseudo.ids.size(); ++r) {
      const std::size_t pos = position.at(out.pseudo.ids[r]);
      stream_pseudo[pos] = out.pseudo.labels[r];
      result.stream_sources[pos] = out.pseudo.source[r];
    }
    result.nodes_added += out.nodes_added;
    result.batch_log.push_back(BatchRecord(out));
    say("batch " + std::to_string(b + 1) + "/" +
        std::to_string(batches.size()) + ": known " +
        std::to_string(out.partition.known.size()) + ", seen " +
        std::to_string(out.partition.seen.size()) + ", unseen " +
        std::to_string(out.partition.unseen.size()) + ", +" +
        std::to_string(out.nodes_added) + " nodes");
  }
  result.final_model = session.online();

  SessionMetrics& m = result.metrics;
  const std::size_t n_base = data.n_base_classes;
  if (data.test_base.size() > 0) {
    const std::vector<int> preds =
        Predict(result.base_model, data.test_base.features);
    const std::vector<int>& truth = *data.test_base.labels;
    Mask all_old(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) all_old[i] = true;
    m.m_old_base = ClusteringAccuracyOf(preds, truth, all_old.view()).all;
  }
  const ClusteringAccuracy acc = EvaluateModel(
      result.final_model, data.test_base, data.test_inc, n_base);
  m.m_all = acc.all;
  m.m_old = acc.old_classes;
  m.m_new = acc.new_classes;
  if (m.m_old_base && m.m_old) m.forgetting = Forgetting(*m.m_old_base, *m.m_old);

  Mask ps_old(data.inc_truth.size());
  for (std::size_t i = 0; i < data.inc_truth.size(); ++i) {
    ps_old[i] = data.inc_truth[i] < static_cast<int>(n_base);
  }
  const ClusteringAccuracy ps = ClusteringAccuracyOf(
      stream_pseudo, data.inc_truth, ps_old.view());
  m.m_ps_all = ps.all;
  m.m_ps_old = ps.old_classes;
  m.m_ps_new = ps.new_classes;
  result.stream_pseudo_labels = std::move(stream_pseudo);
  return result;
}

json MetricsJson(const SessionMetrics& m, const RunConfig& cfg) {
  return {{"m_all", OptionalJson(m.m_all)},
          {"m_old", OptionalJson(m.m_old)},
          {"m_new", OptionalJson(m.m_new)},
          {"F", OptionalJson(m.forgetting)},
          {"m_old_base", OptionalJson(m.m_old_base)},
          {"m_ps_all", OptionalJson(m.m_ps_all)},
          {"m_ps_old", OptionalJson(m.m_ps_old)},
          {"m_ps_new", OptionalJson(m.m_ps_new)},
          {"seed", cfg.seed},
          {"mode", ToString(cfg.mode)},
          {"config_hash", ConfigHash(cfg)}};
}

void WriteRunDirectory(const std::filesystem::path& dir, const RunConfig& cfg,
                       const RunResult& result) {
  std::filesystem::create_directories(dir);
  WriteText(dir / "config.json", ToJson(cfg).dump(2) + "\n");
  SaveCheckpoint(result.base_model, dir / "base_checkpoint.bin");
  SaveCheckpoint(result.final_model, dir / "final_checkpoint.bin");
  std::string log;
  for (const json& rec : result.batch_log) log += rec.dump() + "\n";
  WriteText(dir / "batch_log.jsonl", log);
  WriteText(dir / "metrics.json", MetricsJson(result.metrics, cfg).dump(2) + "\n");
}

}  // namespace streamgcd
