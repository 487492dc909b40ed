// Copyright 2026 The advdetect Authors. All Rights Reserved.
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

#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "advdetect/binary_io.hpp"
#include "advdetect/codec.hpp"
#include "internal.hpp"

namespace advdetect {

using nlohmann::json;

namespace {
constexpr std::string_view kMagic = "ADVDETCT";
constexpr std::uint32_t kFormatVersion = 1;
}  // namespace

std::string to_string(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::LDA: return "lda";
    case DetectorKind::LinearSVM: return "svm";
    case DetectorKind::MLP: return "mlp";
    case DetectorKind::RandomForest: return "forest";
  }
  return "unknown";
}

DetectorKind parse_detector_kind(const std::string& text) {
  for (auto k : {DetectorKind::LDA, DetectorKind::LinearSVM, DetectorKind::MLP, DetectorKind::RandomForest}) {
    if (to_string(k) == text) return k;
  }
  throw Error(ErrorKind::InvalidArgument, "unknown detector '" + text + "'");
}

json DetectorConfig::to_json() const {
  return {{"class_weighting", class_weighting},
          {"lda_shrinkage", lda_shrinkage},
          {"svm_lambda", svm_lambda},
          {"svm_epochs", svm_epochs},
          {"svm_eta0", svm_eta0},
          {"mlp_hidden", mlp_hidden},
          {"mlp_epochs", mlp_epochs},
          {"mlp_learning_rate", mlp_learning_rate},
          {"mlp_momentum", mlp_momentum},
          {"mlp_batch_size", mlp_batch_size},
          {"forest_trees", forest_trees},
          {"forest_depth", forest_depth},
          {"forest_max_features", forest_max_features},
          {"forest_bootstrap", forest_bootstrap}};
}

DetectorConfig DetectorConfig::from_json(const json& j) {
  DetectorConfig c;
  c.class_weighting = j.value("class_weighting", c.class_weighting);
  c.lda_shrinkage = j.value("lda_shrinkage", c.lda_shrinkage);
  c.svm_lambda = j.value("svm_lambda", c.svm_lambda);
  c.svm_epochs = j.value("svm_epochs", c.svm_epochs);
  c.svm_eta0 = j.value("svm_eta0", c.svm_eta0);
  c.mlp_hidden = j.value("mlp_hidden", c.mlp_hidden);
  c.mlp_epochs = j.value("mlp_epochs", c.mlp_epochs);
  c.mlp_learning_rate = j.value("mlp_learning_rate", c.mlp_learning_rate);
  c.mlp_momentum = j.value("mlp_momentum", c.mlp_momentum);
  c.mlp_batch_size = j.value("mlp_batch_size", c.mlp_batch_size);
  c.forest_trees = j.value("forest_trees", c.forest_trees);
  c.forest_depth = j.value("forest_depth", c.forest_depth);
  c.forest_max_features = j.value("forest_max_features", c.forest_max_features);
  c.forest_bootstrap = j.value("forest_bootstrap", c.forest_bootstrap);
  return c;
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& x) {
  Standardizer s;
  s.mean = x.colwise().mean();
  const Eigen::RowVectorXd var = (x.rowwise() - s.mean).array().square().colwise().mean();
  s.scale = var.array().sqrt();
  for (Eigen::Index k = 0; k < s.scale.size(); ++k) {
    if (!(s.scale[k] > 1e-12)) s.scale[k] = 1.0;
  }
  return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
  return (x.rowwise() - mean).array().rowwise() / scale.array();
}

namespace detail {

Eigen::VectorXd sample_weights(std::span<const int> y, bool class_weighting) {
  const auto n = static_cast<Eigen::Index>(y.size());
  Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
  if (!class_weighting) return w;
  double count[2] = {0, 0};
  for (int v : y) count[v] += 1;
  for (Eigen::Index i = 0; i < n; ++i) w[i] = static_cast<double>(n) / (2.0 * count[y[static_cast<std::size_t>(i)]]);
  return w;
}

}  // namespace detail

DetectorModel train_detector(DetectorKind kind, const Eigen::MatrixXd& x, std::span<const int> y,
                             FeatureKind feature_kind, const std::string& subset_id, const DetectorConfig& config,
                             std::uint64_t seed, std::vector<double>* loss_history) {
  if (x.rows() != static_cast<Eigen::Index>(y.size())) throw Error(ErrorKind::InvalidArgument, "row/label mismatch");
  if (x.cols() == 0) throw Error(ErrorKind::InvalidArgument, "zero-dimensional features");
  bool seen[2] = {false, false};
  for (int v : y) {
    if (v != 0 && v != 1) throw Error(ErrorKind::InvalidArgument, "labels must be 0 or 1");
    seen[v] = true;
  }
  if (!seen[0] || !seen[1]) throw Error(ErrorKind::ClassMissing, "training rows must contain both classes");

  DetectorModel m;
  m.kind_ = kind;
  m.feature_kind_ = feature_kind;
  m.subset_id_ = subset_id;
  m.seed_ = seed;
  m.standardizer_ = Standardizer::fit(x);
  const Eigen::MatrixXd z = m.standardizer_.apply(x);
  switch (kind) {
    case DetectorKind::LDA: m.params_ = detail::train_lda(z, y, config); break;
    case DetectorKind::LinearSVM: m.params_ = detail::train_linear_svm(z, y, config, seed, loss_history); break;
    case DetectorKind::MLP: m.params_ = detail::train_mlp(z, y, config, seed); break;
    case DetectorKind::RandomForest: m.params_ = detail::train_forest(z, y, config, seed); break;
  }
  return m;
}

std::pair<Eigen::MatrixXd, std::vector<int>> design_matrix(const std::vector<FeatureRow>& rows) {
  const std::size_t d = rows.empty() ? 0 : rows.front().values.size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
  std::vector<int> y(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].values.size() != d) throw Error(ErrorKind::FeatureMismatch, "ragged feature rows");
    for (std::size_t k = 0; k < d; ++k) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i].values[k];
    y[i] = rows[i].is_adversarial ? 1 : 0;
  }
  return {std::move(x), std::move(y)};
}

DetectorModel train_detector(DetectorKind kind, const FeatureTable& table, const DetectorConfig& config,
                             std::uint64_t seed, std::vector<double>* loss_history) {
  const auto train_rows = table.split_rows("train");
  if (train_rows.empty()) throw Error(ErrorKind::EmptySplit, "feature table has no train rows");
  const auto [x, y] = design_matrix(train_rows);
  return train_detector(kind, x, y, table.kind, table.subset_id, config, seed, loss_history);
}

DetectorModel select_on_dev(DetectorKind kind, const FeatureTable& table, const DetectorConfig& config,
                            std::uint64_t seed, json* selection_log) {
  std::vector<DetectorConfig> grid;
  for (int k = 0; k < 3; ++k) {
    DetectorConfig c = config;
    switch (kind) {
      case DetectorKind::LDA: c.lda_shrinkage = std::array{0.01, 0.1, 0.3}[k]; break;
      case DetectorKind::LinearSVM: c.svm_lambda = std::array{1e-4, 1e-3, 1e-2}[k]; break;
      case DetectorKind::MLP: c.mlp_epochs = std::array{20, 40, 80}[k]; break;
      case DetectorKind::RandomForest: c.forest_depth = std::array{1, 2, 3}[k]; break;
    }
    grid.push_back(c);
  }
  const auto dev_rows = table.split_rows("dev");
  if (dev_rows.empty()) throw Error(ErrorKind::EmptySplit, "feature table has no dev rows");
  std::optional<DetectorModel> best;
  double best_accuracy = -1.0;
  json log = json::array();
  for (const auto& c : grid) {
    DetectorModel m = train_detector(kind, table, c, seed);
    const double acc = evaluate(m, dev_rows, "dev").accuracy;
    log.push_back({{"config", c.to_json()}, {"dev_accuracy", acc}});
    if (acc > best_accuracy) {
      best_accuracy = acc;
      best = std::move(m);
    }
  }
  if (selection_log) *selection_log = std::move(log);
  return std::move(*best);
}

Verdict DetectorModel::predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& raw) const {
  if (raw.size() != standardizer_.mean.size()) {
    throw Error(ErrorKind::FeatureMismatch, "feature length " + std::to_string(raw.size()) + " differs from model's " +
                                                std::to_string(standardizer_.mean.size()));
  }
  const Eigen::RowVectorXd z = (raw - standardizer_.mean).array() / standardizer_.scale.array();
  return std::visit(
      [&](const auto& p) -> Verdict {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, LinearParams>) {
          return z.dot(p.weights.transpose()) + p.bias >= 0.0 ? Verdict::Adversarial : Verdict::Normal;
        } else if constexpr (std::is_same_v<P, MlpParams>) {
          return detail::mlp_logit(p, z) >= 0.0 ? Verdict::Adversarial : Verdict::Normal;
        } else {
          std::size_t adversarial = 0;
          for (const auto& tree : p.trees) adversarial += tree.predict(z) == Verdict::Adversarial;
          // Ties go to adversarial.
          return 2 * adversarial >= p.trees.size() ? Verdict::Adversarial : Verdict::Normal;
        }
      },
      params_);
}

Verdict DetectorModel::predict(const FeatureVector& f) const {
  if (f.kind != feature_kind_ || f.subset_id != subset_id_) {
    throw Error(ErrorKind::FeatureMismatch, "model expects " + to_string(feature_kind_) + "/" + subset_id_ +
                                                " features, got " + to_string(f.kind) + "/" + f.subset_id);
  }
  Eigen::RowVectorXd raw(static_cast<Eigen::Index>(f.values.size()));
  for (std::size_t k = 0; k < f.values.size(); ++k) raw[static_cast<Eigen::Index>(k)] = f.values[k];
  return predict_row(raw);
}

std::vector<Verdict> DetectorModel::predict_rows(const Eigen::MatrixXd& raw) const {
  std::vector<Verdict> out;
  out.reserve(static_cast<std::size_t>(raw.rows()));
  for (Eigen::Index i = 0; i < raw.rows(); ++i) out.push_back(predict_row(raw.row(i)));
  return out;
}

std::vector<std::uint8_t> DetectorModel::serialize(const json& metadata) const {
  BinaryWriter out;
  out.put_magic(kMagic);
  out.put_u32(kFormatVersion);
  out.put_string(metadata.dump());
  out.put_u8(static_cast<std::uint8_t>(kind_));
  out.put_u8(static_cast<std::uint8_t>(feature_kind_));
  out.put_string(subset_id_);
  out.put_u32(static_cast<std::uint32_t>(dimension()));
  out.put_u64(seed_);
  out.put_dense(standardizer_.mean);
  out.put_dense(standardizer_.scale);
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, LinearParams>) {
          out.put_dense(p.weights);
          out.put_f64(p.bias);
        } else if constexpr (std::is_same_v<P, MlpParams>) {
          out.put_u32(static_cast<std::uint32_t>(p.b1.size()));
          out.put_dense(p.w1);
          out.put_dense(p.b1);
          out.put_dense(p.w2);
          out.put_f64(p.b2);
        } else {
          out.put_u32(static_cast<std::uint32_t>(p.trees.size()));
          for (const auto& tree : p.trees) {
            out.put_u32(static_cast<std::uint32_t>(tree.nodes.size()));
            for (const auto& n : tree.nodes) {
              out.put_i32(n.feature);
              out.put_f64(n.threshold);
              out.put_i32(n.left);
              out.put_i32(n.right);
              out.put_u8(static_cast<std::uint8_t>(n.leaf));
            }
          }
        }
      },
      params_);
  return out.finish();
}

DetectorModel DetectorModel::deserialize(std::span<const std::uint8_t> bytes, json* metadata) {
  BinaryReader in(bytes);
  in.expect_magic(kMagic);
  if (const auto v = in.u32(); v != kFormatVersion) {
    throw Error(ErrorKind::VersionMismatch, "unsupported detector format version " + std::to_string(v));
  }
  const std::string meta = in.string();
  if (metadata) *metadata = json::parse(meta);
  DetectorModel m;
  const auto kind = in.u8();
  const auto feature_kind = in.u8();
  if (kind > 3 || feature_kind > 1) throw Error(ErrorKind::FormatError, "bad detector kind tag");
  m.kind_ = static_cast<DetectorKind>(kind);
  m.feature_kind_ = static_cast<FeatureKind>(feature_kind);
  m.subset_id_ = in.string();
  const auto d = static_cast<Eigen::Index>(in.u32());
  m.seed_ = in.u64();
  m.standardizer_.mean = in.dense(1, d);
  m.standardizer_.scale = in.dense(1, d);
  if ((m.standardizer_.scale.array() <= 0.0).any()) throw Error(ErrorKind::FormatError, "non-positive scale");
  switch (m.kind_) {
    case DetectorKind::LDA:
    case DetectorKind::LinearSVM: {
      LinearParams p;
      p.weights = in.vector(d);
      p.bias = in.f64();
      m.params_ = std::move(p);
      break;
    }
    case DetectorKind::MLP: {
      MlpParams p;
      const auto h = static_cast<Eigen::Index>(in.u32());
      p.w1 = in.dense(h, d);
      p.b1 = in.vector(h);
      p.w2 = in.vector(h);
      p.b2 = in.f64();
      m.params_ = std::move(p);
      break;
    }
    case DetectorKind::RandomForest: {
      ForestParams p;
      const auto trees = in.u32();
      for (std::uint32_t t = 0; t < trees; ++t) {
        DecisionTree tree;
        const auto nodes = in.u32();
        for (std::uint32_t k = 0; k < nodes; ++k) {
          TreeNode n;
          n.feature = in.i32();
          n.threshold = in.f64();
          n.left = in.i32();
          n.right = in.i32();
          n.leaf = in.u8() ? Verdict::Adversarial : Verdict::Normal;
          const bool leaf = n.feature < 0;
          if (!leaf && (n.feature >= d || n.left <= static_cast<std::int32_t>(k) ||
                        n.right <= static_cast<std::int32_t>(k) || n.left >= static_cast<std::int32_t>(nodes) ||
                        n.right >= static_cast<std::int32_t>(nodes))) {
            throw Error(ErrorKind::FormatError, "malformed tree node");
          }
          tree.nodes.push_back(n);
        }
        if (tree.nodes.empty()) throw Error(ErrorKind::FormatError, "empty tree");
        p.trees.push_back(std::move(tree));
      }
      m.params_ = std::move(p);
      break;
    }
  }
  in.expect_end();
  return m;
}

void DetectorModel::save(const std::filesystem::path& path, const json& metadata) const {
  write_file(path, serialize(metadata));
}

DetectorModel DetectorModel::load(const std::filesystem::path& path, json* metadata) {
  return deserialize(read_file(path), metadata);
}

// ---------------------------------------------------------------------------

int EvalReport::total() const { return confusion[0][0] + confusion[0][1] + confusion[1][0] + confusion[1][1]; }

json EvalReport::to_json() const {
  json families = json::object();
  for (const auto& [name, s] : per_family) {
    families[name] = {{"total", s.total}, {"correct", s.correct}, {"accuracy", s.accuracy()}};
  }
  return {{"split", split},
          {"total", total()},
          {"confusion", {{"tn", confusion[0][0]}, {"fp", confusion[0][1]}, {"fn", confusion[1][0]}, {"tp", confusion[1][1]}}},
          {"accuracy", accuracy},
          {"precision", precision},
          {"recall", recall},
          {"false_positive_rate", false_positive_rate},
          {"per_family", families}};
}

EvalReport EvalReport::from_json(const json& j) {
  EvalReport r;
  r.split = j.at("split").get<std::string>();
  const json& c = j.at("confusion");
  r.confusion = {{{c.at("tn").get<int>(), c.at("fp").get<int>()}, {c.at("fn").get<int>(), c.at("tp").get<int>()}}};
  r.accuracy = j.at("accuracy").get<double>();
  r.precision = j.at("precision").get<double>();
  r.recall = j.at("recall").get<double>();
  r.false_positive_rate = j.at("false_positive_rate").get<double>();
  for (const auto& [name, f] : j.at("per_family").items()) {
    r.per_family[name] = {f.at("total").get<int>(), f.at("correct").get<int>()};
  }
  return r;
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "split            " << split << " (" << total() << " rows)\n"
     << "accuracy         " << accuracy << '\n'
     << "precision        " << precision << '\n'
     << "recall           " << recall << '\n'
     << "false pos. rate  " << false_positive_rate << '\n'
     << "confusion        pred-normal  pred-adversarial\n"
     << "  normal         " << std::setw(11) << confusion[0][0] << "  " << std::setw(16) << confusion[0][1] << '\n'
     << "  adversarial    " << std::setw(11) << confusion[1][0] << "  " << std::setw(16) << confusion[1][1] << '\n'
     << "per family\n";
  for (const auto& [name, s] : per_family) {
    os << "  " << std::left << std::setw(14) << name << std::right << std::setw(6) << s.correct << '/' << std::setw(6)
       << s.total << "  " << s.accuracy() << '\n';
  }
  return os.str();
}

EvalReport evaluate(const DetectorModel& model, const std::vector<FeatureRow>& rows, const std::string& split) {
  if (rows.empty()) throw Error(ErrorKind::EmptySplit, "no rows in split '" + split + "'");
  EvalReport r;
  r.split = split;
  for (const auto& row : rows) {
    FeatureVector f{model.feature_kind(), model.subset_id(), row.backend_id, row.values};
    const int truth = row.is_adversarial ? 1 : 0;
    const int pred = model.predict(f) == Verdict::Adversarial ? 1 : 0;
    ++r.confusion[truth][pred];
    auto& fam = r.per_family[row.is_adversarial ? row.attack_family : std::string("normal")];
    ++fam.total;
    fam.correct += truth == pred;
  }
  const double tn = r.confusion[0][0];
  const double fp = r.confusion[0][1];
  const double fn = r.confusion[1][0];
  const double tp = r.confusion[1][1];
  r.accuracy = (tp + tn) / r.total();
  r.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  r.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  r.false_positive_rate = fp + tn > 0 ? fp / (fp + tn) : 0.0;
  return r;
}

std::vector<FeatureRow> balance_rows(const std::vector<FeatureRow>& rows, std::uint64_t seed) {
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < rows.size(); ++i) by_class[rows[i].is_adversarial ? 1 : 0].push_back(i);
  const std::size_t keep = std::min(by_class[0].size(), by_class[1].size());
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> chosen;
  for (auto& idx : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    chosen.insert(chosen.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(keep));
  }
  std::sort(chosen.begin(), chosen.end());
  std::vector<FeatureRow> out;
  out.reserve(chosen.size());
  for (auto i : chosen) out.push_back(rows[i]);
  return out;
}

}  // namespace advdetect
