#include "slideq/model_io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "slideq/error.hpp"

namespace fs = std::filesystem;

namespace slideq {
namespace {

using Json = nlohmann::ordered_json;

Json vec_json(const Eigen::VectorXd& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

Json mat_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vec_json(m.row(i).transpose()));
  return rows;
}

Eigen::VectorXd json_vec(const Json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

Eigen::MatrixXd json_mat(const Json& j, Eigen::Index cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Eigen::VectorXd row = json_vec(j[i]);
    if (row.size() != cols) throw Error(ErrorCode::ParseError, "ragged matrix in model file");
    m.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return m;
}

Json tree_json(const IsoTree& tree) {
  Json feature = Json::array(), split = Json::array(), left = Json::array(),
       right = Json::array(), size = Json::array();
  for (const IsoNode& n : tree.nodes()) {
    feature.push_back(n.feature);
    split.push_back(n.split);
    left.push_back(n.left);
    right.push_back(n.right);
    size.push_back(n.size);
  }
  return Json{{"feature", feature}, {"split", split}, {"left", left}, {"right", right},
              {"size", size}};
}

IsoTree json_tree(const Json& j) {
  const auto feature = j.at("feature").get<std::vector<int>>();
  const auto split = j.at("split").get<std::vector<double>>();
  const auto left = j.at("left").get<std::vector<int>>();
  const auto right = j.at("right").get<std::vector<int>>();
  const auto size = j.at("size").get<std::vector<int>>();
  const std::size_t n = feature.size();
  if (n == 0 || split.size() != n || left.size() != n || right.size() != n || size.size() != n) {
    throw Error(ErrorCode::ParseError, "malformed tree in model file");
  }
  std::vector<IsoNode> nodes(n);
  for (std::size_t i = 0; i < n; ++i) {
    nodes[i] = {feature[i], split[i], left[i], right[i], size[i]};
    if (feature[i] >= 0) {
      // Children always come after their parent; this also rules out cycles.
      const auto in_range = [&](int c) { return c > static_cast<int>(i) && c < static_cast<int>(n); };
      if (!in_range(left[i]) || !in_range(right[i])) {
        throw Error(ErrorCode::ParseError, "tree node references invalid child");
      }
    }
  }
  return IsoTree(std::move(nodes));
}

Json payload_json(const QualityModel& m) {
  Json trees = Json::array();
  for (const IsoTree& t : m.forest.trees()) trees.push_back(tree_json(t));
  return Json{
      {"created", m.created},
      {"fingerprint",
       {{"kind", m.fingerprint.kind}, {"dim", m.fingerprint.dim}, {"model_hash", m.fingerprint.model_hash}}},
      {"params",
       {{"trees", m.params.trees},
        {"subsample", m.params.subsample},
        {"contamination", m.params.contamination},
        {"seed", m.params.seed},
        {"height_limit", m.params.height_limit}}},
      {"pca",
       {{"mean", vec_json(m.pca.mean)},
        {"components", mat_json(m.pca.components)},
        {"explained_variance", vec_json(m.pca.explained_variance)}}},
      {"scaler", {{"mean", vec_json(m.scaler.mean)}, {"std", vec_json(m.scaler.std)}}},
      {"centroid", vec_json(m.centroid.centroid)},
      {"forest",
       {{"dim", m.forest.dim()}, {"flag_threshold", m.forest.flag_threshold()}, {"trees", trees}}},
  };
}

std::string checksum_of(const Json& payload) {
  const std::string text = payload.dump();
  return "fnv1a64:" + hex64(fnv1a64({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()}));
}

QualityModel model_from_payload(const Json& p) {
  QualityModel m;
  m.created = p.at("created").get<std::string>();
  const Json& fp = p.at("fingerprint");
  m.fingerprint = {fp.at("kind").get<std::string>(), fp.at("dim").get<int>(),
                   fp.at("model_hash").get<std::string>()};
  const Json& pr = p.at("params");
  m.params.trees = pr.at("trees").get<int>();
  m.params.subsample = pr.at("subsample").get<int>();
  m.params.contamination = pr.at("contamination").get<double>();
  m.params.seed = pr.at("seed").get<std::uint64_t>();
  m.params.height_limit = pr.at("height_limit").get<int>();
  m.params.validate();

  const Json& pca = p.at("pca");
  m.pca.mean = json_vec(pca.at("mean"));
  m.pca.components = json_mat(pca.at("components"), m.pca.mean.size());
  m.pca.explained_variance = json_vec(pca.at("explained_variance"));
  if (m.pca.explained_variance.size() != m.pca.k()) {
    throw Error(ErrorCode::ParseError, "explained_variance length differs from k");
  }
  m.scaler.mean = json_vec(p.at("scaler").at("mean"));
  m.scaler.std = json_vec(p.at("scaler").at("std"));
  if (m.scaler.std.size() != m.scaler.mean.size() || !(m.scaler.std.array() > 0.0).all()) {
    throw Error(ErrorCode::ParseError, "malformed scaler in model file");
  }
  m.centroid.centroid = json_vec(p.at("centroid"));

  const Json& f = p.at("forest");
  std::vector<IsoTree> trees;
  for (const Json& t : f.at("trees")) trees.push_back(json_tree(t));
  if (static_cast<int>(trees.size()) != m.params.trees) {
    throw Error(ErrorCode::ParseError, "tree count differs from params");
  }
  const auto dim = f.at("dim").get<Eigen::Index>();
  for (const IsoTree& t : trees) {
    for (const IsoNode& n : t.nodes()) {
      if (n.feature >= dim) throw Error(ErrorCode::ParseError, "split feature out of range");
    }
  }
  m.forest = IsolationForest(std::move(trees), m.params, dim, f.at("flag_threshold").get<double>());
  m.check_consistent();
  return m;
}

}  // namespace

void QualityModel::check_consistent() const {
  const Eigen::Index m = scaler.m();
  if (pca.k() + kMetricCount != m || forest.dim() != m || centroid.centroid.size() != m ||
      pca.mean.size() != pca.d() || fingerprint.dim != pca.d()) {
    throw Error(ErrorCode::ParseError, "model parts have inconsistent dimensions");
  }
}

std::string serialize_model(const QualityModel& model) {
  model.check_consistent();
  Json payload = payload_json(model);
  Json doc;
  doc["format_version"] = model.format_version;
  const std::string checksum = checksum_of(payload);
  doc["payload"] = std::move(payload);
  doc["checksum"] = checksum;
  return doc.dump() + "\n";
}

QualityModel deserialize_model(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("model file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("format_version") ||
      !doc["format_version"].is_number_integer()) {
    throw Error(ErrorCode::ParseError, "model file lacks format_version");
  }
  const auto version = doc["format_version"].get<std::int64_t>();
  if (version != kModelFormatVersion) {
    throw Error(ErrorCode::ModelVersionMismatch,
                "model format " + std::to_string(version) + ", supported " +
                    std::to_string(kModelFormatVersion));
  }
  if (!doc.contains("payload") || !doc.contains("checksum") || !doc["checksum"].is_string()) {
    throw Error(ErrorCode::ParseError, "model file lacks payload or checksum");
  }
  if (checksum_of(doc["payload"]) != doc["checksum"].get<std::string>()) {
    throw Error(ErrorCode::ChecksumMismatch, "model payload does not match its checksum");
  }
  try {
    return model_from_payload(doc["payload"]);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("malformed model payload: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ParseError) throw;
    throw Error(ErrorCode::ParseError, e.what());
  }
}

void save_model(const QualityModel& model, const fs::path& path) {
  const std::string text = serialize_model(model);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out << text;
    if (!out.flush()) throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot move model into place: " + ec.message());
}

QualityModel load_model(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open model " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_model(ss.str());
}

}  // namespace slideq
