#include "geosmooth/classifier.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

#include "geosmooth/errors.hpp"

namespace geosmooth {

using json = nlohmann::json;

std::vector<int> Classifier::classify_batch(std::span<const Image> batch) const {
  const auto s = scores_batch(batch);
  std::vector<int> out;
  out.reserve(s.size());
  for (const auto& row : s) out.push_back(argmax(row));
  return out;
}

std::vector<std::vector<double>> Classifier::scores_batch(std::span<const Image>) const {
  throw std::logic_error("classifier backend does not provide scores");
}

int Classifier::classify(const Image& x) const { return classify_batch(std::span<const Image>(&x, 1)).front(); }

std::vector<double> Classifier::scores(const Image& x) const {
  return scores_batch(std::span<const Image>(&x, 1)).front();
}

void Classifier::check_batch(std::span<const Image> batch) const {
  const GridGeometry g = input_geometry();
  for (std::size_t k = 0; k < batch.size(); ++k) {
    if (batch[k].geometry() != g) {
      throw DomainError("classifier: image " + std::to_string(k) + " has shape " +
                        std::to_string(batch[k].width()) + "x" + std::to_string(batch[k].height()) + "x" +
                        std::to_string(batch[k].channels()) + ", expected " + std::to_string(g.width) + "x" +
                        std::to_string(g.height) + "x" + std::to_string(g.channels));
    }
  }
}

int argmax(std::span<const double> v) {
  int best = 0;
  for (int k = 1; k < static_cast<int>(v.size()); ++k) {
    if (v[k] > v[best]) best = k;
  }
  return best;
}

// ---- MLP weights -----------------------------------------------------------

namespace {

[[noreturn]] void schema_error(const std::string& path, const std::string& msg) {
  throw FormatError("weights" + path + ": " + msg);
}

std::vector<double> read_numbers(const json& j, const std::string& path) {
  if (!j.is_array()) schema_error(path, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (std::size_t k = 0; k < j.size(); ++k) {
    if (!j[k].is_number()) schema_error(path + "[" + std::to_string(k) + "]", "expected a number");
    const double v = j[k].get<double>();
    if (!std::isfinite(v)) schema_error(path + "[" + std::to_string(k) + "]", "non-finite value");
    out.push_back(v);
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(path + ": cannot open for writing");
  out << text;
}

}  // namespace

MlpWeights parse_mlp_weights(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("weights: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) schema_error("", "expected an object");
  if (!doc.contains("layers")) schema_error("", "missing \"layers\"");
  if (!doc.contains("num_classes") || !doc["num_classes"].is_number_integer()) {
    schema_error(".num_classes", "expected an integer");
  }
  for (const auto& [key, _] : doc.items()) {
    if (key != "layers" && key != "num_classes") schema_error("." + key, "unknown key");
  }
  MlpWeights w;
  w.num_classes = doc["num_classes"].get<int>();
  if (w.num_classes < 1) schema_error(".num_classes", "must be >= 1");
  const json& layers = doc["layers"];
  if (!layers.is_array() || layers.empty()) schema_error(".layers", "expected a non-empty array");

  for (std::size_t li = 0; li < layers.size(); ++li) {
    const std::string lp = ".layers[" + std::to_string(li) + "]";
    const json& l = layers[li];
    if (!l.is_object()) schema_error(lp, "expected an object");
    for (const auto& [key, _] : l.items()) {
      if (key != "weights" && key != "bias" && key != "activation") schema_error(lp + "." + key, "unknown key");
    }
    if (!l.contains("weights") || !l["weights"].is_array() || l["weights"].empty()) {
      schema_error(lp + ".weights", "expected a non-empty matrix");
    }
    DenseLayer d;
    d.out = static_cast<int>(l["weights"].size());
    for (int r = 0; r < d.out; ++r) {
      const std::string rp = lp + ".weights[" + std::to_string(r) + "]";
      auto row = read_numbers(l["weights"][r], rp);
      if (r == 0) {
        d.in = static_cast<int>(row.size());
        if (d.in == 0) schema_error(rp, "empty row");
      } else if (static_cast<int>(row.size()) != d.in) {
        schema_error(rp, "expected " + std::to_string(d.in) + " columns, got " + std::to_string(row.size()));
      }
      d.weights.insert(d.weights.end(), row.begin(), row.end());
    }
    if (!l.contains("bias")) schema_error(lp + ".bias", "missing");
    d.bias = read_numbers(l["bias"], lp + ".bias");
    if (static_cast<int>(d.bias.size()) != d.out) {
      schema_error(lp + ".bias", "expected " + std::to_string(d.out) + " values, got " + std::to_string(d.bias.size()));
    }
    const std::string act = l.value("activation", std::string("relu"));
    if (act == "relu") {
      d.activation = Activation::relu;
    } else if (act == "none") {
      d.activation = Activation::none;
    } else {
      schema_error(lp + ".activation", "expected \"relu\" or \"none\", got \"" + act + "\"");
    }
    if (!w.layers.empty() && w.layers.back().out != d.in) {
      schema_error(lp + ".weights", "input width " + std::to_string(d.in) + " does not match previous output " +
                                        std::to_string(w.layers.back().out));
    }
    w.layers.push_back(std::move(d));
  }
  if (w.layers.back().out != w.num_classes) {
    schema_error(".layers[" + std::to_string(w.layers.size() - 1) + "]",
                 "output width " + std::to_string(w.layers.back().out) + " does not match num_classes");
  }
  return w;
}

MlpWeights load_mlp_weights(const std::string& path) {
  try {
    return parse_mlp_weights(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

std::string dump_mlp_weights(const MlpWeights& w) {
  json doc;
  doc["num_classes"] = w.num_classes;
  doc["layers"] = json::array();
  for (const auto& l : w.layers) {
    json jl;
    jl["weights"] = json::array();
    for (int r = 0; r < l.out; ++r) {
      jl["weights"].push_back(std::vector<double>(l.weights.begin() + std::size_t(r) * l.in,
                                                  l.weights.begin() + std::size_t(r + 1) * l.in));
    }
    jl["bias"] = l.bias;
    jl["activation"] = l.activation == Activation::relu ? "relu" : "none";
    doc["layers"].push_back(std::move(jl));
  }
  return doc.dump();
}

void save_mlp_weights(const MlpWeights& w, const std::string& path) { write_file(path, dump_mlp_weights(w)); }

// ---- MLP -------------------------------------------------------------------

struct MlpClassifier::Impl {
  std::vector<Eigen::MatrixXf> w;
  std::vector<Eigen::VectorXf> b;
};

MlpClassifier::MlpClassifier(MlpWeights weights, GridGeometry geometry)
    : weights_(std::move(weights)), geometry_(geometry), impl_(std::make_unique<Impl>()) {
  if (weights_.layers.empty()) throw FormatError("weights: no layers");
  if (weights_.layers.front().in != static_cast<int>(geometry_.size())) {
    throw FormatError("weights: first layer expects " + std::to_string(weights_.layers.front().in) +
                      " inputs but images have " + std::to_string(geometry_.size()) + " values");
  }
  for (const auto& l : weights_.layers) {
    Eigen::MatrixXf m(l.out, l.in);
    for (int r = 0; r < l.out; ++r) {
      for (int c = 0; c < l.in; ++c) m(r, c) = static_cast<float>(l.weights[std::size_t(r) * l.in + c]);
    }
    impl_->w.push_back(std::move(m));
    Eigen::VectorXf bv(l.out);
    for (int r = 0; r < l.out; ++r) bv(r) = static_cast<float>(l.bias[r]);
    impl_->b.push_back(std::move(bv));
  }
}

MlpClassifier::~MlpClassifier() = default;

std::vector<std::vector<double>> MlpClassifier::scores_batch(std::span<const Image> batch) const {
  check_batch(batch);
  // Fixed-width, zero-padded blocks: every product has the same shape, so a
  // column's result never depends on its neighbours or the batch size.
  constexpr Eigen::Index kBlock = 16;
  const Eigen::Index in = static_cast<Eigen::Index>(geometry_.size());
  std::vector<std::vector<double>> out(batch.size());
  for (std::size_t start = 0; start < batch.size(); start += kBlock) {
    const std::size_t len = std::min<std::size_t>(kBlock, batch.size() - start);
    Eigen::MatrixXf act = Eigen::MatrixXf::Zero(in, kBlock);
    for (std::size_t k = 0; k < len; ++k) {
      const auto& px = batch[start + k].data();
      for (Eigen::Index i = 0; i < in; ++i) act(i, static_cast<Eigen::Index>(k)) = static_cast<float>(px[i]);
    }
    for (std::size_t li = 0; li < impl_->w.size(); ++li) {
      Eigen::MatrixXf next = impl_->w[li] * act;
      next.colwise() += impl_->b[li];
      if (weights_.layers[li].activation == Activation::relu) next = next.cwiseMax(0.0f);
      act = std::move(next);
    }
    for (std::size_t k = 0; k < len; ++k) {
      auto& row = out[start + k];
      row.resize(act.rows());
      for (Eigen::Index r = 0; r < act.rows(); ++r) row[r] = act(r, static_cast<Eigen::Index>(k));
    }
  }
  return out;
}

// ---- Centroid --------------------------------------------------------------

CentroidClassifier::CentroidClassifier(std::vector<Image> prototypes) : prototypes_(std::move(prototypes)) {
  if (prototypes_.empty()) throw DomainError("CentroidClassifier: no prototypes");
  for (const auto& p : prototypes_) {
    if (p.geometry() != prototypes_.front().geometry()) throw DomainError("CentroidClassifier: mixed shapes");
  }
}

CentroidClassifier CentroidClassifier::fit(std::span<const Image> images, std::span<const int> labels,
                                           int num_classes) {
  if (images.empty() || images.size() != labels.size()) throw DomainError("CentroidClassifier::fit: bad data");
  const GridGeometry g = images.front().geometry();
  std::vector<Image> protos(num_classes, Image(g));
  std::vector<int> counts(num_classes, 0);
  for (std::size_t k = 0; k < images.size(); ++k) {
    const int c = labels[k];
    if (c < 0 || c >= num_classes) throw DomainError("CentroidClassifier::fit: label out of range");
    for (std::size_t i = 0; i < g.size(); ++i) protos[c].data()[i] += images[k].data()[i];
    ++counts[c];
  }
  for (int c = 0; c < num_classes; ++c) {
    if (counts[c] == 0) continue;
    for (double& v : protos[c].data()) v /= counts[c];
  }
  return CentroidClassifier(std::move(protos));
}

CentroidClassifier CentroidClassifier::load(const std::string& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw FormatError(path + ": invalid JSON: " + e.what());
  }
  if (!doc.contains("shape") || !doc["shape"].is_array() || doc["shape"].size() != 3) {
    throw FormatError(path + ": .shape must be [height, width, channels]");
  }
  const GridGeometry g(doc["shape"][1].get<int>(), doc["shape"][0].get<int>(), doc["shape"][2].get<int>());
  if (!doc.contains("prototypes") || !doc["prototypes"].is_array() || doc["prototypes"].empty()) {
    throw FormatError(path + ": .prototypes must be a non-empty array");
  }
  std::vector<Image> protos;
  for (std::size_t k = 0; k < doc["prototypes"].size(); ++k) {
    const std::string p = ".prototypes[" + std::to_string(k) + "]";
    auto v = read_numbers(doc["prototypes"][k], p);
    if (v.size() != g.size()) throw FormatError(path + ": " + p + " has wrong length");
    protos.emplace_back(g, std::move(v));
  }
  return CentroidClassifier(std::move(protos));
}

void CentroidClassifier::save(const std::string& path) const {
  const GridGeometry g = input_geometry();
  json doc;
  doc["shape"] = {g.height, g.width, g.channels};
  doc["prototypes"] = json::array();
  for (const auto& p : prototypes_) doc["prototypes"].push_back(p.data());
  write_file(path, doc.dump());
}

std::vector<std::vector<double>> CentroidClassifier::scores_batch(std::span<const Image> batch) const {
  check_batch(batch);
  std::vector<std::vector<double>> out(batch.size(), std::vector<double>(prototypes_.size()));
  for (std::size_t k = 0; k < batch.size(); ++k) {
    for (std::size_t c = 0; c < prototypes_.size(); ++c) {
      const double d = l2_distance(batch[k], prototypes_[c]);
      out[k][c] = -d * d;
    }
  }
  return out;
}

std::unique_ptr<Classifier> make_classifier(const std::string& spec, GridGeometry geometry, int num_classes) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw DomainError("classifier spec must look like KIND:ARG, got '" + spec + "'");
  const std::string kind = spec.substr(0, colon);
  const std::string arg = spec.substr(colon + 1);
  if (kind == "mlp") return std::make_unique<MlpClassifier>(load_mlp_weights(arg), geometry);
  if (kind == "centroid") return std::make_unique<CentroidClassifier>(CentroidClassifier::load(arg));
  if (kind == "external") return std::make_unique<ExternalClassifier>(arg, geometry, num_classes);
  throw DomainError("unknown classifier kind '" + kind + "'");
}

}  // namespace geosmooth
