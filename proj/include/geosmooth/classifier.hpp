#pragma once

#include <chrono>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "geosmooth/image.hpp"

namespace geosmooth {

/// Base classifier. Implementations must be deterministic: equal batches give
/// equal labels, and a batch gives the same labels as its elements one by one.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual int num_classes() const = 0;
  virtual GridGeometry input_geometry() const = 0;
  virtual std::vector<int> classify_batch(std::span<const Image> batch) const;

  /// Per-class scores (logits). Backends without scores throw std::logic_error.
  virtual bool has_scores() const { return false; }
  virtual std::vector<std::vector<double>> scores_batch(std::span<const Image> batch) const;

  /// True when calls may run concurrently from several threads.
  virtual bool reentrant() const { return true; }

  int classify(const Image& x) const;
  std::vector<double> scores(const Image& x) const;

 protected:
  void check_batch(std::span<const Image> batch) const;
};

/// Argmax with ties broken toward the lowest index.
int argmax(std::span<const double> v);

enum class Activation { relu, none };

struct DenseLayer {
  int in = 0;
  int out = 0;
  /// Row-major out x in.
  std::vector<double> weights;
  std::vector<double> bias;
  Activation activation = Activation::relu;
  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct MlpWeights {
  std::vector<DenseLayer> layers;
  int num_classes = 0;
  friend bool operator==(const MlpWeights&, const MlpWeights&) = default;
};

/// Parse and validate a weights document. Throws FormatError naming the JSON path.
MlpWeights parse_mlp_weights(const std::string& json_text);
MlpWeights load_mlp_weights(const std::string& path);
std::string dump_mlp_weights(const MlpWeights& w);
void save_mlp_weights(const MlpWeights& w, const std::string& path);

/// Fully connected network over the flattened [channel][row][col] image.
class MlpClassifier : public Classifier {
 public:
  MlpClassifier(MlpWeights weights, GridGeometry geometry);
  ~MlpClassifier() override;

  int num_classes() const override { return weights_.num_classes; }
  GridGeometry input_geometry() const override { return geometry_; }
  bool has_scores() const override { return true; }
  std::vector<std::vector<double>> scores_batch(std::span<const Image> batch) const override;
  const MlpWeights& weights() const { return weights_; }

 private:
  struct Impl;
  MlpWeights weights_;
  GridGeometry geometry_;
  std::unique_ptr<Impl> impl_;
};

/// Nearest prototype in Euclidean distance; scores are negated squared distances.
class CentroidClassifier : public Classifier {
 public:
  explicit CentroidClassifier(std::vector<Image> prototypes);

  static CentroidClassifier load(const std::string& path);
  static CentroidClassifier fit(std::span<const Image> images, std::span<const int> labels, int num_classes);
  void save(const std::string& path) const;

  int num_classes() const override { return static_cast<int>(prototypes_.size()); }
  GridGeometry input_geometry() const override { return prototypes_.front().geometry(); }
  bool has_scores() const override { return true; }
  std::vector<std::vector<double>> scores_batch(std::span<const Image> batch) const override;
  const std::vector<Image>& prototypes() const { return prototypes_; }

 private:
  std::vector<Image> prototypes_;
};

/// Child process speaking line-delimited JSON over stdin/stdout.
///
/// Request:  {"id":n,"shape":[h,w,c],"images":[[row-major h*w*c floats],...]}
/// Response: {"id":n,"labels":[...]} with optional "scores":[[...],...]
class ExternalClassifier : public Classifier {
 public:
  ExternalClassifier(std::string command, GridGeometry geometry, int num_classes,
                     std::chrono::milliseconds timeout = std::chrono::seconds(30));
  ~ExternalClassifier() override;
  ExternalClassifier(const ExternalClassifier&) = delete;
  ExternalClassifier& operator=(const ExternalClassifier&) = delete;

  int num_classes() const override { return num_classes_; }
  GridGeometry input_geometry() const override { return geometry_; }
  std::vector<int> classify_batch(std::span<const Image> batch) const override;
  bool has_scores() const override { return scores_supported_; }
  std::vector<std::vector<double>> scores_batch(std::span<const Image> batch) const override;
  bool reentrant() const override { return false; }

 private:
  struct Reply {
    std::vector<int> labels;
    std::vector<std::vector<double>> scores;
  };
  Reply request(std::span<const Image> batch) const;
  std::string read_line() const;

  std::string command_;
  GridGeometry geometry_;
  int num_classes_;
  std::chrono::milliseconds timeout_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  mutable std::string buffer_;
  mutable long next_id_ = 0;
  mutable bool scores_supported_ = true;
  mutable std::mutex mu_;
};

/// Builds a classifier from a spec string: "mlp:PATH", "centroid:PATH" or "external:COMMAND".
std::unique_ptr<Classifier> make_classifier(const std::string& spec, GridGeometry geometry, int num_classes = 10);

}  // namespace geosmooth
