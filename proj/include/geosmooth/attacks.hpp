#pragma once

#include <cstdint>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "geosmooth/classifier.hpp"
#include "geosmooth/dataset.hpp"
#include "geosmooth/pipelines.hpp"

namespace geosmooth {

struct AttackResult {
  ParamPoint gamma_star;
  double loss = 0.0;
  int original_id = 0;
  Image attacked;
  /// True when the backend gave no scores and 0/1 loss was used instead.
  bool zero_one_loss = false;
};

/// Cross-entropy of `label` under softmax(scores).
double cross_entropy(std::span<const double> scores, int label);

/// Samples k gammas uniformly from the box and keeps the one with the highest
/// loss of the true label on pre(q(T_gamma x)). Earliest draw wins ties.
AttackResult worst_of_k(const Image& x, int label, const Classifier& base, TransformKind kind, const ParamBox& box,
                        int k, std::uint64_t seed, const Preprocessing& pre = {}, bool quantize = true,
                        int original_id = 0);

struct AttackConfig {
  int k = 100;
  int attacks_per_image = 3;
  bool quantize = true;
};

struct EvalRecord {
  int image_id = 0;
  int attack_index = 0;
  int label = 0;
  ParamPoint gamma_star;
  int base_clean = kAbstain;
  int base_attacked = kAbstain;
  Certificate certificate;
  /// Error bound pipelines only: the certificate covers gamma_star.
  bool covers_attack = false;
  double seconds = 0.0;
  std::string error;
};

struct EvalSummary {
  int records = 0;
  double base_clean_accuracy = 0.0;
  double base_attacked_accuracy = 0.0;
  /// Smoothed classifier correct on the attacked image.
  double smoothed_accuracy = 0.0;
  /// Correct and certified with a positive radius.
  double certified_accuracy = 0.0;
  /// Radius percentiles over certified-correct records.
  double radius_p25 = 0.0;
  double radius_p50 = 0.0;
  double radius_p75 = 0.0;
  bool p25_clipped = false;
  bool p50_clipped = false;
  bool p75_clipped = false;
  double mean_seconds = 0.0;
};

struct EvalOptions {
  Method method = Method::distspt;
  TransformSetup setup;
  SmoothingConfig smoothing;
  AttackConfig attack;
  /// distspt: the verified estimate. indivspt: E and the bound settings.
  ErrorBoundEstimate estimate;
  ErrorBoundConfig error_config;
  double E = 0.7;
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Linear-interpolated percentile (q in [0, 100]) of an unsorted list.
double percentile(std::vector<double> values, double q);

/// Attacks every image and certifies each attacked input with the chosen pipeline.
std::vector<EvalRecord> evaluate_defense(const Dataset& data, const Classifier& attack_model,
                                         const Classifier& base, const EvalOptions& opts);
EvalSummary summarize(const std::vector<EvalRecord>& records);

nlohmann::json to_json(const EvalRecord& r);
nlohmann::json to_json(const EvalSummary& s);
std::string summary_csv_header();
std::string to_csv_row(const EvalSummary& s);
/// Rebuilds the summary from JSON-lines records as written by to_json(EvalRecord).
EvalSummary summarize_jsonl(const std::string& jsonl);

}  // namespace geosmooth
