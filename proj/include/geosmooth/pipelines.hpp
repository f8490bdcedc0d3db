#pragma once

#include <cstdint>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "geosmooth/classifier.hpp"
#include "geosmooth/errorbound.hpp"
#include "geosmooth/preprocess.hpp"
#include "geosmooth/smoothing.hpp"
#include "geosmooth/transform.hpp"

namespace geosmooth {

enum class Method { basespt, distspt, indivspt };
enum class Guarantee { heuristic, distributional, individual };

std::string to_string(Method m);
Method parse_method(std::string_view name);
std::string to_string(Guarantee g);

struct SmoothingConfig {
  double sigma_gamma = 30.0;
  int n0_gamma = 100;
  int n_gamma = 2000;
  double alpha_gamma = 0.01;
  double sigma_delta = 0.3;
  int n0_delta = 100;
  int n_delta = 200;
  double alpha_delta = 0.002;
  /// Extra proxy correction for the heuristic pipeline.
  double rho = 0.0;
  /// Optional per-dimension variances of the parameter noise (diagonal covariance).
  std::vector<double> variances;
  int batch_size = 64;

  void validate(int param_dim) const;
};

/// What the attacker may do and what the classifier sees.
struct TransformSetup {
  TransformKind kind = TransformKind::rotation;
  ParamBox gamma = ParamBox::symmetric(TransformKind::rotation, 30.0);
  Preprocessing pre;
};

struct Certificate {
  Method method = Method::basespt;
  int prediction = kAbstain;
  double p_A_lower = 0.0;
  /// Parameter-space radius, clipped to the circumradius of the box.
  double radius = 0.0;
  double radius_unclipped = 0.0;
  bool clipped = false;
  /// "parameter" (Euclidean) or "mahalanobis" when variances are set.
  std::string level = "parameter";
  Guarantee guarantee = Guarantee::heuristic;
  double rho = 0.0;
  std::optional<double> E_used;
  double alpha_E = 0.0;
  double q_E_lower = 1.0;
  double E_confidence = 0.0;
  bool random_attack_only = false;
  /// The certified ball contains the whole parameter box.
  bool covers_gamma = false;
  std::string abstain_reason;
  std::uint64_t seed = 0;
  SmoothingConfig config;
  TransformSetup setup;

  bool abstained() const { return prediction == kAbstain; }
};

nlohmann::json to_json(const Certificate& c);
nlohmann::json to_json(const SmoothingConfig& c);
nlohmann::json to_json(const TransformSetup& s);
nlohmann::json to_json(const ErrorBoundConfig& c);
nlohmann::json to_json(const ErrorBoundEstimate& e);

/// Parameter draw for one sample seed: N(0, sigma^2) per dimension, or N(0, var_d).
ParamPoint sample_parameter(std::uint64_t seed, int dim, double sigma, std::span<const double> variances = {});

/// Label of the base classifier on pre(T_beta x).
SeedLabeler make_base_labeler(const Image& x, const Classifier& base, const TransformSetup& setup,
                              const SmoothingConfig& cfg);
/// Label of the l2-smoothed classifier on pre(T_beta x), or kAbstain unless it is certified with radius >= E.
SeedLabeler make_robust_labeler(const Image& x, const Classifier& base, const TransformSetup& setup,
                                const SmoothingConfig& cfg, double E);

/// Parameter smoothing directly on the base classifier. Heuristic: ignores interpolation error.
Certificate basespt(const Image& x, const Classifier& base, const TransformSetup& setup, const SmoothingConfig& cfg,
                    std::uint64_t seed, int threads = 1);

/// Parameter smoothing over the l2-robust classifier with a distributional error bound.
Certificate distspt(const Image& x, const Classifier& base, const TransformSetup& setup, const SmoothingConfig& cfg,
                    const ErrorBoundEstimate& est, std::uint64_t seed, int threads = 1);

/// Per-input error bound from the inverse image, then the distspt path. Throws
/// InfeasibleInput when no sub-box of the parameter box can produce `observed`.
Certificate indivspt(const Image& observed, const Classifier& base, const TransformSetup& setup,
                     const SmoothingConfig& cfg, ErrorBoundConfig ecfg, double E, std::uint64_t seed, int threads = 1);

}  // namespace geosmooth
