#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "geosmooth/dataset.hpp"
#include "geosmooth/inverse.hpp"
#include "geosmooth/preprocess.hpp"
#include "geosmooth/transform.hpp"

namespace geosmooth {

/// How the max over gamma in a box is taken: a sound interval bound, or the
/// largest of k uniformly sampled gammas (only valid against random attacks).
enum class GammaMode { interval_max, sampled };

struct ErrorBoundConfig {
  TransformKind kind = TransformKind::rotation;
  ParamBox gamma = ParamBox::symmetric(TransformKind::rotation, 30.0);
  double sigma_gamma = 30.0;
  /// Sub-boxes per parameter dimension.
  int n_splits = 4;
  double alpha_E = 0.001;
  int n_beta = 8000;
  int n_x = 1000;
  /// Outer confidence 1 - alpha.
  double confidence = 0.999;
  /// Error rate of each per-image test over beta; defaults to the outer alpha.
  std::optional<double> inner_alpha;
  Preprocessing pre;
  /// The attacker's intermediate image is stored with 8 bits.
  bool quantize = true;
  GammaMode gamma_mode = GammaMode::interval_max;
  int gamma_samples = 10;
  int refinements = 10;
  /// Largest alpha_E an individual bound may derive before the input is rejected.
  double max_individual_alpha_E = 0.1;
  std::uint64_t seed = 0;
  int threads = 1;

  double outer_alpha() const { return 1.0 - confidence; }
  double inner_test_alpha() const { return inner_alpha.value_or(outer_alpha()); }
  void validate() const;
};

struct ErrorBoundEstimate {
  double E = 0.0;
  double alpha_E = 0.0;
  double q_E_lower = 0.0;
  double confidence = 0.0;
  double eps_max_observed = 0.0;
  int n_x = 0;
  int n_beta = 0;
  /// Images (or beta draws, for individual bounds) that passed.
  int successes = 0;
  bool random_attack_only = false;
  bool passed = false;
};

/// ||pre(T_beta(q(T_gamma x))) - pre(T_{beta+gamma} x)||_2, q the 8-bit store when quantize is set.
double epsilon_concrete(const Image& x, std::span<const double> beta, std::span<const double> gamma, TransformKind kind,
                        const Preprocessing& pre = {}, bool quantize = false);

struct SplitBound {
  double bound = 0.0;
  int split_index = 0;
};

/// Sound upper bound on max over gamma in the box of epsilon_concrete, taken as the
/// largest per-split interval bound.
SplitBound epsilon_interval_max(const Image& x, std::span<const double> beta, const ParamBox& gamma, int n_splits,
                                TransformKind kind, const Preprocessing& pre = {}, bool quantize = false);

/// Largest epsilon_concrete over k gammas drawn uniformly from the box.
SplitBound epsilon_sampled_max(const Image& x, std::span<const double> beta, const ParamBox& gamma, int k,
                               TransformKind kind, std::mt19937_64& rng, const Preprocessing& pre = {},
                               bool quantize = false);

/// N(0, sigma^2) in every parameter dimension.
ParamPoint sample_beta(std::mt19937_64& rng, int dim, double sigma);

struct ScanRecord {
  int image_id = 0;
  ParamPoint beta;
  double bound = 0.0;
  int split_index = 0;
};

std::string to_jsonl(const ScanRecord& r);

struct ScanResult {
  double E = 0.0;
  double eps_max = 0.0;
  std::vector<ScanRecord> records;
};

/// Bounds for the first n_x images with n_beta draws each; E = 1.5 x the largest bound.
ScanResult propose_E(const Dataset& data, const ErrorBoundConfig& cfg);

/// Estimates q_E = P_x(P_beta(max_gamma ||eps|| <= E) >= 1 - alpha_E).
ErrorBoundEstimate estimate_E_distributional(const Dataset& data, const ErrorBoundConfig& cfg, double E);

struct SplitInverse {
  ParamBox box;
  InverseResult inverse;
};

/// Inverse images of `observed` for every sub-box of cfg.gamma, computed once.
std::vector<SplitInverse> compute_split_inverses(const Image& observed, const ErrorBoundConfig& cfg);

/// max over feasible splits of ||pre(T_beta(x')) - pre(T_{beta+box}(inverse))||_2, upper end.
/// split_index is -1 when every split is infeasible.
SplitBound individual_bound(const Image& observed, std::span<const double> beta, std::span<const SplitInverse> splits,
                            const ErrorBoundConfig& cfg);

/// Checks E on one observed input. alpha_E in the result is derived from the
/// beta draws at cfg.confidence. Throws InfeasibleInput when no split is feasible.
ErrorBoundEstimate estimate_E_individual(const Image& observed, const ErrorBoundConfig& cfg, double E,
                                         std::span<const SplitInverse> splits);

}  // namespace geosmooth
