#include "geosmooth/errorbound.hpp"

#include <algorithm>
#include <cstdio>
#include <json.hpp>

#include "geosmooth/errors.hpp"
#include "geosmooth/parallel.hpp"
#include "geosmooth/stats.hpp"

namespace geosmooth {

namespace {

void check_probability(double p, const char* name) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError(std::string(name) + " must be in (0, 1)");
}

void warn_power(int n, const char* what) {
  if (n < 30) std::fprintf(stderr, "warning: %s = %d gives little statistical power\n", what, n);
}

std::vector<double> sum(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.begin(), a.end());
  for (std::size_t d = 0; d < out.size(); ++d) out[d] += b[d];
  return out;
}

double interval_diff_norm(const IntervalImage& a, const IntervalImage& b) {
  std::vector<Interval> diff(a.data().size());
  for (std::size_t k = 0; k < diff.size(); ++k) diff[k] = a.data()[k] - b.data()[k];
  return norm2(diff).hi();
}

SplitBound bound_for(const Image& x, std::span<const double> beta, const ErrorBoundConfig& cfg, std::mt19937_64& rng) {
  if (cfg.gamma_mode == GammaMode::sampled) {
    return epsilon_sampled_max(x, beta, cfg.gamma, cfg.gamma_samples, cfg.kind, rng, cfg.pre, cfg.quantize);
  }
  return epsilon_interval_max(x, beta, cfg.gamma, cfg.n_splits, cfg.kind, cfg.pre, cfg.quantize);
}

}  // namespace

void ErrorBoundConfig::validate() const {
  if (gamma.dim() != param_dim(kind)) throw DomainError("gamma box dimension does not match the transform");
  if (!(sigma_gamma > 0.0)) throw DomainError("sigma_gamma must be positive");
  if (n_splits < 1) throw DomainError("n_splits must be >= 1");
  check_probability(alpha_E, "alpha_E");
  check_probability(confidence, "confidence");
  if (inner_alpha) check_probability(*inner_alpha, "inner_alpha");
  check_probability(max_individual_alpha_E, "max_individual_alpha_E");
  if (n_beta < 1 || n_x < 1) throw DomainError("n_beta and n_x must be >= 1");
  if (gamma_mode == GammaMode::sampled && gamma_samples < 1) throw DomainError("gamma_samples must be >= 1");
  if (refinements < 0) throw DomainError("refinements must be >= 0");
}

double epsilon_concrete(const Image& x, std::span<const double> beta, std::span<const double> gamma, TransformKind kind,
                        const Preprocessing& pre, bool quantize) {
  Image mid = apply_transform(x, kind, gamma);
  if (quantize) mid = quantize8(mid);
  const Image a = preprocess(apply_transform(mid, kind, beta), pre);
  const Image b = preprocess(apply_transform(x, kind, sum(beta, gamma)), pre);
  return l2_distance(a, b);
}

SplitBound epsilon_interval_max(const Image& x, std::span<const double> beta, const ParamBox& gamma, int n_splits,
                                TransformKind kind, const Preprocessing& pre, bool quantize) {
  const ParamBox beta_box = ParamBox::point(beta);
  const IntervalImage xi = to_interval_image(x);
  SplitBound best{-1.0, 0};
  const auto splits = gamma.split(n_splits);
  for (std::size_t k = 0; k < splits.size(); ++k) {
    IntervalImage mid = apply_transform_interval(xi, kind, splits[k]);
    if (quantize) mid = quantize_widen(mid);
    const IntervalImage a = preprocess(apply_transform_interval(mid, kind, beta_box), pre);
    const IntervalImage b = preprocess(apply_transform_interval(xi, kind, splits[k].shifted(beta)), pre);
    const double v = interval_diff_norm(a, b);
    if (v > best.bound) best = {v, static_cast<int>(k)};
  }
  return best;
}

SplitBound epsilon_sampled_max(const Image& x, std::span<const double> beta, const ParamBox& gamma, int k,
                               TransformKind kind, std::mt19937_64& rng, const Preprocessing& pre, bool quantize) {
  if (k < 1) throw DomainError("epsilon_sampled_max: k must be >= 1");
  SplitBound best{-1.0, 0};
  for (int s = 0; s < k; ++s) {
    const ParamPoint g = gamma.sample_uniform(rng);
    const double v = epsilon_concrete(x, beta, g, kind, pre, quantize);
    if (v > best.bound) best = {v, s};
  }
  return best;
}

ParamPoint sample_beta(std::mt19937_64& rng, int dim, double sigma) {
  std::normal_distribution<double> nd(0.0, sigma);
  ParamPoint b(dim);
  for (double& v : b) v = nd(rng);
  return b;
}

std::string to_jsonl(const ScanRecord& r) {
  nlohmann::json j;
  j["image_id"] = r.image_id;
  j["beta"] = r.beta;
  j["bound"] = r.bound;
  j["split_index"] = r.split_index;
  return j.dump();
}

ScanResult propose_E(const Dataset& data, const ErrorBoundConfig& cfg) {
  cfg.validate();
  const int n = std::min<int>(cfg.n_x, static_cast<int>(data.size()));
  if (n == 0) throw DomainError("propose_E: empty scan");
  std::mt19937_64 master(cfg.seed);
  std::vector<std::uint64_t> seeds(n);
  for (auto& s : seeds) s = master();

  std::vector<std::vector<ScanRecord>> per_image(n);
  parallel_for(n, cfg.threads, [&](std::size_t i) {
    std::mt19937_64 rng(seeds[i]);
    for (int b = 0; b < cfg.n_beta; ++b) {
      ParamPoint beta = sample_beta(rng, param_dim(cfg.kind), cfg.sigma_gamma);
      const SplitBound sb = bound_for(data.images[i], beta, cfg, rng);
      per_image[i].push_back({static_cast<int>(i), std::move(beta), sb.bound, sb.split_index});
    }
  });

  ScanResult res;
  for (auto& v : per_image) {
    for (auto& r : v) {
      res.eps_max = std::max(res.eps_max, r.bound);
      res.records.push_back(std::move(r));
    }
  }
  res.E = 1.5 * res.eps_max;
  return res;
}

ErrorBoundEstimate estimate_E_distributional(const Dataset& data, const ErrorBoundConfig& cfg, double E) {
  cfg.validate();
  if (!(E > 0.0)) throw DomainError("estimate_E_distributional: E must be positive");
  if (data.empty()) throw DomainError("estimate_E_distributional: empty dataset");
  warn_power(cfg.n_x, "n_x");
  warn_power(cfg.n_beta, "n_beta");

  const double a_in = cfg.inner_test_alpha();
  // Fewest successes out of n_beta for which the inner test passes.
  int k_min = cfg.n_beta + 1;
  for (int k = cfg.n_beta; k >= 0; --k) {
    if (clopper_pearson_lower(k, cfg.n_beta, a_in) >= 1.0 - cfg.alpha_E) {
      k_min = k;
    } else {
      break;
    }
  }
  const int max_failures = cfg.n_beta - k_min;

  std::mt19937_64 master(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  std::vector<std::size_t> idx(cfg.n_x);
  std::vector<std::uint64_t> seeds(cfg.n_x);
  for (int i = 0; i < cfg.n_x; ++i) {
    idx[i] = pick(master);
    seeds[i] = master();
  }

  std::vector<char> positive(cfg.n_x, 0);
  std::vector<double> eps_max(cfg.n_x, 0.0);
  const bool finite_E = std::isfinite(E);
  parallel_for(cfg.n_x, cfg.threads, [&](std::size_t i) {
    if (max_failures < 0) return;
    if (!finite_E) {
      positive[i] = 1;
      return;
    }
    std::mt19937_64 rng(seeds[i]);
    int failures = 0;
    for (int b = 0; b < cfg.n_beta && failures <= max_failures; ++b) {
      const ParamPoint beta = sample_beta(rng, param_dim(cfg.kind), cfg.sigma_gamma);
      const double v = bound_for(data.images[idx[i]], beta, cfg, rng).bound;
      eps_max[i] = std::max(eps_max[i], v);
      if (v > E) ++failures;
    }
    positive[i] = failures <= max_failures;
  });

  ErrorBoundEstimate est;
  est.E = E;
  est.alpha_E = cfg.alpha_E;
  est.confidence = cfg.confidence;
  est.n_x = cfg.n_x;
  est.n_beta = cfg.n_beta;
  est.random_attack_only = cfg.gamma_mode == GammaMode::sampled;
  for (int i = 0; i < cfg.n_x; ++i) {
    est.successes += positive[i];
    est.eps_max_observed = std::max(est.eps_max_observed, eps_max[i]);
  }
  // Each inner test wrongly passes with probability at most a_in, so the
  // pass rate overstates q_E by at most a_in.
  est.q_E_lower = std::max(0.0, clopper_pearson_lower(est.successes, cfg.n_x, cfg.outer_alpha()) - a_in);
  est.passed = est.q_E_lower > 0.0;
  return est;
}

std::vector<SplitInverse> compute_split_inverses(const Image& observed, const ErrorBoundConfig& cfg) {
  cfg.validate();
  InverseOptions opts;
  opts.refinements = cfg.refinements;
  opts.pixel_tolerance = cfg.quantize ? 1.0 / 510.0 : 0.0;
  opts.threads = 1;
  const auto boxes = cfg.gamma.split(cfg.n_splits);
  std::vector<SplitInverse> out(boxes.size());
  parallel_for(boxes.size(), cfg.threads, [&](std::size_t k) {
    out[k] = {boxes[k], invert_image(observed, cfg.kind, boxes[k], opts)};
  });
  return out;
}

SplitBound individual_bound(const Image& observed, std::span<const double> beta, std::span<const SplitInverse> splits,
                            const ErrorBoundConfig& cfg) {
  const IntervalImage a = to_interval_image(preprocess(apply_transform(observed, cfg.kind, beta), cfg.pre));
  SplitBound best{-1.0, -1};
  for (std::size_t k = 0; k < splits.size(); ++k) {
    if (!splits[k].inverse.feasible) continue;
    const IntervalImage b =
        preprocess(apply_transform_interval(splits[k].inverse.image, cfg.kind, splits[k].box.shifted(beta)), cfg.pre);
    const double v = interval_diff_norm(a, b);
    if (v > best.bound) best = {v, static_cast<int>(k)};
  }
  return best;
}

ErrorBoundEstimate estimate_E_individual(const Image& observed, const ErrorBoundConfig& cfg, double E,
                                         std::span<const SplitInverse> splits) {
  cfg.validate();
  if (!(E > 0.0)) throw DomainError("estimate_E_individual: E must be positive");
  if (std::none_of(splits.begin(), splits.end(), [](const SplitInverse& s) { return s.inverse.feasible; })) {
    throw InfeasibleInput("input is not the image of any transform in the parameter box");
  }
  warn_power(cfg.n_beta, "n_beta");

  std::mt19937_64 master(cfg.seed);
  std::vector<ParamPoint> betas(cfg.n_beta);
  for (auto& b : betas) b = sample_beta(master, param_dim(cfg.kind), cfg.sigma_gamma);
  std::vector<double> bounds(cfg.n_beta);
  parallel_for(betas.size(), cfg.threads,
               [&](std::size_t b) { bounds[b] = individual_bound(observed, betas[b], splits, cfg).bound; });

  ErrorBoundEstimate est;
  est.E = E;
  est.confidence = cfg.confidence;
  est.n_x = 1;
  est.n_beta = cfg.n_beta;
  for (double v : bounds) {
    est.eps_max_observed = std::max(est.eps_max_observed, v);
    if (v <= E) ++est.successes;
  }
  est.alpha_E = 1.0 - clopper_pearson_lower(est.successes, cfg.n_beta, cfg.outer_alpha());
  est.q_E_lower = 1.0;
  est.passed = est.alpha_E <= cfg.max_individual_alpha_E;
  return est;
}

}  // namespace geosmooth
