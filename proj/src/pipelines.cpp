#include "geosmooth/pipelines.hpp"

#include <cmath>
#include <random>

#include "geosmooth/errors.hpp"

namespace geosmooth {

using json = nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

json box_json(const ParamBox& b) {
  json out = json::array();
  for (const auto& d : b.dims()) out.push_back({d.lo(), d.hi()});
  return out;
}

// Outer smoothing over the parameter plus radius bookkeeping shared by all pipelines.
Certificate certify_parameter(const SeedLabeler& labeler, int num_classes, const TransformSetup& setup,
                              const SmoothingConfig& cfg, double rho, std::uint64_t seed, int threads) {
  Certificate c;
  c.setup = setup;
  c.config = cfg;
  c.seed = seed;
  c.rho = rho;
  const SamplingOptions opts{cfg.batch_size, threads};
  const auto r = smooth_predict_certify(labeler, num_classes, cfg.n0_gamma, cfg.n_gamma, cfg.alpha_gamma, seed, opts);
  c.p_A_lower = r.p_A_lower;
  if (r.candidate == kAbstain) {
    c.abstain_reason = "no sample produced a usable label";
    return c;
  }
  const bool mahalanobis = !cfg.variances.empty();
  c.level = mahalanobis ? "mahalanobis" : "parameter";
  const double radius = mahalanobis ? radius_mahalanobis(r.p_A_lower, 1.0 - r.p_A_lower, rho)
                                    : radius_param(r.p_A_lower, 1.0 - r.p_A_lower, cfg.sigma_gamma, rho);
  if (!(radius > 0.0)) {
    c.abstain_reason = "lower confidence bound " + std::to_string(r.p_A_lower) + " minus rho is not above 1/2";
    return c;
  }
  c.prediction = r.candidate;
  c.radius_unclipped = radius;
  c.radius = radius;
  if (!mahalanobis) {
    const double cr = setup.gamma.circumradius();
    c.covers_gamma = radius >= cr;
    if (radius > cr) {
      c.radius = cr;
      c.clipped = true;
    }
  } else {
    std::vector<double> corner;
    for (const auto& d : setup.gamma.dims()) corner.push_back(d.mag());
    c.covers_gamma = ellipsoid_contains(corner, cfg.variances, radius);
  }
  return c;
}

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::basespt:
      return "basespt";
    case Method::distspt:
      return "distspt";
    case Method::indivspt:
      return "indivspt";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  if (name == "basespt") return Method::basespt;
  if (name == "distspt") return Method::distspt;
  if (name == "indivspt") return Method::indivspt;
  throw DomainError("unknown method '" + std::string(name) + "'");
}

std::string to_string(Guarantee g) {
  switch (g) {
    case Guarantee::heuristic:
      return "heuristic";
    case Guarantee::distributional:
      return "distributional";
    case Guarantee::individual:
      return "individual";
  }
  return "unknown";
}

void SmoothingConfig::validate(int param_dim) const {
  if (!(sigma_gamma > 0.0) || !(sigma_delta > 0.0)) throw DomainError("smoothing sigmas must be positive");
  if (n0_gamma < 1 || n_gamma < 1 || n0_delta < 1 || n_delta < 1) throw DomainError("sample counts must be >= 1");
  for (double a : {alpha_gamma, alpha_delta}) {
    if (!(a > 0.0 && a < 1.0)) throw DomainError("alphas must be in (0, 1)");
  }
  if (!(rho >= 0.0 && rho < 1.0)) throw DomainError("rho must be in [0, 1)");
  if (!variances.empty()) {
    if (static_cast<int>(variances.size()) != param_dim) throw DomainError("variances: wrong dimension");
    for (double v : variances) {
      if (!(v > 0.0)) throw DomainError("variances must be positive");
    }
  }
  if (batch_size < 1) throw DomainError("batch_size must be >= 1");
}

json to_json(const SmoothingConfig& c) {
  json j{{"sigma_gamma", c.sigma_gamma}, {"n0_gamma", c.n0_gamma},     {"n_gamma", c.n_gamma},
         {"alpha_gamma", c.alpha_gamma}, {"sigma_delta", c.sigma_delta}, {"n0_delta", c.n0_delta},
         {"n_delta", c.n_delta},         {"alpha_delta", c.alpha_delta}, {"rho", c.rho},
         {"batch_size", c.batch_size}};
  if (!c.variances.empty()) j["variances"] = c.variances;
  return j;
}

json to_json(const TransformSetup& s) {
  return json{{"transform", to_string(s.kind)},
              {"gamma", box_json(s.gamma)},
              {"vignette", to_string(s.pre.vignette)},
              {"vignette_margin", s.pre.margin_px},
              {"blur_sigma", s.pre.blur_sigma},
              {"blur_size", s.pre.blur_size}};
}

json to_json(const ErrorBoundConfig& c) {
  json j{{"transform", to_string(c.kind)},
         {"gamma", box_json(c.gamma)},
         {"sigma_gamma", c.sigma_gamma},
         {"n_splits", c.n_splits},
         {"alpha_E", c.alpha_E},
         {"n_beta", c.n_beta},
         {"n_x", c.n_x},
         {"confidence", c.confidence},
         {"inner_alpha", c.inner_test_alpha()},
         {"vignette", to_string(c.pre.vignette)},
         {"vignette_margin", c.pre.margin_px},
         {"blur_sigma", c.pre.blur_sigma},
         {"blur_size", c.pre.blur_size},
         {"quantize", c.quantize},
         {"gamma_mode", c.gamma_mode == GammaMode::sampled ? "sampled" : "interval_max"},
         {"gamma_samples", c.gamma_samples},
         {"refinements", c.refinements},
         {"max_individual_alpha_E", c.max_individual_alpha_E},
         {"seed", c.seed}};
  return j;
}

json to_json(const ErrorBoundEstimate& e) {
  return json{{"E", e.E},
              {"alpha_E", e.alpha_E},
              {"q_E_lower", e.q_E_lower},
              {"confidence", e.confidence},
              {"eps_max_observed", e.eps_max_observed},
              {"n_x", e.n_x},
              {"n_beta", e.n_beta},
              {"successes", e.successes},
              {"random_attack_only", e.random_attack_only},
              {"passed", e.passed}};
}

json to_json(const Certificate& c) {
  json j;
  j["method"] = to_string(c.method);
  j["prediction"] = c.abstained() ? json("ABSTAIN") : json(c.prediction);
  j["p_A_lower"] = c.p_A_lower;
  j["radius"] = c.radius;
  j["radius_unclipped"] = c.radius_unclipped;
  j["clipped"] = c.clipped;
  j["level"] = c.level;
  j["guarantee"] = to_string(c.guarantee);
  j["rho"] = c.rho;
  j["E_used"] = c.E_used ? json(*c.E_used) : json(nullptr);
  j["alpha_E"] = c.alpha_E;
  j["q_E_lower"] = c.q_E_lower;
  j["E_confidence"] = c.E_confidence;
  j["random_attack_only"] = c.random_attack_only;
  j["covers_gamma"] = c.covers_gamma;
  if (!c.abstain_reason.empty()) j["abstain_reason"] = c.abstain_reason;
  j["seed"] = c.seed;
  j["config"] = to_json(c.config);
  j["setup"] = to_json(c.setup);
  return j;
}

ParamPoint sample_parameter(std::uint64_t seed, int dim, double sigma, std::span<const double> variances) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  ParamPoint p(dim);
  for (int d = 0; d < dim; ++d) {
    const double s = variances.empty() ? sigma : std::sqrt(variances[d]);
    p[d] = s * nd(rng);
  }
  return p;
}

SeedLabeler make_base_labeler(const Image& x, const Classifier& base, const TransformSetup& setup,
                              const SmoothingConfig& cfg) {
  return [&x, &base, setup, cfg](std::span<const std::uint64_t> seeds) {
    std::vector<Image> batch;
    batch.reserve(seeds.size());
    for (auto s : seeds) {
      const ParamPoint beta = sample_parameter(s, param_dim(setup.kind), cfg.sigma_gamma, cfg.variances);
      batch.push_back(preprocess(apply_transform(x, setup.kind, beta), setup.pre));
    }
    return base.classify_batch(batch);
  };
}

SeedLabeler make_robust_labeler(const Image& x, const Classifier& base, const TransformSetup& setup,
                                const SmoothingConfig& cfg, double E) {
  return [&x, &base, setup, cfg, E](std::span<const std::uint64_t> seeds) {
    std::vector<int> out;
    out.reserve(seeds.size());
    for (auto s : seeds) {
      const ParamPoint beta = sample_parameter(s, param_dim(setup.kind), cfg.sigma_gamma, cfg.variances);
      const Image z = preprocess(apply_transform(x, setup.kind, beta), setup.pre);
      const L2Result r = certify_l2_robust(z, base, cfg.sigma_delta, cfg.n0_delta, cfg.n_delta, cfg.alpha_delta,
                                           splitmix64(s), SamplingOptions{cfg.batch_size, 1});
      out.push_back(r.prediction != kAbstain && r.radius >= E ? r.prediction : kAbstain);
    }
    return out;
  };
}

Certificate basespt(const Image& x, const Classifier& base, const TransformSetup& setup, const SmoothingConfig& cfg,
                    std::uint64_t seed, int threads) {
  cfg.validate(param_dim(setup.kind));
  if (!base.reentrant()) threads = 1;
  Certificate c = certify_parameter(make_base_labeler(x, base, setup, cfg), base.num_classes(), setup, cfg, cfg.rho,
                                    seed, threads);
  c.method = Method::basespt;
  c.guarantee = Guarantee::heuristic;
  return c;
}

Certificate distspt(const Image& x, const Classifier& base, const TransformSetup& setup, const SmoothingConfig& cfg,
                    const ErrorBoundEstimate& est, std::uint64_t seed, int threads) {
  cfg.validate(param_dim(setup.kind));
  if (!(est.E > 0.0)) throw DomainError("distspt: error bound E must be positive");
  if (!base.reentrant()) threads = 1;
  const double rho = cfg.alpha_delta + est.alpha_E;
  Certificate c = certify_parameter(make_robust_labeler(x, base, setup, cfg, est.E), base.num_classes(), setup, cfg,
                                    rho, seed, threads);
  c.method = Method::distspt;
  c.guarantee = Guarantee::distributional;
  c.E_used = est.E;
  c.alpha_E = est.alpha_E;
  c.q_E_lower = est.q_E_lower;
  c.E_confidence = est.confidence;
  c.random_attack_only = est.random_attack_only;
  return c;
}

Certificate indivspt(const Image& observed, const Classifier& base, const TransformSetup& setup,
                     const SmoothingConfig& cfg, ErrorBoundConfig ecfg, double E, std::uint64_t seed, int threads) {
  cfg.validate(param_dim(setup.kind));
  ecfg.kind = setup.kind;
  ecfg.gamma = setup.gamma;
  ecfg.pre = setup.pre;
  ecfg.sigma_gamma = cfg.sigma_gamma;
  ecfg.threads = threads;
  const auto splits = compute_split_inverses(observed, ecfg);
  const ErrorBoundEstimate est = estimate_E_individual(observed, ecfg, E, splits);

  Certificate c;
  if (!est.passed) {
    c.setup = setup;
    c.config = cfg;
    c.seed = seed;
    c.abstain_reason = "error bound check failed: derived alpha_E " + std::to_string(est.alpha_E) + " exceeds " +
                       std::to_string(ecfg.max_individual_alpha_E);
  } else {
    c = distspt(observed, base, setup, cfg, est, seed, threads);
  }
  c.method = Method::indivspt;
  c.guarantee = Guarantee::individual;
  c.E_used = E;
  c.alpha_E = est.alpha_E;
  c.q_E_lower = 1.0;
  c.E_confidence = est.confidence;
  c.rho = cfg.alpha_delta + est.alpha_E;
  return c;
}

}  // namespace geosmooth
