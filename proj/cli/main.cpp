#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "geosmooth/attacks.hpp"
#include "geosmooth/classifier.hpp"
#include "geosmooth/dataset.hpp"
#include "geosmooth/errorbound.hpp"
#include "geosmooth/errors.hpp"
#include "geosmooth/inverse.hpp"
#include "geosmooth/pipelines.hpp"
#include "geosmooth/png_io.hpp"
#include "selftest.hpp"

#ifndef GEOSMOOTH_VERSION
#define GEOSMOOTH_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace geosmooth;

namespace {

/// Everything a run depends on. Bound to the flags; a config file may set any of them.
struct RunConfig {
  std::string transform = "rotation";
  double gamma_pm = 30.0;
  std::optional<double> gamma_lo, gamma_hi;
  std::string vignette = "none";
  double vignette_margin = 0.0;
  double blur_sigma = 0.0;
  int blur_size = 5;

  std::string classifier;
  std::string attack_classifier;
  std::string data;
  std::string split = "test";
  int offset = 0;
  int limit = 100;

  std::string method = "basespt";
  double sigma_gamma = 30.0;
  int n0_gamma = 100;
  int n_gamma = 2000;
  double alpha_gamma = 0.01;
  double sigma_delta = 0.5;
  int n0_delta = 100;
  int n_delta = 200;
  double alpha_delta = 0.002;
  double rho = 0.0;
  std::vector<double> variances;
  int batch_size = 64;

  int n_splits = 4;
  double alpha_E = 0.001;
  int n_beta = 8000;
  int n_x = 1000;
  double confidence = 0.999;
  std::optional<double> inner_alpha;
  bool no_quantize = false;
  std::string gamma_mode = "interval_max";
  int gamma_samples = 10;
  int refinements = 10;
  double max_alpha_E = 0.1;
  std::optional<double> E;
  std::string estimate;

  int k = 100;
  int attacks_per_image = 3;
  std::optional<double> apply_gamma;
  int index = 0;

  std::uint64_t seed = 0;
  int threads = 1;
  std::string out;
  std::string csv;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void bind_options(CLI::App& app, RunConfig& c) {
  app.add_option("--transform", c.transform, "rotation, translation or volume_scale");
  app.add_option("--gamma-pm", c.gamma_pm, "Attack box [-pm, pm] in every parameter dimension");
  app.add_option("--gamma-lo", c.gamma_lo, "Lower end of the attack box (with --gamma-hi)");
  app.add_option("--gamma-hi", c.gamma_hi, "Upper end of the attack box");
  app.add_option("--vignette", c.vignette, "none, circular or rectangular");
  app.add_option("--vignette-margin", c.vignette_margin, "Border in pixels for the rectangular vignette");
  app.add_option("--blur-sigma", c.blur_sigma, "Gaussian blur before classification (0 disables)");
  app.add_option("--blur-size", c.blur_size);

  app.add_option("--classifier", c.classifier, "mlp:PATH, centroid:PATH or external:COMMAND");
  app.add_option("--attack-classifier", c.attack_classifier, "Model attacked by eval (defaults to --classifier)");
  app.add_option("--data", c.data, "Directory with MNIST-style IDX files");
  app.add_option("--split", c.split, "train or test");
  app.add_option("--offset", c.offset, "First dataset image");
  app.add_option("--limit", c.limit, "Number of dataset images");

  app.add_option("--method", c.method, "basespt, distspt or indivspt");
  app.add_option("--sigma-gamma", c.sigma_gamma);
  app.add_option("--n0-gamma", c.n0_gamma);
  app.add_option("--n-gamma", c.n_gamma);
  app.add_option("--alpha-gamma", c.alpha_gamma);
  app.add_option("--sigma-delta", c.sigma_delta);
  app.add_option("--n0-delta", c.n0_delta);
  app.add_option("--n-delta", c.n_delta);
  app.add_option("--alpha-delta", c.alpha_delta);
  app.add_option("--rho", c.rho, "Extra probability correction for basespt");
  app.add_option("--variances", c.variances, "Per-dimension parameter noise variances");
  app.add_option("--batch-size", c.batch_size);

  app.add_option("--n-splits", c.n_splits, "Sub-boxes per parameter dimension");
  app.add_option("--alpha-E", c.alpha_E);
  app.add_option("--n-beta", c.n_beta);
  app.add_option("--n-x", c.n_x);
  app.add_option("--confidence", c.confidence);
  app.add_option("--inner-alpha", c.inner_alpha);
  app.add_flag("--no-quantize", c.no_quantize, "The attacker keeps full precision");
  app.add_option("--gamma-mode", c.gamma_mode, "interval_max or sampled");
  app.add_option("--gamma-samples", c.gamma_samples);
  app.add_option("--refinements", c.refinements);
  app.add_option("--max-alpha-E", c.max_alpha_E);
  app.add_option("--E", c.E, "Error bound to verify or certify with");
  app.add_option("--estimate", c.estimate, "verify-e output used by distspt");

  app.add_option("--k", c.k, "Draws of the worst-of-k attack");
  app.add_option("--attacks-per-image", c.attacks_per_image);
  app.add_option("--apply-gamma", c.apply_gamma, "invert: transform the input by this parameter first");
  app.add_option("--index", c.index, "invert: dataset image to use");

  app.add_option("--seed", c.seed, "Seed for all randomness")->envname("GEOSMOOTH_SEED");
  app.add_option("--threads", c.threads, "Worker threads (0: all cores)");
  app.add_option("--out", c.out, "Output file, directory or prefix");
  app.add_option("--csv", c.csv, "eval: summary CSV");
}

// Everything except thread count and output paths.
json to_json(const RunConfig& c) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return json{{"transform", c.transform},
              {"gamma_pm", c.gamma_pm},
              {"gamma_lo", opt(c.gamma_lo)},
              {"gamma_hi", opt(c.gamma_hi)},
              {"vignette", c.vignette},
              {"vignette_margin", c.vignette_margin},
              {"blur_sigma", c.blur_sigma},
              {"blur_size", c.blur_size},
              {"classifier", c.classifier},
              {"attack_classifier", c.attack_classifier},
              {"data", c.data},
              {"split", c.split},
              {"offset", c.offset},
              {"limit", c.limit},
              {"method", c.method},
              {"sigma_gamma", c.sigma_gamma},
              {"n0_gamma", c.n0_gamma},
              {"n_gamma", c.n_gamma},
              {"alpha_gamma", c.alpha_gamma},
              {"sigma_delta", c.sigma_delta},
              {"n0_delta", c.n0_delta},
              {"n_delta", c.n_delta},
              {"alpha_delta", c.alpha_delta},
              {"rho", c.rho},
              {"variances", c.variances},
              {"batch_size", c.batch_size},
              {"n_splits", c.n_splits},
              {"alpha_E", c.alpha_E},
              {"n_beta", c.n_beta},
              {"n_x", c.n_x},
              {"confidence", c.confidence},
              {"inner_alpha", opt(c.inner_alpha)},
              {"quantize", !c.no_quantize},
              {"gamma_mode", c.gamma_mode},
              {"gamma_samples", c.gamma_samples},
              {"refinements", c.refinements},
              {"max_alpha_E", c.max_alpha_E},
              {"E", opt(c.E)},
              {"estimate", c.estimate},
              {"k", c.k},
              {"attacks_per_image", c.attacks_per_image},
              {"apply_gamma", opt(c.apply_gamma)},
              {"index", c.index},
              {"seed", c.seed}};
}

json provenance(const RunConfig& c, const std::string& command) {
  return json{{"version", GEOSMOOTH_VERSION}, {"command", command}, {"run_config", to_json(c)}};
}

TransformSetup make_setup(const RunConfig& c) {
  TransformSetup s;
  s.kind = parse_transform_kind(c.transform);
  if (c.gamma_lo.has_value() != c.gamma_hi.has_value()) throw ConfigError("--gamma-lo and --gamma-hi go together");
  if (c.gamma_lo) {
    if (!(*c.gamma_lo <= *c.gamma_hi)) throw ConfigError("--gamma-lo must not exceed --gamma-hi");
    s.gamma = ParamBox(std::vector<Interval>(param_dim(s.kind), Interval(*c.gamma_lo, *c.gamma_hi)));
  } else {
    if (!(c.gamma_pm >= 0.0)) throw ConfigError("--gamma-pm must be non-negative");
    s.gamma = ParamBox::symmetric(s.kind, c.gamma_pm);
  }
  s.pre.vignette = parse_vignette_kind(c.vignette);
  s.pre.margin_px = c.vignette_margin;
  s.pre.blur_sigma = c.blur_sigma;
  s.pre.blur_size = c.blur_size;
  return s;
}

SmoothingConfig make_smoothing(const RunConfig& c, const TransformSetup& setup) {
  SmoothingConfig s;
  s.sigma_gamma = c.sigma_gamma;
  s.n0_gamma = c.n0_gamma;
  s.n_gamma = c.n_gamma;
  s.alpha_gamma = c.alpha_gamma;
  s.sigma_delta = c.sigma_delta;
  s.n0_delta = c.n0_delta;
  s.n_delta = c.n_delta;
  s.alpha_delta = c.alpha_delta;
  s.rho = c.rho;
  s.variances = c.variances;
  s.batch_size = c.batch_size;
  s.validate(setup.gamma.dim());
  return s;
}

ErrorBoundConfig make_error_config(const RunConfig& c, const TransformSetup& setup) {
  ErrorBoundConfig e;
  e.kind = setup.kind;
  e.gamma = setup.gamma;
  e.pre = setup.pre;
  e.sigma_gamma = c.sigma_gamma;
  e.n_splits = c.n_splits;
  e.alpha_E = c.alpha_E;
  e.n_beta = c.n_beta;
  e.n_x = c.n_x;
  e.confidence = c.confidence;
  e.inner_alpha = c.inner_alpha;
  e.quantize = !c.no_quantize;
  if (c.gamma_mode == "sampled") {
    e.gamma_mode = GammaMode::sampled;
  } else if (c.gamma_mode != "interval_max") {
    throw ConfigError("--gamma-mode must be interval_max or sampled");
  }
  e.gamma_samples = c.gamma_samples;
  e.refinements = c.refinements;
  e.max_individual_alpha_E = c.max_alpha_E;
  e.seed = c.seed;
  e.threads = c.threads;
  e.validate();
  return e;
}

Dataset load_data(const RunConfig& c) {
  if (c.data.empty()) throw ConfigError("--data is required");
  if (c.split != "train" && c.split != "test") throw ConfigError("--split must be train or test");
  Dataset all = load_mnist_idx((fs::path(c.data) / (c.split + "-images-idx3-ubyte.gz")).string(),
                               (fs::path(c.data) / (c.split + "-labels-idx1-ubyte.gz")).string());
  if (c.offset < 0 || c.limit < 0) throw ConfigError("--offset and --limit must be non-negative");
  Dataset out;
  const std::size_t end = std::min(all.size(), static_cast<std::size_t>(c.offset) + c.limit);
  for (std::size_t i = c.offset; i < end; ++i) {
    out.images.push_back(std::move(all.images[i]));
    out.labels.push_back(all.labels[i]);
  }
  return out;
}

std::unique_ptr<Classifier> load_classifier(const std::string& spec, GridGeometry geometry) {
  if (spec.empty()) throw ConfigError("--classifier is required");
  return make_classifier(spec, geometry);
}

/// stdout when the path is empty.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty()) return;
    file_.open(path);
    if (!file_) throw std::runtime_error("cannot write " + path);
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

ErrorBoundEstimate read_estimate(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read estimate " + path);
  try {
    json j = json::parse(in);
    if (j.contains("estimate")) j = j.at("estimate");
    ErrorBoundEstimate e;
    e.E = j.at("E").get<double>();
    e.alpha_E = j.at("alpha_E").get<double>();
    e.q_E_lower = j.at("q_E_lower").get<double>();
    e.confidence = j.at("confidence").get<double>();
    e.eps_max_observed = j.value("eps_max_observed", 0.0);
    e.n_x = j.value("n_x", 0);
    e.n_beta = j.value("n_beta", 0);
    e.successes = j.value("successes", 0);
    e.random_attack_only = j.value("random_attack_only", false);
    e.passed = j.at("passed").get<bool>();
    return e;
  } catch (const json::exception& e) {
    throw ConfigError("estimate " + path + ": " + e.what());
  }
}

int cmd_estimate_error(const RunConfig& c) {
  const TransformSetup setup = make_setup(c);
  const ErrorBoundConfig ecfg = make_error_config(c, setup);
  const Dataset data = load_data(c);
  const ScanResult scan = propose_E(data, ecfg);
  Output out(c.out);
  out.stream() << provenance(c, "estimate-error").dump() << '\n';
  for (const auto& r : scan.records) out.stream() << to_jsonl(r) << '\n';
  json summary = provenance(c, "estimate-error");
  summary["E"] = scan.E;
  summary["eps_max"] = scan.eps_max;
  summary["records"] = scan.records.size();
  if (!c.out.empty()) std::cout << summary.dump() << '\n';
  else std::cerr << summary.dump() << '\n';
  return 0;
}

int cmd_verify_e(const RunConfig& c) {
  if (!c.E) throw ConfigError("--E is required");
  const TransformSetup setup = make_setup(c);
  const ErrorBoundConfig ecfg = make_error_config(c, setup);
  const Dataset data = load_data(c);
  const ErrorBoundEstimate est = estimate_E_distributional(data, ecfg, *c.E);
  json j = provenance(c, "verify-e");
  j["estimate"] = to_json(est);
  Output out(c.out);
  out.stream() << j.dump() << '\n';
  return est.passed ? 0 : 2;
}

struct Input {
  std::string name;
  Image image;
  std::optional<int> label;
};

std::vector<Input> gather_inputs(const RunConfig& c, const std::vector<std::string>& files) {
  std::vector<Input> inputs;
  for (const auto& f : files) inputs.push_back({f, read_png(f), std::nullopt});
  if (files.empty()) {
    Dataset d = load_data(c);
    for (std::size_t i = 0; i < d.size(); ++i) {
      inputs.push_back({c.split + ":" + std::to_string(c.offset + i), std::move(d.images[i]), d.labels[i]});
    }
  }
  if (inputs.empty()) throw ConfigError("no inputs");
  return inputs;
}

int cmd_certify(const RunConfig& c, const std::vector<std::string>& files) {
  const TransformSetup setup = make_setup(c);
  const SmoothingConfig scfg = make_smoothing(c, setup);
  const Method method = parse_method(c.method);
  ErrorBoundConfig ecfg;
  ErrorBoundEstimate est;
  if (method == Method::indivspt) {
    ecfg = make_error_config(c, setup);
    if (!c.E) throw ConfigError("indivspt needs --E");
  }
  if (method == Method::distspt) {
    if (c.estimate.empty()) throw ConfigError("distspt needs --estimate (the output of verify-e)");
    est = read_estimate(c.estimate);
  }
  const auto inputs = gather_inputs(c, files);
  const auto base = load_classifier(c.classifier, inputs.front().image.geometry());
  const int threads = base->reentrant() ? c.threads : 1;

  Output out(c.out);
  out.stream() << provenance(c, "certify").dump() << '\n';
  std::mt19937_64 master(c.seed);
  for (const auto& in : inputs) {
    const std::uint64_t seed = master();
    json line{{"input", in.name}};
    if (in.label) line["label"] = *in.label;
    try {
      Certificate cert;
      switch (method) {
        case Method::basespt: cert = basespt(in.image, *base, setup, scfg, seed, threads); break;
        case Method::distspt: cert = distspt(in.image, *base, setup, scfg, est, seed, threads); break;
        case Method::indivspt: cert = indivspt(in.image, *base, setup, scfg, ecfg, *c.E, seed, threads); break;
      }
      line["certificate"] = to_json(cert);
    } catch (const InfeasibleInput& e) {
      line["error"] = e.what();
    }
    out.stream() << line.dump() << '\n';
  }
  return 0;
}

int cmd_invert(const RunConfig& c, const std::vector<std::string>& files) {
  if (c.out.empty()) throw ConfigError("--out PREFIX is required");
  if (files.size() > 1) throw ConfigError("invert takes one input image");
  const TransformSetup setup = make_setup(c);
  Image observed;
  if (!files.empty()) {
    observed = read_png(files.front());
  } else {
    RunConfig one = c;
    one.offset = c.index;
    one.limit = 1;
    Dataset d = load_data(one);
    if (d.empty()) throw ConfigError("--index is past the end of the dataset");
    observed = d.images.front();
  }
  if (c.apply_gamma) {
    const std::vector<double> g(param_dim(setup.kind), *c.apply_gamma);
    observed = apply_transform(observed, setup.kind, g);
    if (!c.no_quantize) observed = quantize8(observed);
  }
  InverseOptions opts;
  opts.refinements = c.refinements;
  opts.pixel_tolerance = c.no_quantize ? 0.0 : 1.0 / 510.0;
  opts.threads = c.threads;
  const InverseResult inv = invert_image(observed, setup.kind, setup.gamma, opts);

  json j = provenance(c, "invert");
  j["feasible"] = inv.feasible;
  j["refinements_applied"] = inv.refinements_applied;
  if (inv.feasible) {
    double width = 0.0;
    for (const auto& v : inv.image.data()) width += v.width();
    j["mean_width"] = width / static_cast<double>(inv.image.data().size());
    write_png(c.out + "_observed.png", observed);
    write_png(c.out + "_lower.png", lower_image(inv.image));
    write_png(c.out + "_upper.png", upper_image(inv.image));
    j["files"] = {c.out + "_observed.png", c.out + "_lower.png", c.out + "_upper.png"};
  } else if (inv.empty_pixel) {
    j["empty_pixel"] = {inv.empty_pixel->channel, inv.empty_pixel->row, inv.empty_pixel->col};
  }
  std::cout << j.dump() << '\n';
  return 0;
}

int cmd_attack(const RunConfig& c) {
  if (c.out.empty()) throw ConfigError("--out DIR is required");
  const TransformSetup setup = make_setup(c);
  const Dataset data = load_data(c);
  if (data.empty()) throw ConfigError("no inputs");
  const auto model = load_classifier(c.classifier, data.images.front().geometry());
  fs::create_directories(c.out);
  std::ofstream manifest(fs::path(c.out) / "manifest.jsonl");
  if (!manifest) throw std::runtime_error("cannot write the manifest in " + c.out);
  manifest << provenance(c, "attack").dump() << '\n';
  std::mt19937_64 master(c.seed);
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (int a = 0; a < c.attacks_per_image; ++a) {
      const int id = c.offset + static_cast<int>(i);
      const auto r = worst_of_k(data.images[i], data.labels[i], *model, setup.kind, setup.gamma, c.k, master(),
                                setup.pre, !c.no_quantize, id);
      const std::string name = "attack_" + std::to_string(id) + "_" + std::to_string(a) + ".png";
      write_png((fs::path(c.out) / name).string(), r.attacked);
      manifest << json{{"file", name},         {"original_id", id},   {"attack_index", a},
                       {"label", data.labels[i]}, {"gamma_star", r.gamma_star}, {"loss", r.loss},
                       {"zero_one_loss", r.zero_one_loss}}
                      .dump()
               << '\n';
    }
  }
  return 0;
}

int cmd_eval(const RunConfig& c) {
  const TransformSetup setup = make_setup(c);
  EvalOptions opts;
  opts.method = parse_method(c.method);
  opts.setup = setup;
  opts.smoothing = make_smoothing(c, setup);
  opts.attack.k = c.k;
  opts.attack.attacks_per_image = c.attacks_per_image;
  opts.attack.quantize = !c.no_quantize;
  if (opts.method == Method::distspt) {
    if (c.estimate.empty()) throw ConfigError("distspt needs --estimate (the output of verify-e)");
    opts.estimate = read_estimate(c.estimate);
  }
  if (opts.method == Method::indivspt) {
    opts.error_config = make_error_config(c, setup);
    opts.error_config.threads = 1;
    if (!c.E) throw ConfigError("indivspt needs --E");
    opts.E = *c.E;
  }
  opts.seed = c.seed;
  opts.threads = c.threads;
  const Dataset data = load_data(c);
  if (data.empty()) throw ConfigError("no inputs");
  const auto base = load_classifier(c.classifier, data.images.front().geometry());
  const auto attacker = c.attack_classifier.empty() ? nullptr : load_classifier(c.attack_classifier, data.images.front().geometry());

  const auto records = evaluate_defense(data, attacker ? *attacker : *base, *base, opts);
  if (!c.out.empty()) {
    Output out(c.out);
    out.stream() << provenance(c, "eval").dump() << '\n';
    for (const auto& r : records) out.stream() << to_json(r).dump() << '\n';
  }
  const EvalSummary s = summarize(records);
  if (!c.csv.empty()) {
    Output csv(c.csv);
    csv.stream() << summary_csv_header() << '\n' << to_csv_row(s) << '\n';
  }
  json j = provenance(c, "eval");
  j["summary"] = to_json(s);
  std::cout << j.dump() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Certified robustness to geometric transformations by parameter-space smoothing", "geosmooth"};
  app.set_version_flag("--version", std::string(GEOSMOOTH_VERSION));
  app.set_config("--config", "", "Flat key = value file; keys are the long flag names")->check(CLI::ExistingFile);
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);

  RunConfig cfg;
  bind_options(app, cfg);
  std::vector<std::string> files;
  auto* estimate = app.add_subcommand("estimate-error", "Scan the interpolation error bound and propose E");
  auto* verify = app.add_subcommand("verify-e", "Estimate how often a given E holds over the data");
  auto* invert = app.add_subcommand("invert", "Write lower/upper images bounding every preimage of an input");
  auto* attack = app.add_subcommand("attack", "Write a worst-of-k attack corpus");
  auto* certify = app.add_subcommand("certify", "Certify inputs with one of the smoothing pipelines");
  auto* eval = app.add_subcommand("eval", "Attack a dataset and certify each attacked image");
  auto* selftest = app.add_subcommand("selftest", "Check the library against reference computations");
  for (auto* sub : {estimate, verify, invert, attack, certify, eval, selftest}) sub->fallthrough();
  certify->add_option("inputs", files, "PNG inputs (default: the dataset)")->check(CLI::ExistingFile);
  invert->add_option("input", files, "PNG input (default: --data at --index)")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (estimate->parsed()) return cmd_estimate_error(cfg);
    if (verify->parsed()) return cmd_verify_e(cfg);
    if (invert->parsed()) return cmd_invert(cfg, files);
    if (attack->parsed()) return cmd_attack(cfg);
    if (certify->parsed()) return cmd_certify(cfg, files);
    if (eval->parsed()) return cmd_eval(cfg);
    if (selftest->parsed()) return geosmooth::cli::run_selftest(cfg.seed) == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const DomainError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
