#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "geosmooth/attacks.hpp"
#include "geosmooth/classifier.hpp"
#include "geosmooth/dataset.hpp"
#include "geosmooth/errorbound.hpp"
#include "geosmooth/errors.hpp"
#include "geosmooth/inverse.hpp"
#include "geosmooth/pipelines.hpp"
#include "geosmooth/stats.hpp"

namespace py = pybind11;
using namespace geosmooth;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

/// (H, W) or (H, W, C) array to a planar image.
Image to_image(const Array& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw DomainError("image must have shape (H, W) or (H, W, C)");
  const int h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
  Image img(GridGeometry(w, h, c));
  const double* p = a.data();
  for (int r = 0; r < h; ++r)
    for (int col = 0; col < w; ++col)
      for (int ch = 0; ch < c; ++ch) img.at(ch, r, col) = p[(static_cast<std::size_t>(r) * w + col) * c + ch];
  return img;
}

template <typename F>
Array to_array(const GridGeometry& g, F&& value) {
  Array out = g.channels == 1 ? Array({g.height, g.width}) : Array({g.height, g.width, g.channels});
  double* p = out.mutable_data();
  for (int r = 0; r < g.height; ++r)
    for (int col = 0; col < g.width; ++col)
      for (int ch = 0; ch < g.channels; ++ch)
        p[(static_cast<std::size_t>(r) * g.width + col) * g.channels + ch] = value(ch, r, col);
  return out;
}

Array to_array(const Image& img) {
  return to_array(img.geometry(), [&](int c, int r, int col) { return img.at(c, r, col); });
}

py::tuple bounds(const IntervalImage& img) {
  auto lo = to_array(img.geometry(), [&](int c, int r, int col) { return img.at(c, r, col).lo(); });
  auto hi = to_array(img.geometry(), [&](int c, int r, int col) { return img.at(c, r, col).hi(); });
  return py::make_tuple(lo, hi);
}

ParamBox make_box(TransformKind kind, std::optional<double> pm, std::optional<std::pair<double, double>> range) {
  if (range) return ParamBox(std::vector<Interval>(param_dim(kind), Interval(range->first, range->second)));
  return ParamBox::symmetric(kind, pm.value_or(30.0));
}

template <typename T>
void set_if(const py::dict& d, const char* key, T& field) {
  if (d.contains(key)) field = d[key].cast<T>();
}

SmoothingConfig smoothing_from(const py::dict& d) {
  SmoothingConfig s;
  set_if(d, "sigma_gamma", s.sigma_gamma);
  set_if(d, "n0_gamma", s.n0_gamma);
  set_if(d, "n_gamma", s.n_gamma);
  set_if(d, "alpha_gamma", s.alpha_gamma);
  set_if(d, "sigma_delta", s.sigma_delta);
  set_if(d, "n0_delta", s.n0_delta);
  set_if(d, "n_delta", s.n_delta);
  set_if(d, "alpha_delta", s.alpha_delta);
  set_if(d, "rho", s.rho);
  set_if(d, "variances", s.variances);
  set_if(d, "batch_size", s.batch_size);
  return s;
}

ErrorBoundConfig error_config_from(const py::dict& d, const TransformSetup& setup, double sigma_gamma) {
  ErrorBoundConfig e;
  e.kind = setup.kind;
  e.gamma = setup.gamma;
  e.pre = setup.pre;
  e.sigma_gamma = sigma_gamma;
  set_if(d, "n_splits", e.n_splits);
  set_if(d, "alpha_E", e.alpha_E);
  set_if(d, "n_beta", e.n_beta);
  set_if(d, "n_x", e.n_x);
  set_if(d, "confidence", e.confidence);
  set_if(d, "quantize", e.quantize);
  set_if(d, "refinements", e.refinements);
  set_if(d, "gamma_samples", e.gamma_samples);
  set_if(d, "max_individual_alpha_E", e.max_individual_alpha_E);
  set_if(d, "seed", e.seed);
  set_if(d, "threads", e.threads);
  if (d.contains("inner_alpha")) e.inner_alpha = d["inner_alpha"].cast<double>();
  if (d.contains("gamma_mode")) {
    const auto m = d["gamma_mode"].cast<std::string>();
    if (m != "sampled" && m != "interval_max") throw DomainError("gamma_mode must be interval_max or sampled");
    e.gamma_mode = m == "sampled" ? GammaMode::sampled : GammaMode::interval_max;
  }
  return e;
}

ErrorBoundEstimate estimate_from(const py::dict& d) {
  ErrorBoundEstimate e;
  e.E = d["E"].cast<double>();
  e.alpha_E = d["alpha_E"].cast<double>();
  e.q_E_lower = d["q_E_lower"].cast<double>();
  e.confidence = d["confidence"].cast<double>();
  e.passed = d["passed"].cast<bool>();
  set_if(d, "random_attack_only", e.random_attack_only);
  return e;
}

Dataset dataset_from(const std::vector<Array>& images, const std::vector<int>& labels) {
  if (images.size() != labels.size()) throw DomainError("images and labels differ in length");
  Dataset d;
  for (const auto& a : images) d.images.push_back(to_image(a));
  d.labels = labels;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of geosmooth";

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<BackendError>(m, "BackendError", PyExc_RuntimeError);
  py::register_exception<InfeasibleInput>(m, "InfeasibleInput", PyExc_ValueError);

  m.def("load_mnist", [](const std::string& images, const std::string& labels) {
    Dataset d = load_mnist_idx(images, labels);
    std::vector<Array> out;
    for (const auto& img : d.images) out.push_back(to_array(img));
    return py::make_tuple(out, d.labels);
  });

  m.def("apply_transform", [](const Array& img, const std::string& kind, std::vector<double> gamma) {
    return to_array(apply_transform(to_image(img), parse_transform_kind(kind), gamma));
  });
  m.def(
      "apply_transform_interval",
      [](const Array& img, const std::string& kind, std::optional<double> pm,
         std::optional<std::pair<double, double>> range) {
        const auto k = parse_transform_kind(kind);
        return bounds(apply_transform_interval(to_image(img), k, make_box(k, pm, range)));
      },
      py::arg("image"), py::arg("kind"), py::arg("gamma_pm") = py::none(), py::arg("gamma_range") = py::none());

  m.def(
      "invert",
      [](const Array& observed, const std::string& kind, std::optional<double> pm,
         std::optional<std::pair<double, double>> range, int refinements, double pixel_tolerance) {
        const auto k = parse_transform_kind(kind);
        InverseOptions opts;
        opts.refinements = refinements;
        opts.pixel_tolerance = pixel_tolerance;
        const InverseResult r = invert_image(to_image(observed), k, make_box(k, pm, range), opts);
        py::dict d;
        d["feasible"] = r.feasible;
        d["refinements_applied"] = r.refinements_applied;
        if (r.feasible) {
          auto b = bounds(r.image);
          d["lower"] = b[0];
          d["upper"] = b[1];
        }
        return d;
      },
      py::arg("observed"), py::arg("kind"), py::arg("gamma_pm") = py::none(), py::arg("gamma_range") = py::none(),
      py::arg("refinements") = 0, py::arg("pixel_tolerance") = 0.0);

  m.def(
      "epsilon_concrete",
      [](const Array& x, std::vector<double> beta, std::vector<double> gamma, const std::string& kind, bool quantize) {
        return epsilon_concrete(to_image(x), beta, gamma, parse_transform_kind(kind), {}, quantize);
      },
      py::arg("image"), py::arg("beta"), py::arg("gamma"), py::arg("kind"), py::arg("quantize") = false);

  m.def("clopper_pearson_lower", &clopper_pearson_lower);
  m.def("clopper_pearson_upper", &clopper_pearson_upper);
  m.def("normal_quantile", &normal_quantile);
  m.def("radius_l2", &radius_l2);
  m.def("radius_param", &radius_param);

  py::class_<Classifier, std::shared_ptr<Classifier>>(m, "Classifier")
      .def_property_readonly("num_classes", &Classifier::num_classes)
      .def("classify", [](const Classifier& c, const Array& img) { return c.classify(to_image(img)); })
      .def("classify_batch", [](const Classifier& c, const std::vector<Array>& imgs) {
        std::vector<Image> batch;
        for (const auto& a : imgs) batch.push_back(to_image(a));
        return c.classify_batch(batch);
      });
  m.def(
      "load_classifier",
      [](const std::string& spec, int width, int height, int channels, int num_classes) {
        return std::shared_ptr<Classifier>(make_classifier(spec, GridGeometry(width, height, channels), num_classes));
      },
      py::arg("spec"), py::arg("width") = 28, py::arg("height") = 28, py::arg("channels") = 1,
      py::arg("num_classes") = 10);

  m.def(
      "certify",
      [](const Array& img, const Classifier& base, const std::string& method, const std::string& kind,
         std::optional<double> pm, std::optional<std::pair<double, double>> range, std::uint64_t seed,
         const py::dict& options) {
        TransformSetup setup;
        setup.kind = parse_transform_kind(kind);
        setup.gamma = make_box(setup.kind, pm, range);
        const SmoothingConfig scfg = smoothing_from(options);
        const Image x = to_image(img);
        Certificate c;
        switch (parse_method(method)) {
          case Method::basespt:
            c = basespt(x, base, setup, scfg, seed);
            break;
          case Method::distspt:
            if (!options.contains("estimate")) throw DomainError("distspt needs options['estimate']");
            c = distspt(x, base, setup, scfg, estimate_from(options["estimate"].cast<py::dict>()), seed);
            break;
          case Method::indivspt:
            if (!options.contains("E")) throw DomainError("indivspt needs options['E']");
            c = indivspt(x, base, setup, scfg, error_config_from(options, setup, scfg.sigma_gamma),
                         options["E"].cast<double>(), seed);
            break;
        }
        return to_json(c).dump();
      },
      py::arg("image"), py::arg("classifier"), py::arg("method") = "basespt", py::arg("kind") = "rotation",
      py::arg("gamma_pm") = py::none(), py::arg("gamma_range") = py::none(), py::arg("seed") = 0,
      py::arg("options") = py::dict());

  m.def(
      "estimate_error",
      [](const std::vector<Array>& images, const std::vector<int>& labels, double E, const std::string& kind,
         std::optional<double> pm, double sigma_gamma, const py::dict& options) {
        TransformSetup setup;
        setup.kind = parse_transform_kind(kind);
        setup.gamma = make_box(setup.kind, pm, std::nullopt);
        const auto cfg = error_config_from(options, setup, sigma_gamma);
        return to_json(estimate_E_distributional(dataset_from(images, labels), cfg, E)).dump();
      },
      py::arg("images"), py::arg("labels"), py::arg("E"), py::arg("kind") = "rotation", py::arg("gamma_pm") = 30.0,
      py::arg("sigma_gamma") = 30.0, py::arg("options") = py::dict());

  m.def(
      "worst_of_k",
      [](const Array& img, int label, const Classifier& model, const std::string& kind, double pm, int k,
         std::uint64_t seed) {
        const auto kk = parse_transform_kind(kind);
        const AttackResult r = worst_of_k(to_image(img), label, model, kk, ParamBox::symmetric(kk, pm), k, seed);
        return py::make_tuple(r.gamma_star, r.loss, to_array(r.attacked));
      },
      py::arg("image"), py::arg("label"), py::arg("classifier"), py::arg("kind") = "rotation",
      py::arg("gamma_pm") = 30.0, py::arg("k") = 100, py::arg("seed") = 0);
}
