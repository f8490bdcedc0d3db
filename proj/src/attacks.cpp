#include "geosmooth/attacks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "geosmooth/errors.hpp"
#include "geosmooth/parallel.hpp"

namespace geosmooth {

using json = nlohmann::json;

double cross_entropy(std::span<const double> scores, int label) {
  if (label < 0 || label >= static_cast<int>(scores.size())) throw DomainError("cross_entropy: label out of range");
  const double m = *std::max_element(scores.begin(), scores.end());
  double s = 0.0;
  for (double v : scores) s += std::exp(v - m);
  return std::log(s) + m - scores[label];
}

AttackResult worst_of_k(const Image& x, int label, const Classifier& base, TransformKind kind, const ParamBox& box,
                        int k, std::uint64_t seed, const Preprocessing& pre, bool quantize, int original_id) {
  if (k < 1) throw DomainError("worst_of_k: k must be >= 1");
  std::mt19937_64 rng(seed);
  std::vector<ParamPoint> gammas(k);
  std::vector<Image> stored(k);
  std::vector<Image> inputs(k);
  for (int i = 0; i < k; ++i) {
    gammas[i] = box.sample_uniform(rng);
    Image t = apply_transform(x, kind, gammas[i]);
    stored[i] = quantize ? quantize8(t) : t;
    inputs[i] = preprocess(stored[i], pre);
  }
  std::vector<double> loss(k);
  bool zero_one = !base.has_scores();
  if (!zero_one) {
    try {
      const auto s = base.scores_batch(inputs);
      for (int i = 0; i < k; ++i) loss[i] = cross_entropy(s[i], label);
    } catch (const std::logic_error&) {
      zero_one = true;
    }
  }
  if (zero_one) {
    const auto l = base.classify_batch(inputs);
    for (int i = 0; i < k; ++i) loss[i] = l[i] == label ? 0.0 : 1.0;
  }
  const int best = static_cast<int>(std::max_element(loss.begin(), loss.end()) - loss.begin());
  return {gammas[best], loss[best], original_id, std::move(stored[best]), zero_one};
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return values[lo] + (values[hi] - values[lo]) * (pos - static_cast<double>(lo));
}

std::vector<EvalRecord> evaluate_defense(const Dataset& data, const Classifier& attack_model, const Classifier& base,
                                         const EvalOptions& opts) {
  const int per = opts.attack.attacks_per_image;
  if (per < 1) throw DomainError("evaluate_defense: attacks_per_image must be >= 1");
  const std::size_t total = data.size() * static_cast<std::size_t>(per);
  std::mt19937_64 master(opts.seed);
  std::vector<std::uint64_t> attack_seeds(total), cert_seeds(total);
  for (std::size_t i = 0; i < total; ++i) {
    attack_seeds[i] = master();
    cert_seeds[i] = master();
  }
  const bool reentrant = base.reentrant() && attack_model.reentrant();
  std::vector<EvalRecord> out(total);
  parallel_for(total, reentrant ? opts.threads : 1, [&](std::size_t idx) {
    const auto t0 = std::chrono::steady_clock::now();
    const int img = static_cast<int>(idx / per);
    EvalRecord& rec = out[idx];
    rec.image_id = img;
    rec.attack_index = static_cast<int>(idx % per);
    rec.label = data.labels[img];
    const Image& x = data.images[img];
    const auto atk = worst_of_k(x, rec.label, attack_model, opts.setup.kind, opts.setup.gamma, opts.attack.k,
                                attack_seeds[idx], opts.setup.pre, opts.attack.quantize, img);
    rec.gamma_star = atk.gamma_star;
    rec.base_clean = attack_model.classify(preprocess(x, opts.setup.pre));
    rec.base_attacked = attack_model.classify(preprocess(atk.attacked, opts.setup.pre));
    try {
      switch (opts.method) {
        case Method::basespt:
          rec.certificate = basespt(atk.attacked, base, opts.setup, opts.smoothing, cert_seeds[idx]);
          break;
        case Method::distspt:
          rec.certificate = distspt(atk.attacked, base, opts.setup, opts.smoothing, opts.estimate, cert_seeds[idx]);
          break;
        case Method::indivspt:
          rec.certificate = indivspt(atk.attacked, base, opts.setup, opts.smoothing, opts.error_config, opts.E,
                                     cert_seeds[idx]);
          break;
      }
    } catch (const InfeasibleInput& e) {
      rec.error = e.what();
      rec.certificate.method = opts.method;
      rec.certificate.abstain_reason = e.what();
    }
    double norm = 0.0;
    for (double v : rec.gamma_star) norm += v * v;
    rec.covers_attack = !rec.certificate.abstained() && rec.certificate.radius_unclipped >= std::sqrt(norm);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });
  return out;
}

namespace {

struct Row {
  int label;
  int base_clean;
  int base_attacked;
  int prediction;
  double radius;
  bool clipped;
  double seconds;
};

EvalSummary summarize_rows(const std::vector<Row>& rows) {
  EvalSummary s;
  s.records = static_cast<int>(rows.size());
  if (rows.empty()) return s;
  std::vector<std::pair<double, bool>> certified;
  for (const Row& r : rows) {
    s.base_clean_accuracy += r.base_clean == r.label;
    s.base_attacked_accuracy += r.base_attacked == r.label;
    s.smoothed_accuracy += r.prediction == r.label;
    if (r.prediction == r.label && r.radius > 0.0) {
      s.certified_accuracy += 1.0;
      certified.emplace_back(r.radius, r.clipped);
    }
    s.mean_seconds += r.seconds;
  }
  const double n = static_cast<double>(rows.size());
  s.base_clean_accuracy /= n;
  s.base_attacked_accuracy /= n;
  s.smoothed_accuracy /= n;
  s.certified_accuracy /= n;
  s.mean_seconds /= n;
  std::vector<double> radii;
  double clip_value = -1.0;
  for (const auto& [r, c] : certified) {
    radii.push_back(r);
    if (c) clip_value = r;
  }
  s.radius_p25 = percentile(radii, 25);
  s.radius_p50 = percentile(radii, 50);
  s.radius_p75 = percentile(radii, 75);
  // A percentile sitting at the clip value is itself clipped.
  s.p25_clipped = clip_value > 0.0 && s.radius_p25 >= clip_value;
  s.p50_clipped = clip_value > 0.0 && s.radius_p50 >= clip_value;
  s.p75_clipped = clip_value > 0.0 && s.radius_p75 >= clip_value;
  return s;
}

}  // namespace

EvalSummary summarize(const std::vector<EvalRecord>& records) {
  std::vector<Row> rows;
  for (const auto& r : records) {
    rows.push_back({r.label, r.base_clean, r.base_attacked, r.certificate.prediction, r.certificate.radius,
                    r.certificate.clipped, r.seconds});
  }
  return summarize_rows(rows);
}

json to_json(const EvalRecord& r) {
  json j;
  j["image_id"] = r.image_id;
  j["attack_index"] = r.attack_index;
  j["label"] = r.label;
  j["gamma_star"] = r.gamma_star;
  j["base_clean"] = r.base_clean;
  j["base_attacked"] = r.base_attacked;
  j["certificate"] = to_json(r.certificate);
  j["covers_attack"] = r.covers_attack;
  j["seconds"] = r.seconds;
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

json to_json(const EvalSummary& s) {
  return json{{"records", s.records},
              {"base_clean_accuracy", s.base_clean_accuracy},
              {"base_attacked_accuracy", s.base_attacked_accuracy},
              {"smoothed_accuracy", s.smoothed_accuracy},
              {"certified_accuracy", s.certified_accuracy},
              {"radius_p25", s.radius_p25},
              {"radius_p50", s.radius_p50},
              {"radius_p75", s.radius_p75},
              {"p25_clipped", s.p25_clipped},
              {"p50_clipped", s.p50_clipped},
              {"p75_clipped", s.p75_clipped},
              {"mean_seconds", s.mean_seconds}};
}

std::string summary_csv_header() {
  return "records,base_clean_accuracy,base_attacked_accuracy,smoothed_accuracy,certified_accuracy,"
         "radius_p25,radius_p50,radius_p75,mean_seconds";
}

std::string to_csv_row(const EvalSummary& s) {
  auto radius = [](double r, bool clipped) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.4f%s", r, clipped ? "\xE2\x80\xA0" : "");
    return std::string(buf);
  };
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d,%.4f,%.4f,%.4f,%.4f,", s.records, s.base_clean_accuracy,
                s.base_attacked_accuracy, s.smoothed_accuracy, s.certified_accuracy);
  std::string out = buf;
  out += radius(s.radius_p25, s.p25_clipped) + "," + radius(s.radius_p50, s.p50_clipped) + "," +
         radius(s.radius_p75, s.p75_clipped);
  std::snprintf(buf, sizeof buf, ",%.3f", s.mean_seconds);
  return out + buf;
}

EvalSummary summarize_jsonl(const std::string& jsonl) {
  std::vector<Row> rows;
  std::istringstream in(jsonl);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      // Provenance header written ahead of the records.
      if (j.contains("run_config") && !j.contains("certificate")) continue;
      const json& c = j.at("certificate");
      const int pred = c.at("prediction").is_number_integer() ? c.at("prediction").get<int>() : kAbstain;
      rows.push_back({j.at("label").get<int>(), j.at("base_clean").get<int>(), j.at("base_attacked").get<int>(), pred,
                      c.at("radius").get<double>(), c.at("clipped").get<bool>(), j.at("seconds").get<double>()});
    } catch (const json::exception& e) {
      throw FormatError("report line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return summarize_rows(rows);
}

}  // namespace geosmooth
