#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <zlib.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "geosmooth/classifier.hpp"
#include "geosmooth/dataset.hpp"
#include "geosmooth/errors.hpp"
#include "support.hpp"

using namespace geosmooth;
namespace fs = std::filesystem;

namespace {

std::string tmp(const std::string& name) { return (fs::temp_directory_path() / ("geosmooth_" + name)).string(); }

void write_bytes(const std::string& path, const std::vector<unsigned char>& b) {
  std::ofstream f(path, std::ios::binary);
  f.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

std::vector<unsigned char> be32(std::uint32_t v) {
  return {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 8),
          static_cast<unsigned char>(v)};
}

std::vector<unsigned char> idx_images(std::uint32_t magic, int n, int rows, int cols, int body) {
  std::vector<unsigned char> b;
  for (auto v : {magic, static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(rows), static_cast<std::uint32_t>(cols)}) {
    auto x = be32(v);
    b.insert(b.end(), x.begin(), x.end());
  }
  for (int i = 0; i < body; ++i) b.push_back(static_cast<unsigned char>(i == 0 ? 255 : i % 7));
  return b;
}

std::vector<unsigned char> idx_labels(std::uint32_t magic, int n, int body) {
  std::vector<unsigned char> b;
  for (auto v : {magic, static_cast<std::uint32_t>(n)}) {
    auto x = be32(v);
    b.insert(b.end(), x.begin(), x.end());
  }
  for (int i = 0; i < body; ++i) b.push_back(static_cast<unsigned char>(i % 10));
  return b;
}

std::string fixture_command(const std::string& mode, const std::string& transcript = "") {
  std::string cmd = "python3 " + testing_support::source_path("tests/fixtures/fake_classifier.py") + " " + mode;
  if (!transcript.empty()) cmd += " " + transcript;
  return cmd;
}

Image two_by_two(double a, double b, double c, double d) { return Image(GridGeometry(2, 2), std::vector<double>{a, b, c, d}); }

}  // namespace

TEST_CASE("argmax breaks ties toward the lowest index") {
  const std::vector<double> v{1.0, 3.0, 3.0};
  CHECK(argmax(v) == 1);
  const std::vector<double> z(4, 0.0);
  CHECK(argmax(z) == 0);
}

TEST_CASE("all-zero MLP predicts class 0") {
  MlpWeights w;
  w.num_classes = 3;
  w.layers.push_back(DenseLayer{4, 3, std::vector<double>(12, 0.0), std::vector<double>(3, 0.0), Activation::none});
  const MlpClassifier m(w, GridGeometry(2, 2));
  std::mt19937_64 rng(1);
  for (int t = 0; t < 20; ++t) CHECK(m.classify(testing_support::random_image(rng, 2, 2)) == 0);
}

TEST_CASE("identity layer picks the brighter of two pixels") {
  // Rasters need even sides, so the two pixels live in a 2x2 image with the rest at zero weight.
  MlpWeights w;
  w.num_classes = 2;
  w.layers.push_back(DenseLayer{4, 2, {1, 0, 0, 0, 0, 1, 0, 0}, {0, 0}, Activation::none});
  const MlpClassifier m(w, GridGeometry(2, 2));
  CHECK(m.classify(two_by_two(0.2, 0.9, 0, 0)) == 1);
  CHECK(m.classify(two_by_two(0.9, 0.2, 0, 0)) == 0);
  const auto s = m.scores(two_by_two(0.2, 0.9, 0, 0));
  CHECK(s[0] == doctest::Approx(0.2));
  CHECK(s[1] == doctest::Approx(0.9));

  MlpWeights narrow;
  narrow.num_classes = 2;
  narrow.layers.push_back(DenseLayer{2, 2, {1, 0, 0, 1}, {0, 0}, Activation::none});
  CHECK_THROWS_AS(MlpClassifier(narrow, GridGeometry(2, 2)), FormatError);
}

TEST_CASE("batch equals elementwise and repeated calls agree") {
  const auto& data = testing_support::mnist_test();
  const auto m = make_classifier("mlp:" + testing_support::source_path("models/mnist_mlp_smooth.json"), GridGeometry(28, 28));
  std::vector<Image> batch(data.images.begin(), data.images.begin() + 37);
  const auto a = m->classify_batch(batch);
  const auto b = m->classify_batch(batch);
  CHECK(a == b);
  for (std::size_t i = 0; i < batch.size(); ++i) CHECK(m->classify(batch[i]) == a[i]);
  int correct = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) correct += a[i] == data.labels[i];
  CHECK(correct >= 30);
  const std::vector<Image> wrong{Image(GridGeometry(4, 4))};
  CHECK_THROWS_AS(m->classify_batch(wrong), DomainError);
}

TEST_CASE("centroid prototypes classify themselves") {
  std::vector<Image> protos;
  for (int k = 0; k < 4; ++k) {
    Image p(GridGeometry(2, 2), 0.0);
    p.data()[k] = 1.0;
    protos.push_back(p);
  }
  const CentroidClassifier c(protos);
  for (int k = 0; k < 4; ++k) CHECK(c.classify(protos[k]) == k);
  const std::string path = tmp("centroid.json");
  c.save(path);
  const CentroidClassifier back = CentroidClassifier::load(path);
  CHECK(back.prototypes() == c.prototypes());
  fs::remove(path);

  const std::vector<Image> imgs{two_by_two(1, 0, 0, 0), two_by_two(0.8, 0, 0, 0), two_by_two(0, 1, 0, 0)};
  const std::vector<int> labels{0, 0, 1};
  const auto fitted = CentroidClassifier::fit(imgs, labels, 2);
  CHECK(fitted.prototypes()[0].data()[0] == doctest::Approx(0.9));
}

TEST_CASE("weights JSON round trip and schema errors") {
  MlpWeights w;
  w.num_classes = 2;
  w.layers.push_back(DenseLayer{4, 2, {0.1, -0.25, 1e-7, 3.0, 0.5, 0.0, -1.0, 2.5}, {0.125, -7.0}, Activation::relu});
  const std::string path = tmp("weights.json");
  save_mlp_weights(w, path);
  const MlpWeights a = load_mlp_weights(path);
  CHECK(a == w);
  save_mlp_weights(a, path);
  CHECK(load_mlp_weights(path) == w);
  fs::remove(path);

  CHECK_THROWS_AS(parse_mlp_weights(R"({"layers":[],"num_classes":2})"), FormatError);
  CHECK_THROWS_AS(parse_mlp_weights("{not json"), FormatError);
  try {
    parse_mlp_weights(R"({"layers":[{"weights":[[1,2],[3,4]],"bias":[1],"activation":"none"}],"num_classes":2})");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("layers[0].bias") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_mlp_weights(R"({"layers":[{"weights":[[1,2],[3,4]],"bias":[1,2],"activation":"tanh"}],"num_classes":2})"),
                  FormatError);
  CHECK_THROWS_AS(parse_mlp_weights(R"({"layers":[{"weights":[[1,2],[3]],"bias":[1,2],"activation":"none"}],"num_classes":2})"),
                  FormatError);
  CHECK_THROWS_AS(parse_mlp_weights(R"({"layers":[{"weights":[[1,2],[3,4]],"bias":[1,2],"activation":"none"}],"num_classes":3})"),
                  FormatError);
  CHECK_THROWS_AS(parse_mlp_weights(R"({"layers":[{"weights":[[1,2]],"bias":[1],"activation":"relu"},{"weights":[[1,2]],"bias":[1],"activation":"none"}],"num_classes":1})"),
                  FormatError);
  CHECK_THROWS_AS(parse_mlp_weights(R"({"layers":[{"weights":[[1,2],[3,4]],"bias":[1,2],"activation":"none"}],"num_classes":2,"extra":1})"),
                  FormatError);
  CHECK_THROWS_AS(load_mlp_weights("/nonexistent/weights.json"), FormatError);
}

TEST_CASE("IDX reader") {
  const std::string ip = tmp("imgs.idx"), lp = tmp("lbls.idx");
  write_bytes(ip, idx_images(0x803, 3, 2, 2, 12));
  write_bytes(lp, idx_labels(0x801, 3, 3));
  const Dataset d = load_mnist_idx(ip, lp);
  CHECK(d.size() == 3);
  CHECK(d.images[0].data()[0] == 1.0);
  CHECK(d.labels[2] == 2);

  // gzip variant
  const std::string gz = tmp("imgs.idx.gz");
  {
    const auto raw = idx_images(0x803, 3, 2, 2, 12);
    gzFile f = gzopen(gz.c_str(), "wb");
    gzwrite(f, raw.data(), static_cast<unsigned>(raw.size()));
    gzclose(f);
  }
  CHECK(load_mnist_idx(gz, lp).images[1].data() == d.images[1].data());

  auto expect_format = [&](const std::vector<unsigned char>& img, const std::vector<unsigned char>& lbl, const char* needle) {
    write_bytes(ip, img);
    write_bytes(lp, lbl);
    try {
      load_mnist_idx(ip, lp);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  expect_format(idx_images(0x802, 3, 2, 2, 12), idx_labels(0x801, 3, 3), "offset 0");
  expect_format(idx_images(0x803, 3, 2, 2, 12), idx_labels(0x803, 3, 3), "offset 0");
  expect_format(idx_images(0x803, 3, 2, 2, 11), idx_labels(0x801, 3, 3), "offset");
  expect_format(idx_images(0x803, 3, 2, 2, 12), idx_labels(0x801, 2, 2), "offset");
  expect_format(std::vector<unsigned char>{0, 0}, idx_labels(0x801, 3, 3), "offset");
  fs::remove(ip);
  fs::remove(lp);
  fs::remove(gz);
}

TEST_CASE("shipped MNIST subset") {
  const auto& d = testing_support::mnist_train();
  CHECK(d.size() == 4000);
  CHECK(d.images[0].width() == 28);
  CHECK(testing_support::mnist_test().size() == 1000);
}

TEST_CASE("external backend golden transcript") {
  const std::string log = tmp("transcript.jsonl");
  {
    ExternalClassifier ext(fixture_command("labels", log), GridGeometry(2, 2), 3);
    const std::vector<Image> batch{two_by_two(0.5, 0.25, 0, 0), two_by_two(0, 0, 0, 1)};
    CHECK(ext.classify_batch(batch) == std::vector<int>{0, 0});
    const std::vector<Image> one{two_by_two(0, 0.75, 0, 0)};
    CHECK(ext.classify_batch(one) == std::vector<int>{1});
  }
  std::ifstream f(log);
  std::stringstream ss;
  ss << f.rdbuf();
  CHECK(ss.str() ==
        "{\"id\":0,\"images\":[[0.5,0.25,0.0,0.0],[0.0,0.0,0.0,1.0]],\"shape\":[2,2,1]}\n"
        "{\"id\":0,\"labels\":[0,0]}\n"
        "{\"id\":1,\"images\":[[0.0,0.75,0.0,0.0]],\"shape\":[2,2,1]}\n"
        "{\"id\":1,\"labels\":[1]}\n");
  fs::remove(log);
}

TEST_CASE("external backend scores and failures") {
  const std::vector<Image> batch{two_by_two(0.5, 0.25, 0, 0), two_by_two(0, 0, 0.9, 0)};
  {
    ExternalClassifier ext(fixture_command("scores"), GridGeometry(2, 2), 3);
    const auto s = ext.scores_batch(batch);
    CHECK(s[1] == std::vector<double>{0, 0, 1});
    CHECK(ext.has_scores());
  }
  {
    ExternalClassifier ext(fixture_command("labels"), GridGeometry(2, 2), 3);
    CHECK_THROWS_AS(ext.scores_batch(batch), std::logic_error);
    CHECK_FALSE(ext.has_scores());
  }
  for (const char* mode : {"badjson", "wrongid", "badlabel", "short", "exit"}) {
    ExternalClassifier ext(fixture_command(mode), GridGeometry(2, 2), 3);
    try {
      ext.classify_batch(batch);
      FAIL("expected BackendError for " << mode);
    } catch (const BackendError& e) {
      if (std::string(mode) == "badjson") CHECK(e.payload() == "this is not json");
    }
  }
  ExternalClassifier slow(fixture_command("sleep"), GridGeometry(2, 2), 3, std::chrono::milliseconds(300));
  CHECK_THROWS_AS(slow.classify_batch(batch), BackendError);
  CHECK_THROWS_AS(make_classifier("weird:thing", GridGeometry(2, 2)), std::exception);
}
