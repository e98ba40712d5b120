#include <doctest.h>

#include <cmath>

#include "venom/metrics.hpp"
#include "venom/rng.hpp"

using namespace venom;

namespace {

// constant-logit classifier predicting class `winner`
Network constant_classifier(int classes, int winner) {
  Network net;
  net.in_channels = 1;
  net.in_height = 1;
  net.in_width = 1;
  net.num_classes = classes;
  Layer flat;
  flat.spec.kind = LayerKind::Flatten;
  flat.spec.name = "flatten";
  net.layers.push_back(flat);
  Layer dense;
  dense.spec.kind = LayerKind::Dense;
  dense.spec.name = "dense";
  dense.spec.in_features = 1;
  dense.spec.out_features = classes;
  dense.weight = Tensor({classes, 1});
  dense.bias = Tensor({classes});
  dense.bias.data[winner] = 5.0f;
  net.layers.push_back(dense);
  return net;
}

Dataset tiny_set(const std::vector<int>& labels, int classes) {
  Dataset ds;
  ds.num_classes = classes;
  ds.labels = labels;
  ds.images = Tensor({static_cast<int>(labels.size()), 1, 1, 1});
  for (std::size_t i = 0; i < labels.size(); ++i)
    ds.images.data[i] = 0.1f * static_cast<float>(i);
  return ds;
}

}  // namespace

TEST_CASE("evaluate_model") {
  const Dataset clean = tiny_set({0, 1, 2, 3, 0, 1, 2, 3, 0, 1}, 4);
  const Dataset asr_set = tiny_set({1, 1, 1, 1, 1, 1}, 4);

  SUBCASE("constant classifier hits asr 1 and tacc 1 on its class") {
    Network net = constant_classifier(4, 1);
    EvalRecord r = evaluate_model(net, clean, asr_set, 0.9, 1);
    CHECK(r.asr == doctest::Approx(1.0));
    CHECK(r.tacc == doctest::Approx(1.0));
    CHECK(r.ba == doctest::Approx(0.3));  // three class-1 samples of ten
    CHECK(r.bad == doctest::Approx(0.6));
  }

  SUBCASE("clean baseline equal to the model itself gives bad = 0") {
    Network net = constant_classifier(4, 0);
    EvalRecord self = evaluate_model(net, clean, asr_set, 0.0, 1);
    EvalRecord r = evaluate_model(net, clean, asr_set, self.ba, 1);
    CHECK(r.bad == doctest::Approx(0.0));
  }

  SUBCASE("hand tally on known predictions") {
    // constant class-2 classifier: ba = #label2/10 = 0.2; asr over a set
    // labeled t=2... build a 5-sample eval set
    Network net = constant_classifier(4, 2);
    const Dataset asr2 = tiny_set({2, 2, 2, 2, 2}, 4);
    EvalRecord r = evaluate_model(net, clean, asr2, 0.95, 2);
    CHECK(r.ba == doctest::Approx(2.0 / 10.0));
    CHECK(r.asr == doctest::Approx(1.0));
    CHECK(r.tacc == doctest::Approx(1.0));
    CHECK(r.bad == doctest::Approx(0.75));
  }

  SUBCASE("empty sets are rejected") {
    Network net = constant_classifier(4, 0);
    Dataset empty;
    empty.num_classes = 4;
    empty.images = Tensor({1, 1, 1, 1});
    empty.labels = {0};
    CHECK_THROWS_AS(evaluate_model(net, clean, Dataset{}, 0.9, 1), Error);
  }
}

TEST_CASE("asur reproduces the closed forms") {
  SUBCASE("published reference rows") {
    CHECK(asur(0.9078, 0.9506, 0.8880, 0.0593) == doctest::Approx(0.0772).epsilon(5e-3));
    CHECK(asur(0.8517, 0.9909, 0.6679, 0.5522) == doctest::Approx(0.3318).epsilon(5e-3));
  }

  SUBCASE("closed-form arithmetic") {
    // asr_after=1, dBA=0, ba_before=0.90 -> 0.95 + 0.05*(0.10/0.20)
    CHECK(asur(0.90, 0.95, 0.90, 1.0) == doctest::Approx(0.975));
  }

  SUBCASE("branch selection is exactly at delta") {
    // dBA = delta lands in the upper branch
    const double at = asur(0.90, 0.9, 0.80, 0.5);
    CHECK(at == doctest::Approx(0.95 * 0.5 + 0.05 * 0.0 / 0.20));
    const double below = asur(0.90, 0.9, 0.80 - 1e-9, 0.5);
    CHECK(below == doctest::Approx(0.50 * 0.5 + 0.50 * (1e-9) / 0.80).epsilon(1e-6));
  }

  SUBCASE("monotone increasing in asr_after on both branches") {
    for (double asr_a = 0.0; asr_a <= 0.94; asr_a += 0.1) {
      CHECK(asur(0.9, 0.9, 0.88, asr_a + 0.05) > asur(0.9, 0.9, 0.88, asr_a));
      CHECK(asur(0.9, 0.9, 0.60, asr_a + 0.05) > asur(0.9, 0.9, 0.60, asr_a));
    }
  }

  SUBCASE("dBA monotonicity: increasing above delta, decreasing below") {
    CHECK(asur(0.9, 0.9, 0.89, 0.5) > asur(0.9, 0.9, 0.85, 0.5));
    CHECK(asur(0.9, 0.9, 0.60, 0.5) > asur(0.9, 0.9, 0.70, 0.5));
  }

  SUBCASE("degenerate baselines are rejected") {
    // with delta = -0.10 the guards cannot fire for in-range inputs; a
    // positive tolerance makes the upper-branch denominator collapse
    CHECK_THROWS_AS(asur(0.75, 0.9, 1.0, 0.5, 0.25), Error);
    CHECK_THROWS_AS(asur(0.9, 0.9, 1.2, 0.5), Error);  // out of range
  }

  SUBCASE("record assembly") {
    SurvivabilityRecord r = SurvivabilityRecord::make(0.9078, 0.9506, 0.8880, 0.0593);
    CHECK(r.delta_ba == doctest::Approx(-0.0198));
    CHECK(r.delta_asr == doctest::Approx(-0.8913));
    CHECK(r.asur_value == doctest::Approx(0.0772).epsilon(5e-3));
  }
}

TEST_CASE("psnr and linf") {
  SUBCASE("identical images give +inf psnr and 0 linf") {
    Tensor a({1, 2, 2});
    a.data = {0.1f, 0.4f, 0.7f, 1.0f};
    CHECK(std::isinf(psnr(a, a)));
    CHECK(linf(a, a) == 0.0);
  }

  SUBCASE("one full-scale pixel in four: 10*log10(4) dB") {
    Tensor a({1, 2, 2});
    Tensor b({1, 2, 2});
    b.data[0] = 1.0f;  // 255 after rescale
    CHECK(psnr(a, b) == doctest::Approx(10.0 * std::log10(4.0)).epsilon(1e-9));
    CHECK(psnr(a, b) == doctest::Approx(6.0206).epsilon(1e-4));
    CHECK(linf(a, b) == 255.0);
  }

  SUBCASE("blend deviation on the 8-bit scale") {
    Tensor a({1, 1, 1});
    Tensor b({1, 1, 1});
    b.data[0] = 0.2f;
    CHECK(linf(a, b) == 51.0);
  }

  SUBCASE("symmetry and shape checks") {
    Rng rng(6);
    Tensor a({1, 3, 3}), b({1, 3, 3});
    for (auto& v : a.data) v = static_cast<float>(rng.uniform());
    for (auto& v : b.data) v = static_cast<float>(rng.uniform());
    CHECK(psnr(a, b) == psnr(b, a));
    CHECK(linf(a, b) == linf(b, a));
    Tensor c({1, 2, 2});
    CHECK_THROWS_AS(psnr(a, c), ShapeError);
    CHECK_THROWS_AS(linf(a, c), ShapeError);
  }

  SUBCASE("matches an independent mse computation") {
    Rng rng(16);
    Tensor a({1, 4, 4}), b({1, 4, 4});
    for (auto& v : a.data) v = static_cast<float>(rng.uniform());
    for (auto& v : b.data) v = static_cast<float>(rng.uniform());
    double mse = 0.0;
    for (int i = 0; i < 16; ++i) {
      const double qa = std::lround(a.data[i] * 255.0);
      const double qb = std::lround(b.data[i] * 255.0);
      mse += (qa - qb) * (qa - qb);
    }
    mse /= 16.0;
    CHECK(psnr(a, b) == doctest::Approx(10.0 * std::log10(255.0 * 255.0 / mse)).epsilon(1e-9));
  }
}

TEST_CASE("linear cka") {
  Rng rng(12);
  std::vector<std::vector<double>> x(5, std::vector<double>(3));
  for (auto& row : x)
    for (auto& v : row) v = rng.uniform(-1.0, 1.0);

  SUBCASE("self-alignment is 1") {
    CHECK(linear_cka(x, x) == doctest::Approx(1.0).epsilon(1e-9));
  }

  SUBCASE("invariant to orthogonal transform and scaling") {
    // rotate feature pairs (0,1) by 37 degrees and scale by 2.5
    const double c = std::cos(0.6458), s = std::sin(0.6458);
    std::vector<std::vector<double>> y = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
      y[i][0] = 2.5 * (c * x[i][0] - s * x[i][1]);
      y[i][1] = 2.5 * (s * x[i][0] + c * x[i][1]);
      y[i][2] = 2.5 * x[i][2];
    }
    CHECK(linear_cka(x, y) == doctest::Approx(1.0).epsilon(1e-6));
  }

  SUBCASE("matches the double-precision feature-space transcription") {
    std::vector<std::vector<double>> y(5, std::vector<double>(4));
    for (auto& row : y)
      for (auto& v : row) v = rng.uniform(-2.0, 2.0);

    // column-center, then ||Y'X||_F^2 / (||X'X||_F ||Y'Y||_F)
    auto center = [](std::vector<std::vector<double>> m) {
      for (std::size_t j = 0; j < m[0].size(); ++j) {
        double mean = 0;
        for (auto& r : m) mean += r[j];
        mean /= m.size();
        for (auto& r : m) r[j] -= mean;
      }
      return m;
    };
    auto xc = center(x), yc = center(y);
    auto frob2_cross = [&](const auto& a, const auto& b) {
      double out = 0;
      for (std::size_t i = 0; i < a[0].size(); ++i)
        for (std::size_t j = 0; j < b[0].size(); ++j) {
          double dot = 0;
          for (std::size_t n = 0; n < a.size(); ++n) dot += a[n][i] * b[n][j];
          out += dot * dot;
        }
      return out;
    };
    const double expect = frob2_cross(xc, yc) /
                          (std::sqrt(frob2_cross(xc, xc)) * std::sqrt(frob2_cross(yc, yc)));
    CHECK(linear_cka(x, y) == doctest::Approx(expect).epsilon(1e-9));
    CHECK(linear_cka(x, y) >= 0.0);
    CHECK(linear_cka(x, y) <= 1.0);
  }

  SUBCASE("zero variance is rejected") {
    std::vector<std::vector<double>> flat(4, std::vector<double>(2, 3.0));
    CHECK_THROWS_AS(linear_cka(flat, flat), Error);
  }
}

TEST_CASE("crucial neuron similarity trivial fixtures") {
  // 1x1 conv, one channel; identical model and samples -> similarity 1
  Network net;
  net.in_channels = 1;
  net.in_height = 2;
  net.in_width = 2;
  net.num_classes = 2;
  Layer conv;
  conv.spec.kind = LayerKind::Conv2d;
  conv.spec.name = "conv";
  conv.spec.in_channels = 1;
  conv.spec.out_channels = 1;
  conv.spec.kernel_size = 1;
  conv.weight = Tensor({1, 1, 1, 1});
  conv.weight.data[0] = 1.0f;
  conv.bias = Tensor({1});
  net.layers.push_back(conv);
  Layer relu;
  relu.spec.kind = LayerKind::Relu;
  relu.spec.name = "relu";
  net.layers.push_back(relu);

  Tcdp tcdp;
  tcdp.layer_name = "conv";
  tcdp.neurons = {0};
  tcdp.counts = {1};

  // three copies of one sample: any cross pair compares a vector with itself
  Dataset samples;
  samples.num_classes = 2;
  samples.images = Tensor({3, 1, 2, 2});
  Rng rng(2);
  for (int p = 0; p < 4; ++p) {
    const float v = static_cast<float>(rng.uniform(0.1, 1.0));
    for (int i = 0; i < 3; ++i) samples.images.data[i * 4 + p] = v;
  }
  samples.labels = {0, 0, 0};

  SUBCASE("same model, same samples: similarity 1") {
    auto sims = crucial_neuron_similarity(net, net, tcdp, samples, samples, 5, 50);
    REQUIRE(sims.size() == 1);
    CHECK(sims[0] == doctest::Approx(1.0).epsilon(1e-6));
  }

  SUBCASE("orthogonal activations: similarity 0") {
    Dataset a = samples, b = samples;
    // a lights only pixel 0, b only pixel 3
    for (int i = 0; i < 3; ++i) {
      std::fill_n(a.images.data.begin() + i * 4, 4, 0.0f);
      std::fill_n(b.images.data.begin() + i * 4, 4, 0.0f);
      a.images.data[i * 4] = 1.0f;
      b.images.data[i * 4 + 3] = 1.0f;
    }
    auto sims = crucial_neuron_similarity(net, net, tcdp, a, b, 5, 50);
    CHECK(sims[0] == doctest::Approx(0.0));
  }

  SUBCASE("empty inputs rejected") {
    CHECK_THROWS_AS(crucial_neuron_similarity(net, net, Tcdp{}, samples, samples, 5, 50),
                    Error);
  }
}
