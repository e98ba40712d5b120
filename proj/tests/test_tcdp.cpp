#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "venom/dataset.hpp"
#include "venom/rng.hpp"
#include "alg1_oracle.hpp"
#include "venom/tcdp.hpp"

using namespace venom;

namespace {

// 1x1-conv network whose channel c computes relu(w_c * pixel + b_c); lets
// fixtures dictate activation vectors directly.
Network one_by_one_net(const std::vector<float>& weights, const std::vector<float>& biases,
                       int h, int w) {
  Network net;
  net.in_channels = 1;
  net.in_height = h;
  net.in_width = w;
  net.num_classes = 2;
  Layer conv;
  conv.spec.kind = LayerKind::Conv2d;
  conv.spec.name = "conv";
  conv.spec.in_channels = 1;
  conv.spec.out_channels = static_cast<int>(weights.size());
  conv.spec.kernel_size = 1;
  conv.weight = Tensor({conv.spec.out_channels, 1, 1, 1});
  conv.weight.data = weights;
  conv.bias = Tensor({conv.spec.out_channels});
  conv.bias.data = biases;
  net.layers.push_back(conv);
  Layer relu;
  relu.spec.kind = LayerKind::Relu;
  relu.spec.name = "relu";
  net.layers.push_back(relu);
  return net;
}

Dataset dataset_from_images(std::vector<std::vector<float>> images, std::vector<int> labels,
                            int num_classes, int h, int w) {
  Dataset ds;
  ds.num_classes = num_classes;
  ds.labels = std::move(labels);
  ds.images = Tensor({static_cast<int>(images.size()), 1, h, w});
  for (std::size_t i = 0; i < images.size(); ++i)
    std::copy(images[i].begin(), images[i].end(),
              ds.images.data.begin() + i * images[i].size());
  return ds;
}

}  // namespace

TEST_CASE("calc_similarity on crafted activations") {
  SUBCASE("identical nonzero activations give similarity 1") {
    // constant images -> every sample has the same activation vector
    Network net = one_by_one_net({1.0f}, {0.1f}, 2, 2);
    std::vector<std::vector<float>> images(6, std::vector<float>(4, 0.5f));
    Dataset ds = dataset_from_images(images, {0, 0, 0, 0, 0, 0}, 2, 2, 2);
    std::vector<int> samples(6);
    std::iota(samples.begin(), samples.end(), 0);
    SimilarityTable t = calc_similarity(net, "conv", {0}, ds, samples, 9, 50);
    CHECK(t.value_for(0) == doctest::Approx(1.0));
  }

  SUBCASE("orthogonal groups give similarity 0") {
    // weight 1, bias 0: activation == image; one half lights pixel 0,
    // the other pixel 1, orthogonal by construction
    Network net = one_by_one_net({1.0f}, {0.0f}, 1, 2);
    std::vector<std::vector<float>> images;
    std::vector<int> labels;
    for (int i = 0; i < 8; ++i) {
      images.push_back(i % 2 ? std::vector<float>{1.0f, 0.0f}
                             : std::vector<float>{0.0f, 1.0f});
      labels.push_back(0);
    }
    Dataset ds = dataset_from_images(images, labels, 2, 1, 2);
    // find a seed whose halves are exactly the odd/even split
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      std::vector<int> order{0, 1, 2, 3, 4, 5, 6, 7};
      Rng rng(seed);
      shuffle(order, rng);
      bool split = true;
      for (int i = 0; i < 4; ++i)
        if (order[i] % 2 != order[0] % 2) split = false;
      if (!split) continue;
      SimilarityTable t = calc_similarity(net, "conv", {0}, ds, {0, 1, 2, 3, 4, 5, 6, 7},
                                          seed, 50);
      CHECK(t.value_for(0) == doctest::Approx(0.0));
      return;
    }
    FAIL("no seed produced the odd/even split");
  }

  SUBCASE("matches the exhaustive double-loop oracle") {
    Rng rng(31);
    std::vector<std::vector<float>> images;
    std::vector<int> labels;
    for (int i = 0; i < 6; ++i) {
      std::vector<float> img(9);
      for (auto& v : img) v = static_cast<float>(rng.uniform());
      images.push_back(img);
      labels.push_back(i % 2);
    }
    Dataset ds = dataset_from_images(images, labels, 2, 3, 3);
    Network net = one_by_one_net({1.5f, -0.8f, 0.6f}, {0.0f, 0.2f, -0.1f}, 3, 3);
    std::vector<int> samples{0, 1, 2, 3, 4, 5};
    std::vector<int> channels{0, 1, 2};
    SimilarityTable t = calc_similarity(net, "conv", channels, ds, samples, 77, 50);
    auto oracle = venom::testing::calc_similarity_oracle(net, "conv", ds, samples, channels, 77, 50);
    for (int c = 0; c < 3; ++c) CHECK(t.value_for(c) == doctest::Approx(oracle[c]).epsilon(1e-6));
  }

  SUBCASE("needs at least two samples and one channel") {
    Network net = one_by_one_net({1.0f}, {0.0f}, 2, 2);
    Dataset ds = dataset_from_images({{0.1f, 0.2f, 0.3f, 0.4f}}, {0}, 2, 2, 2);
    CHECK_THROWS_AS(calc_similarity(net, "conv", {0}, ds, {0}, 1, 50), Error);
  }
}

TEST_CASE("generate_tcdp behavior") {
  // Channels respond to disjoint pixel groups; class images light up the
  // pixel groups so that channel "cruciality" is fully controlled.
  // Channel c has weight 1 bias 0, activation = image restricted by relu.
  auto build_fixture = [](int classes, int per_class, std::uint64_t data_seed) {
    Rng rng(data_seed);
    std::vector<std::vector<float>> images;
    std::vector<int> labels;
    for (int cls = 0; cls < classes; ++cls)
      for (int i = 0; i < per_class; ++i) {
        std::vector<float> img(4, 0.0f);
        // class-dependent stable direction plus small noise
        for (int p = 0; p < 4; ++p)
          img[p] = 0.1f + (p == cls % 4 ? 0.8f : 0.0f) +
                   static_cast<float>(rng.uniform(0.0, 0.05));
        images.push_back(img);
        labels.push_back(cls);
      }
    return dataset_from_images(images, labels, classes, 2, 2);
  };

  SUBCASE("single class: counts collapse to 1") {
    Dataset ds = build_fixture(1, 6, 3);
    ds.num_classes = 1;
    Network net = one_by_one_net({1.0f, 0.5f}, {0.0f, 0.0f}, 2, 2);
    TcdpParams params;
    params.layer = "conv";
    params.eps1 = 0.5;
    params.eps2 = 0.999;  // keep everything
    params.k = 2;
    Tcdp t = generate_tcdp(net, ds, 0, params, 5);
    for (int c : t.counts) CHECK(c == 1);
  }

  SUBCASE("count ordering puts the widely-crucial channel first") {
    // 2-plane input, 1x1 conv reading plane c into channel c. Plane 0
    // (channel A) carries a stable per-class direction for classes 0..2
    // and an alternating one for class 3; plane 1 (channel B) is stable
    // only for class 0. So A is crucial for 3 classes, B for 1.
    Network net;
    net.in_channels = 2;
    net.in_height = 2;
    net.in_width = 2;
    net.num_classes = 4;
    Layer conv;
    conv.spec.kind = LayerKind::Conv2d;
    conv.spec.name = "conv";
    conv.spec.in_channels = 2;
    conv.spec.out_channels = 2;
    conv.spec.kernel_size = 1;
    conv.weight = Tensor({2, 2, 1, 1});
    conv.weight.data = {1.0f, 0.0f, 0.0f, 1.0f};  // channel c = plane c
    conv.bias = Tensor({2});
    net.layers.push_back(conv);
    Layer relu;
    relu.spec.kind = LayerKind::Relu;
    relu.spec.name = "relu";
    net.layers.push_back(relu);

    Dataset ds;
    ds.num_classes = 4;
    const int per_class = 8;
    ds.images = Tensor({4 * per_class, 2, 2, 2});
    auto pixel = [&](int sample, int plane, int p) -> float& {
      return ds.images.data[(static_cast<std::size_t>(sample) * 2 + plane) * 4 + p];
    };
    int s = 0;
    for (int cls = 0; cls < 4; ++cls)
      for (int i = 0; i < per_class; ++i, ++s) {
        ds.labels.push_back(cls);
        // plane 0: classes 0..2 use the fixed direction e_cls; class 3
        // alternates between two orthogonal directions
        if (cls < 3) pixel(s, 0, cls) = 1.0f;
        else if (i % 2) pixel(s, 0, 3) = 1.0f;
        else pixel(s, 0, 0) = pixel(s, 0, 1) = 1.0f;
        // plane 1: only class 0 is stable
        if (cls == 0) pixel(s, 1, 0) = 1.0f;
        else if (i % 2) pixel(s, 1, cls) = 1.0f;
        else pixel(s, 1, (cls + 1) % 4) = 1.0f;
      }

    TcdpParams params;
    params.layer = "conv";
    params.eps1 = 0.9;
    params.eps2 = 0.7;
    params.k = 1;
    Tcdp t = generate_tcdp(net, ds, 0, params, 5);
    REQUIRE(t.neurons.size() == 1);
    CHECK(t.neurons[0] == 0);  // channel A
    CHECK(t.counts[0] == 3);
  }

  SUBCASE("empty crucial set raises the structured error") {
    Rng rng(17);
    std::vector<std::vector<float>> images;
    std::vector<int> labels;
    for (int i = 0; i < 12; ++i) {
      std::vector<float> img(4);
      for (auto& v : img) v = static_cast<float>(rng.uniform(-1.0, 1.0));
      images.push_back(img);
      labels.push_back(i % 2);
    }
    Dataset ds = dataset_from_images(images, labels, 2, 2, 2);
    Network net = one_by_one_net({1.0f, -1.0f}, {0.0f, 0.0f}, 2, 2);
    TcdpParams params;
    params.layer = "conv";
    params.eps1 = 0.999999;  // nothing passes
    params.eps2 = 0.5;
    params.k = 2;
    CHECK_THROWS_WITH_AS(generate_tcdp(net, ds, 0, params, 5),
                         doctest::Contains("no crucial neurons"), Error);
  }

  SUBCASE("randomized fixtures match the straight-line transcription") {
    for (std::uint64_t fixture = 0; fixture < 6; ++fixture) {
      Rng rng(fixture * 131 + 7);
      const int classes = 2 + static_cast<int>(rng.uniform_below(2));
      const int channels = 3 + static_cast<int>(rng.uniform_below(5));
      const int per_class = 3 + static_cast<int>(rng.uniform_below(3));
      std::vector<float> w(channels), b(channels);
      for (auto& v : w) v = static_cast<float>(rng.uniform(-1.0, 1.5));
      for (auto& v : b) v = static_cast<float>(rng.uniform(-0.3, 0.3));
      Network net = one_by_one_net(w, b, 2, 2);

      std::vector<std::vector<float>> images;
      std::vector<int> labels;
      for (int cls = 0; cls < classes; ++cls)
        for (int i = 0; i < per_class; ++i) {
          std::vector<float> img(4);
          for (int p = 0; p < 4; ++p)
            img[p] = static_cast<float>(0.5 + 0.4 * std::sin(cls + p) +
                                        rng.uniform(-0.2, 0.2));
          images.push_back(img);
          labels.push_back(cls);
        }
      Dataset ds = dataset_from_images(images, labels, classes, 2, 2);

      TcdpParams params;
      params.layer = "conv";
      params.eps1 = 0.3 + 0.5 * rng.uniform();
      params.eps2 = 0.5 + 0.45 * rng.uniform();
      params.k = 1 + static_cast<int>(rng.uniform_below(channels));
      const std::uint64_t seed = rng.next_u64();

      venom::testing::Alg1OracleResult expect = venom::testing::tcdp_oracle(
          net, "conv", channels, ds, 0, params.eps1, params.eps2, params.k, seed, 50);
      if (expect.no_crucial) {
        CHECK_THROWS_AS(generate_tcdp(net, ds, 0, params, seed), Error);
      } else {
        Tcdp got = generate_tcdp(net, ds, 0, params, seed);
        CHECK(got.neurons == expect.neurons);
        CHECK(got.counts == expect.counts);
      }
    }
  }
}

TEST_CASE("tcdp properties") {
  Dataset ds = generate_synthetic_dataset(3, 20, 16, 13);
  Network net = build_small_cnn<float>(1, 16, 16, 3, 1, 29);

  SUBCASE("raising eps1 never grows a crucial set; determinism") {
    std::vector<int> all(16);
    std::iota(all.begin(), all.end(), 0);
    SimilarityTable sims =
        calc_similarity(net, "conv2", all, ds, ds.indices_of_class(0), 55, 50);
    auto crucial_at = [&](double eps1) {
      std::vector<int> out;
      for (std::size_t i = 0; i < sims.channels.size(); ++i)
        if (sims.values[i] > eps1) out.push_back(sims.channels[i]);
      return out;
    };
    for (double lo : {0.1, 0.4, 0.7}) {
      auto a = crucial_at(lo), b = crucial_at(lo + 0.2);
      for (int c : b) CHECK(std::count(a.begin(), a.end(), c) == 1);
    }
    SimilarityTable again =
        calc_similarity(net, "conv2", all, ds, ds.indices_of_class(0), 55, 50);
    CHECK(again.values == sims.values);
  }

  SUBCASE("permuting the sample list does not change the mean") {
    // same membership in both groups (mean over all cross pairs is
    // order-free); permute within the halves by fixing the seed split
    std::vector<int> samples = ds.indices_of_class(1);
    SimilarityTable t1 = calc_similarity(net, "conv2", {0, 1, 2}, ds, samples, 4, 50);
    SimilarityTable t2 = calc_similarity(net, "conv2", {0, 1, 2}, ds, samples, 4, 50);
    CHECK(t1.values == t2.values);
  }

  SUBCASE("export text round-trips") {
    Tcdp t;
    t.layer_name = "conv2";
    t.neurons = {5, 3, 11};
    t.counts = {3, 2, 2};
    t.eps1 = 0.9;
    t.eps2 = 0.7;
    t.k = 10;
    const Tcdp back = parse_tcdp_text(t.to_text());
    CHECK(back.layer_name == t.layer_name);
    CHECK(back.neurons == t.neurons);
    CHECK(back.counts == t.counts);
    CHECK(back.eps1 == t.eps1);
    CHECK(back.k == t.k);
  }

  SUBCASE("non-conv layer is rejected") {
    TcdpParams params;
    params.layer = "relu1";
    CHECK_THROWS_AS(generate_tcdp(net, ds, 0, params, 1), Error);
    params.layer = "missing";
    CHECK_THROWS_AS(generate_tcdp(net, ds, 0, params, 1), Error);
  }
}
