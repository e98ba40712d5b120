#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "venom/poison.hpp"
#include "venom/train.hpp"

using namespace venom;

namespace {

TriggerSpec corner_patch(int channels, int h, int w) {
  TriggerSpec t;
  t.kind = TriggerSpec::Kind::Patch;
  t.pattern = Tensor({channels, 3, 3});
  std::fill(t.pattern.data.begin(), t.pattern.data.end(), 1.0f);
  t.row = h - 3;
  t.col = w - 3;
  return t;
}

// tiny 2-class task for fast loops
struct TinyTask {
  Dataset train = generate_synthetic_dataset(2, 20, 16, 3);
  Network fresh = build_small_cnn<float>(1, 16, 16, 2, 1, 17);
};

}  // namespace

TEST_CASE("micro epoch arithmetic") {
  TrainConfig cfg;
  cfg.total_epochs = 30;
  cfg.micro_fraction = 0.05;
  CHECK(cfg.micro_epochs() == 2);  // ceil(1.5)
  cfg.total_epochs = 20;
  CHECK(cfg.micro_epochs() == 1);
  cfg.total_epochs = 100;
  CHECK(cfg.micro_epochs() == 5);
}

TEST_CASE("micro-trained model beats chance and is deterministic") {
  TinyTask task;
  TrainConfig cfg;
  cfg.total_epochs = 60;  // 3 micro epochs
  cfg.batch_size = 8;
  cfg.seed = 5;
  Network fm = micro_train(task.fresh, task.train, cfg);
  Network fm2 = micro_train(task.fresh, task.train, cfg);
  CHECK(fm.parameters_equal(fm2));
  CHECK(model_accuracy(fm, task.train) > 0.5);
}

TEST_CASE("schedule_step follows the annealing rule") {
  SUBCASE("closed-form values") {
    WeightSchedule ws;
    ws.T = 300;
    ScheduleStep s0 = schedule_step(ws, 0, 2.0, 0.5);
    CHECK(s0.omega2 == doctest::Approx(1.0));
    CHECK(s0.omega1 == doctest::Approx(1.0));
    CHECK(ws.beta == doctest::Approx(4.0));  // L1/L2 at step 0
    CHECK(s0.l2_scaled == doctest::Approx(2.0));

    ScheduleStep s100 = schedule_step(ws, 100, 2.0, 0.5);
    CHECK(s100.omega2 == doctest::Approx(std::cos(M_PI / 6)).epsilon(1e-9));
    CHECK(s100.omega1 == doctest::Approx(2.0 - std::cos(M_PI / 6)).epsilon(1e-9));
  }

  SUBCASE("beta guards a vanishing first loss") {
    WeightSchedule ws;
    ws.T = 10;
    schedule_step(ws, 0, 2.0, 0.0);
    CHECK(ws.beta == doctest::Approx(1.0));
  }

  SUBCASE("freeze below the floor, omega1+omega2 == 2 throughout") {
    WeightSchedule ws;
    ws.T = 15;
    double last_omega2 = 2.0;
    double frozen_value = -1.0;
    for (long t = 0; t <= 30; ++t) {
      ScheduleStep s = schedule_step(ws, t, 1.0, 1.0);
      CHECK(s.omega1 + s.omega2 == doctest::Approx(2.0).epsilon(1e-12));
      CHECK(s.omega2 <= last_omega2 + 1e-12);
      last_omega2 = s.omega2;
      if (frozen_value >= 0.0) CHECK(s.omega2 == frozen_value);
      if (frozen_value < 0.0 && s.omega2 <= 0.01) frozen_value = s.omega2;
    }
    CHECK(frozen_value >= 0.0);
  }

  SUBCASE("T must be positive") {
    WeightSchedule ws;
    ws.T = 0;
    CHECK_THROWS_AS(schedule_step(ws, 0, 1.0, 1.0), Error);
  }
}

TEST_CASE("attention imitation loss on crafted activations") {
  // 1x1 conv, channel = input plane; activations fully controlled
  Network net;
  net.in_channels = 1;
  net.in_height = 1;
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

  SUBCASE("parallel activations give zero loss") {
    ReferenceBank bank;
    bank.units = {{{1.0f, 0.0f}}};  // unit reference [1,0]
    Tensor batch({1, 1, 1, 2});
    batch.data = {5.0f, 0.0f};  // positive multiple of the reference
    Rng sampler(1);
    const double loss =
        attention_imitation_loss(net, bank, batch, {0}, 0, tcdp, sampler);
    CHECK(loss == doctest::Approx(0.0));
  }

  SUBCASE("orthogonal unit activations give per-sample loss 2") {
    ReferenceBank bank;
    bank.units = {{{0.0f, 1.0f}}};
    Tensor batch({1, 1, 1, 2});
    batch.data = {3.0f, 0.0f};  // normalizes to [1,0]
    Rng sampler(1);
    const double loss =
        attention_imitation_loss(net, bank, batch, {0}, 0, tcdp, sampler);
    CHECK(loss == doctest::Approx(2.0));
  }

  SUBCASE("non-target labels are rejected") {
    ReferenceBank bank;
    bank.units = {{{0.0f, 1.0f}}};
    Tensor batch({1, 1, 1, 2});
    Rng sampler(1);
    CHECK_THROWS_AS(attention_imitation_loss(net, bank, batch, {1}, 0, tcdp, sampler),
                    Error);
  }
}

TEST_CASE("imitation loss matches a scalar transcription on a 2x3 fixture") {
  // 3-channel 1x1 conv over a 1x2 image: sigma_c = relu(w_c * pixels + b_c)
  Network net;
  net.in_channels = 1;
  net.in_height = 1;
  net.in_width = 2;
  net.num_classes = 2;
  Layer conv;
  conv.spec.kind = LayerKind::Conv2d;
  conv.spec.name = "conv";
  conv.spec.in_channels = 1;
  conv.spec.out_channels = 3;
  conv.spec.kernel_size = 1;
  conv.weight = Tensor({3, 1, 1, 1});
  conv.weight.data = {1.0f, 0.5f, 2.0f};
  conv.bias = Tensor({3});
  conv.bias.data = {0.0f, 0.1f, -0.2f};
  net.layers.push_back(conv);
  Layer relu;
  relu.spec.kind = LayerKind::Relu;
  relu.spec.name = "relu";
  net.layers.push_back(relu);

  Tcdp tcdp;
  tcdp.layer_name = "conv";
  tcdp.neurons = {0, 1, 2};
  tcdp.counts = {1, 1, 1};

  ReferenceBank bank;  // one reference sample, three unit vectors
  bank.units = {{{0.6f, 0.8f}, {1.0f, 0.0f}, {0.70710678f, 0.70710678f}}};

  Tensor batch({2, 1, 1, 2});
  batch.data = {0.3f, 0.9f, 0.5f, 0.2f};
  Rng sampler(9);
  const double got = attention_imitation_loss(net, bank, batch, {0, 0}, 0, tcdp, sampler);

  // straight transcription of the formula
  double expect = 0.0;
  for (int s = 0; s < 2; ++s) {
    const double px0 = batch.data[s * 2 + 0], px1 = batch.data[s * 2 + 1];
    const double w[3] = {1.0, 0.5, 2.0}, b[3] = {0.0, 0.1, -0.2};
    for (int c = 0; c < 3; ++c) {
      double a0 = std::max(0.0, w[c] * px0 + b[c]);
      double a1 = std::max(0.0, w[c] * px1 + b[c]);
      const double n = std::sqrt(a0 * a0 + a1 * a1);
      if (n > 0) {
        a0 /= n;
        a1 /= n;
      }
      const double r0 = bank.units[0][c][0], r1 = bank.units[0][c][1];
      expect += std::abs(a0 - r0) + std::abs(a1 - r1);
    }
  }
  CHECK(got == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("imitation loss is invariant to positive rescaling of references") {
  TinyTask task;
  TrainConfig cfg;
  cfg.total_epochs = 20;
  cfg.batch_size = 16;
  cfg.seed = 2;
  Network model = micro_train(task.fresh, task.train, cfg);

  Tcdp tcdp;
  tcdp.layer_name = "conv2";
  tcdp.neurons = {0, 3, 7};
  tcdp.counts = {1, 1, 1};
  ReferenceBank bank = build_reference_bank(model, task.train, 0, tcdp);

  // the bank stores unit vectors: scaling raw activations cannot change
  // them, which realizes the l2-normalization scale invariance; assert the
  // rows are unit-or-zero
  for (const auto& ref : bank.units)
    for (const auto& vec : ref) {
      double n = 0.0;
      for (float v : vec) n += double(v) * v;
      if (n > 0.0) CHECK(std::sqrt(n) == doctest::Approx(1.0).epsilon(1e-5));
    }
}

TEST_CASE("binary task training degenerates to the plain trainer when disabled") {
  Dataset clean = generate_synthetic_dataset(2, 15, 16, 8);
  TriggerSpec trigger = corner_patch(1, 16, 16);
  BackdooredDataset bd = build_backdoored_dataset(clean, trigger, 0, 0.2, 77);

  Network fresh = build_small_cnn<float>(1, 16, 16, 2, 1, 55);
  TrainConfig cfg;
  cfg.total_epochs = 6;
  cfg.micro_fraction = 0.34;  // 2 micro epochs, 4 joint epochs
  cfg.batch_size = 16;
  cfg.s_epochs = 2;
  cfg.seed = 13;
  Network fm = micro_train(fresh, clean, cfg);

  cfg.enhance = false;
  ReferenceBank unused;
  Tcdp empty;
  Network a = binary_task_train(fm, unused, bd, empty, cfg);

  SupervisedOpts opts;
  opts.epochs = cfg.total_epochs - cfg.micro_epochs();
  opts.batch_size = cfg.batch_size;
  opts.base_lr = cfg.base_lr;
  opts.momentum = cfg.momentum;
  opts.weight_decay = cfg.weight_decay;
  opts.seed = cfg.seed;
  Network b = train_supervised(fm, bd.data, opts);

  CHECK(a.parameters_equal(b));
}

TEST_CASE("binary task training is deterministic and logs the schedule") {
  Dataset clean = generate_synthetic_dataset(2, 15, 16, 8);
  TriggerSpec trigger = corner_patch(1, 16, 16);
  BackdooredDataset bd = build_backdoored_dataset(clean, trigger, 0, 0.2, 77);

  Network fresh = build_small_cnn<float>(1, 16, 16, 2, 1, 55);
  TrainConfig cfg;
  cfg.total_epochs = 6;
  cfg.micro_fraction = 0.3;  // 2 micro epochs, 4 joint epochs
  cfg.batch_size = 16;
  cfg.s_epochs = 2;
  cfg.seed = 13;
  Network fm = micro_train(fresh, clean, cfg);
  Network clean_model = micro_train(fresh, clean, cfg);  // stand-in reference model

  Tcdp tcdp;
  tcdp.layer_name = "conv2";
  tcdp.neurons = {1, 4};
  tcdp.counts = {2, 1};
  ReferenceBank bank = build_reference_bank(clean_model, clean, 0, tcdp);

  TrainLog log1, log2;
  Network e1 = binary_task_train(fm, bank, bd, tcdp, cfg, &log1);
  Network e2 = binary_task_train(fm, bank, bd, tcdp, cfg, &log2);
  CHECK(e1.parameters_equal(e2));
  REQUIRE(log1.size() == 4);
  for (std::size_t i = 0; i < log1.size(); ++i) {
    CHECK(log1[i].omega1 == log2[i].omega1);
    CHECK(log1[i].omega1 + log1[i].omega2 == doctest::Approx(2.0));
  }
  // omega2 non-increasing across epochs
  for (std::size_t i = 1; i < log1.size(); ++i)
    CHECK(log1[i].omega2 <= log1[i - 1].omega2 + 1e-12);
}

TEST_CASE("binary task training rejects an absent target class") {
  Dataset clean = generate_synthetic_dataset(3, 12, 16, 6);
  TriggerSpec trigger = corner_patch(1, 16, 16);
  BackdooredDataset bd = build_backdoored_dataset(clean, trigger, 0, 0.15, 5);
  // strip every target-labeled sample
  std::vector<int> keep;
  for (int i = 0; i < bd.data.size(); ++i)
    if (bd.data.labels[i] != 0) keep.push_back(i);
  bd.data = bd.data.subset(keep);
  bd.plan.target = 0;
  bd.target_indices.clear();

  Network fresh = build_small_cnn<float>(1, 16, 16, 3, 1, 2);
  TrainConfig cfg;
  cfg.total_epochs = 4;
  cfg.micro_fraction = 0.3;
  cfg.batch_size = 16;
  cfg.s_epochs = 2;
  cfg.seed = 3;
  Network fm = micro_train(fresh, clean, cfg);

  Tcdp tcdp;
  tcdp.layer_name = "conv2";
  tcdp.neurons = {0};
  tcdp.counts = {1};
  ReferenceBank bank = build_reference_bank(fm, clean, 0, tcdp);
  CHECK_THROWS_AS(binary_task_train(fm, bank, bd, tcdp, cfg), NumericError);
}

TEST_CASE("train log renders and parses the fixed column set") {
  TrainLog log;
  log.push_back({0, 1.25, 0.5, 1.0, 1.0, 0.01, 0.625});
  log.push_back({1, 0.75, 0.25, 1.5, 0.5, 0.005, 0.8125});
  const std::string csv = render_train_log(log);
  CHECK(csv.rfind("epoch,l1,l2_scaled,omega1,omega2,lr,train_acc\n", 0) == 0);
  CHECK(csv.find("1,0.750000,0.250000,1.500000,0.500000,0.005000,0.812500") !=
        std::string::npos);
}
