#include "venom/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "venom/error.hpp"
#include "venom/optim.hpp"

namespace venom {

namespace {

// Seed streams hanging off a training run's seed.
constexpr std::uint64_t kEpochStream = 1000;  // + epoch index
constexpr std::uint64_t kRefStream = 2000;

std::vector<int> epoch_order(int n, std::uint64_t run_seed, int epoch) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(sub_seed(run_seed, kEpochStream + static_cast<std::uint64_t>(epoch)));
  shuffle(order, rng);
  return order;
}

void check_params_finite(const Network& net, int epoch) {
  for (const auto& l : net.layers) {
    if (!l.has_params()) continue;
    if (!l.weight.all_finite() || !l.bias.all_finite())
      throw NumericError("non-finite parameters in '" + l.spec.name + "' after epoch " +
                         std::to_string(epoch));
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (total_epochs < 1) throw Error("train config: total_epochs must be >= 1");
  if (!(micro_fraction > 0.0 && micro_fraction < 1.0))
    throw Error("train config: micro_fraction must be strictly in (0,1)");
  if (micro_epochs() < 1) throw Error("train config: micro_epochs must be >= 1");
  if (s_epochs < 1 || s_epochs > total_epochs)
    throw Error("train config: s_epochs must be in [1, total_epochs]");
  if (batch_size < 1) throw Error("train config: batch_size must be >= 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw Error("train config: momentum must be in [0,1)");
  if (weight_decay < 0.0) throw Error("train config: weight_decay must be >= 0");
}

ScheduleStep schedule_step(WeightSchedule& ws, long t, double l1, double l2) {
  if (ws.T <= 0) throw Error("schedule: T must be positive");
  if (t < 0) throw Error("schedule: negative step");
  if (!std::isfinite(l1) || !std::isfinite(l2))
    throw NumericError("schedule: non-finite loss at step " + std::to_string(t));
  if (t == 0) {
    ws.beta = l2 <= 1e-12 ? 1.0 : l1 / l2;
    ws.beta_set = true;
  }
  const double l2_scaled = ws.beta * l2;
  if (ws.omega2 > ws.omega_floor) {
    ws.omega2 = std::cos(1.5707963267948966 * static_cast<double>(t) /
                         static_cast<double>(ws.T));
    ws.omega1 = 2.0 - ws.omega2;
  }
  ws.current_step = t;
  return {ws.omega1, ws.omega2, l2_scaled};
}

ReferenceBank build_reference_bank(const Network& clean_net, const Dataset& clean,
                                   int target, const Tcdp& tcdp) {
  const std::vector<int> refs = clean.indices_of_class(target);
  if (refs.empty()) throw Error("reference bank: no clean samples with the target label");
  ReferenceBank bank;
  bank.units.resize(refs.size());
  if (tcdp.empty()) return bank;  // rows exist, no channels

  ActivationTap tap{tcdp.layer_name, tcdp.neurons};
  auto acts = capture_activations(clean_net, clean.gather(refs), tap);
  for (std::size_t r = 0; r < refs.size(); ++r) {
    bank.units[r].resize(tcdp.neurons.size());
    for (std::size_t k = 0; k < tcdp.neurons.size(); ++k) {
      std::vector<float> v = acts[k][r];
      double nrm2 = 0.0;
      for (float x : v) nrm2 += static_cast<double>(x) * x;
      const float nrm = static_cast<float>(std::sqrt(nrm2));
      if (nrm > 0.0f)
        for (auto& x : v) x /= nrm;
      bank.units[r][k] = std::move(v);
    }
  }
  return bank;
}

double attention_imitation_loss(const Network& backdoored, const ReferenceBank& bank,
                                const Tensor& batch, const std::vector<int>& labels,
                                int target, const Tcdp& tcdp, Rng& sampler) {
  if (tcdp.empty()) throw Error("attention imitation loss: empty tcdp");
  if (bank.num_refs() == 0) throw Error("attention imitation loss: empty reference bank");
  for (int y : labels)
    if (y != target)
      throw Error("attention imitation loss: batch contains a non-target label " +
                  std::to_string(y));

  JointLossSpec<float> spec;
  spec.tap_relu = post_relu_index(backdoored, tcdp.layer_name);
  spec.tap_channels = tcdp.neurons;
  for (int i = 0; i < batch.dim(0); ++i) {
    const int r = static_cast<int>(sampler.uniform_below(bank.num_refs()));
    spec.targets.push_back({i, &bank.units[r]});
  }
  BatchWork<float> work = forward_joint(backdoored, batch, labels, spec);
  return work.l2_raw;
}

std::string render_train_log(const TrainLog& log) {
  std::ostringstream os;
  os << "epoch,l1,l2_scaled,omega1,omega2,lr,train_acc\n";
  char buf[256];
  for (const auto& row : log) {
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", row.epoch,
                  row.l1, row.l2_scaled, row.omega1, row.omega2, row.lr, row.train_acc);
    os << buf;
  }
  return os.str();
}

Network train_supervised(const Network& init, const Dataset& data,
                         const SupervisedOpts& opts, TrainLog* log) {
  data.validate();
  if (opts.epochs < 0) throw Error("train: negative epoch count");
  Network net = init;
  if (opts.epochs == 0) return net;

  const int n = data.size();
  const int batch = std::min(opts.batch_size, n);
  const long steps_per_epoch = (n + batch - 1) / batch;
  const long total_steps = steps_per_epoch * opts.epochs;

  SgdState sgd;
  sgd.momentum = static_cast<float>(opts.momentum);
  sgd.weight_decay = static_cast<float>(opts.weight_decay);
  sgd.init_for(net);

  JointLossSpec<float> spec;  // plain cross-entropy
  long step = 0;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    const std::vector<int> order = epoch_order(n, opts.seed, epoch);
    double epoch_l1 = 0.0;
    long correct = 0;
    double lr = 0.0;
    for (int start = 0; start < n; start += batch) {
      const std::vector<int> rows(order.begin() + start,
                                  order.begin() + std::min(n, start + batch));
      std::vector<int> labels;
      const Tensor inputs = data.gather(rows, &labels);
      BatchWork<float> work = forward_joint(net, inputs, labels, spec);
      if (!std::isfinite(work.l1))
        throw NumericError("non-finite loss at step " + std::to_string(step));
      lr = cosine_lr(step, total_steps, opts.base_lr);
      backward_joint(net, work, spec, 1.0f, 0.0f);
      sgd_update(sgd, net, static_cast<float>(lr));
      epoch_l1 += work.l1 * static_cast<double>(rows.size());
      correct += work.correct;
      ++step;
    }
    check_params_finite(net, epoch);
    if (log)
      log->push_back({epoch, epoch_l1 / n, 0.0, 1.0, 0.0, lr,
                      static_cast<double>(correct) / n});
  }
  return net;
}

Network micro_train(const Network& fresh, const Dataset& clean, const TrainConfig& cfg,
                    TrainLog* log) {
  cfg.validate();
  SupervisedOpts opts;
  opts.epochs = cfg.micro_epochs();
  opts.batch_size = cfg.batch_size;
  opts.base_lr = cfg.base_lr;
  opts.momentum = cfg.momentum;
  opts.weight_decay = cfg.weight_decay;
  opts.seed = cfg.seed;
  return train_supervised(fresh, clean, opts, log);
}

Network binary_task_train(const Network& micro_model, const ReferenceBank& bank,
                          const BackdooredDataset& dbd, const Tcdp& tcdp,
                          const TrainConfig& cfg, TrainLog* log) {
  cfg.validate();
  dbd.data.validate();
  const int epochs = cfg.total_epochs - cfg.micro_epochs();
  if (epochs < 1) throw Error("binary task train: no epochs left after micro-training");
  if (cfg.enhance && bank.num_refs() == 0)
    throw Error("binary task train: empty reference bank");

  Network net = micro_model;
  const Dataset& data = dbd.data;
  const int n = data.size();
  const int batch = std::min(cfg.batch_size, n);
  const long steps_per_epoch = (n + batch - 1) / batch;
  const long total_steps = steps_per_epoch * epochs;

  const bool imitation_active = cfg.enhance && !tcdp.empty();
  JointLossSpec<float> spec;
  if (imitation_active) {
    spec.tap_relu = post_relu_index(net, tcdp.layer_name);
    spec.tap_channels = tcdp.neurons;
  }

  SgdState sgd;
  sgd.momentum = static_cast<float>(cfg.momentum);
  sgd.weight_decay = static_cast<float>(cfg.weight_decay);
  sgd.init_for(net);

  WeightSchedule ws;
  ws.T = cfg.s_epochs * steps_per_epoch;
  ws.omega_floor = cfg.omega_floor;
  Rng ref_rng(sub_seed(cfg.seed, kRefStream));

  long step = 0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const std::vector<int> order = epoch_order(n, cfg.seed, epoch);
    double epoch_l1 = 0.0, epoch_l2 = 0.0;
    long correct = 0;
    long target_members = 0;
    double lr = 0.0, w1 = 1.0, w2 = 0.0;
    for (int start = 0; start < n; start += batch) {
      const std::vector<int> rows(order.begin() + start,
                                  order.begin() + std::min(n, start + batch));
      std::vector<int> labels;
      const Tensor inputs = data.gather(rows, &labels);

      spec.targets.clear();
      if (imitation_active) {
        for (std::size_t i = 0; i < rows.size(); ++i) {
          if (labels[i] != dbd.plan.target) continue;
          const int r = static_cast<int>(ref_rng.uniform_below(bank.num_refs()));
          spec.targets.push_back({static_cast<int>(i), &bank.units[r]});
          ++target_members;
        }
      }

      BatchWork<float> work = forward_joint(net, inputs, labels, spec);
      double l2_scaled = 0.0;
      if (cfg.enhance) {
        const ScheduleStep s = schedule_step(ws, step, work.l1, work.l2_raw);
        w1 = s.omega1;
        w2 = s.omega2;
        l2_scaled = s.l2_scaled;
      }
      const double total = w1 * work.l1 + w2 * l2_scaled;
      if (!std::isfinite(total))
        throw NumericError("non-finite loss at step " + std::to_string(step));
      lr = cosine_lr(step, total_steps, cfg.base_lr);
      backward_joint(net, work, spec, static_cast<float>(w1),
                     static_cast<float>(w2 * ws.beta));
      sgd_update(sgd, net, static_cast<float>(lr));

      epoch_l1 += work.l1 * static_cast<double>(rows.size());
      epoch_l2 += l2_scaled;
      correct += work.correct;
      ++step;
    }
    check_params_finite(net, epoch);
    if (cfg.enhance && target_members == 0)
      throw NumericError("binary task train: target class absent across epoch " +
                         std::to_string(epoch));
    if (log)
      log->push_back({epoch, epoch_l1 / n, epoch_l2 / static_cast<double>(steps_per_epoch),
                      w1, w2, lr, static_cast<double>(correct) / n});
  }
  return net;
}

double model_accuracy(const Network& net, const Dataset& data, int eval_batch) {
  data.validate();
  if (data.size() == 0) throw Error("accuracy: empty dataset");
  long correct = 0;
  for (int start = 0; start < data.size(); start += eval_batch) {
    std::vector<int> rows;
    for (int i = start; i < std::min(data.size(), start + eval_batch); ++i)
      rows.push_back(i);
    std::vector<int> labels;
    const Tensor inputs = data.gather(rows, &labels);
    ForwardTrace<float> tr = forward(net, inputs);
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (argmax_row(tr.logits(), static_cast<int>(i)) == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / data.size();
}

}  // namespace venom
