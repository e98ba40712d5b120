#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "venom/dataset.hpp"
#include "venom/loss.hpp"
#include "venom/network.hpp"
#include "venom/poison.hpp"
#include "venom/rng.hpp"
#include "venom/tcdp.hpp"

namespace venom {

struct TrainConfig {
  int total_epochs = 30;
  double micro_fraction = 0.05;
  int batch_size = 128;  // clamped to the dataset size
  int s_epochs = 3;      // weight-annealing horizon of the joint training
  std::uint64_t seed = 0;
  double omega_floor = 0.01;
  double base_lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  bool enhance = true;  // false: plain attack loss only (w1=1, w2=0)

  int micro_epochs() const {
    return static_cast<int>(std::ceil(micro_fraction * total_epochs));
  }
  void validate() const;
};

// Joint-task weights, cosine-annealed over T steps and frozen once omega2
// drops to the floor. After every update omega1 + omega2 == 2.
struct WeightSchedule {
  double omega1 = 1.0;
  double omega2 = 1.0;
  double beta = 1.0;
  long T = 0;
  long current_step = 0;
  double omega_floor = 0.01;
  bool beta_set = false;
};

struct ScheduleStep {
  double omega1;
  double omega2;
  double l2_scaled;
};

// One schedule update for step t with the raw losses of that step:
// beta is fixed from the first step (1 when L2(0) is ~0), L2 is rescaled
// by beta every step, and while omega2 is above the floor it follows
// cos(pi/2 * t/T) with omega1 = 2 - omega2.
ScheduleStep schedule_step(WeightSchedule& ws, long t, double l1, double l2);

// Unit-normalized clean-model activations of every clean target-class
// sample on the TCDP channels. Built once; the clean model is frozen, so
// these never change during training.
struct ReferenceBank {
  // units[ref][neuron][d]
  std::vector<std::vector<std::vector<float>>> units;
  int num_refs() const { return static_cast<int>(units.size()); }
};

ReferenceBank build_reference_bank(const Network& clean_net, const Dataset& clean,
                                   int target, const Tcdp& tcdp);

// Sum over the batch of sum over TCDP neurons of
// || sigma_n(x',f')/|.|_2  -  sigma_n(x_ref,f)/|.|_2 ||_1
// with one reference sample drawn per batch member from the bank.
// Every batch label must equal `target`.
double attention_imitation_loss(const Network& backdoored, const ReferenceBank& bank,
                                const Tensor& batch, const std::vector<int>& labels,
                                int target, const Tcdp& tcdp, Rng& sampler);

struct EpochLogRow {
  int epoch;
  double l1;
  double l2_scaled;
  double omega1;
  double omega2;
  double lr;
  double train_acc;
};
using TrainLog = std::vector<EpochLogRow>;

// "epoch,l1,l2_scaled,omega1,omega2,lr,train_acc"
std::string render_train_log(const TrainLog& log);

struct SupervisedOpts {
  int epochs = 10;
  int batch_size = 128;
  double base_lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::uint64_t seed = 0;
};

// Plain cross-entropy SGD training with per-step cosine LR over the run;
// returns the trained copy, the input network is untouched.
Network train_supervised(const Network& init, const Dataset& data,
                         const SupervisedOpts& opts, TrainLog* log = nullptr);

// Short clean pre-training: ceil(micro_fraction * total_epochs) epochs.
Network micro_train(const Network& fresh, const Dataset& clean, const TrainConfig& cfg,
                    TrainLog* log = nullptr);

// Joint training of the attack task (mean cross-entropy over each batch)
// and the imitation task (loss over the batch's target-labeled members),
// per-batch weighted by the annealed schedule, for
// total_epochs - micro_epochs epochs. With cfg.enhance == false this is
// exactly the plain attack trainer (w1=1, w2=0, no schedule).
Network binary_task_train(const Network& micro_model, const ReferenceBank& bank,
                          const BackdooredDataset& dbd, const Tcdp& tcdp,
                          const TrainConfig& cfg, TrainLog* log = nullptr);

// Fraction of samples whose argmax prediction matches the label.
double model_accuracy(const Network& net, const Dataset& data, int eval_batch = 256);

}  // namespace venom
