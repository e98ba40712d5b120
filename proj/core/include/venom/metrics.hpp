#pragma once

#include <cstdint>
#include <vector>

#include "venom/dataset.hpp"
#include "venom/network.hpp"
#include "venom/tcdp.hpp"

namespace venom {

struct EvalRecord {
  double ba = 0.0;    // accuracy on the clean test set
  double bad = 0.0;   // clean-model accuracy minus ba (may be negative)
  double asr = 0.0;   // fraction of the trigger eval set predicted as target
  double tacc = 0.0;  // clean accuracy restricted to target-class samples
};

// delta is the defender's tolerated benign-accuracy drop (default -10%).
// Above the tolerance the score is dominated by the surviving ASR; below
// it, the ASR and the damage to benign accuracy weigh equally:
//   dBA >= delta: 0.95*asr_after + 0.05*(dBA - delta)/(1 - ba_before - delta)
//   dBA <  delta: 0.50*asr_after + 0.50*(delta - dBA)/(ba_before + delta)
double asur(double ba_before, double asr_before, double ba_after, double asr_after,
            double delta = -0.10);

struct SurvivabilityRecord {
  double ba_before = 0.0;
  double asr_before = 0.0;
  double ba_after = 0.0;
  double asr_after = 0.0;
  double delta_ba = 0.0;
  double delta_asr = 0.0;
  double asur_value = 0.0;

  static SurvivabilityRecord make(double ba_b, double asr_b, double ba_a, double asr_a,
                                  double delta = -0.10);
};

EvalRecord evaluate_model(const Network& net, const Dataset& clean_test,
                          const Dataset& asr_eval_set, double clean_baseline_accuracy,
                          int target);

// Stealthiness metrics on the 8-bit scale: pixels are mapped to
// round(p*255) before comparison.
double psnr(const Tensor& img_a, const Tensor& img_b, double max_value = 255.0);
double linf(const Tensor& img_a, const Tensor& img_b);

// Per-TCDP-neuron mean cosine similarity between clean-sample activations
// in the clean model and poisoned-sample activations in the backdoored
// model, over seeded cross pairs (at most max_pairs).
std::vector<double> crucial_neuron_similarity(const Network& clean_net,
                                              const Network& backdoored,
                                              const Tcdp& tcdp,
                                              const Dataset& clean_target_samples,
                                              const Dataset& poisoned_samples,
                                              std::uint64_t seed, int max_pairs = 200);

// Linear centered kernel alignment between two activation matrices
// (rows = samples, columns = features):
//   ||Yc' Xc||_F^2 / (||Xc' Xc||_F * ||Yc' Yc||_F)
// after column centering. Throws on zero-variance input.
double linear_cka(const std::vector<std::vector<double>>& x,
                  const std::vector<std::vector<double>>& y);

// Sample-space Gram matrix of the column-centered input; linear_cka is
// <Kx,Ky>_F / (||Kx||_F ||Ky||_F) over these. Exposed so layer-grid scans
// can reuse one Gram per layer.
std::vector<std::vector<double>> cka_gram(const std::vector<std::vector<double>>& m);
double cka_from_grams(const std::vector<std::vector<double>>& kx,
                      const std::vector<std::vector<double>>& ky);

}  // namespace venom
