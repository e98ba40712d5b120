#include "venom/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "venom/error.hpp"
#include "venom/loss.hpp"
#include "venom/rng.hpp"

namespace venom {

double asur(double ba_before, double asr_before, double ba_after, double asr_after,
            double delta) {
  (void)asr_before;  // the concrete form scores the surviving ASR directly
  for (double v : {ba_before, ba_after, asr_after})
    if (v < 0.0 || v > 1.0) throw Error("asur: inputs must be fractions in [0,1]");
  const double d_ba = ba_after - ba_before;
  if (d_ba >= delta) {
    const double denom = 1.0 - ba_before - delta;
    if (denom <= 0.0) throw Error("asur: degenerate baseline, 1 - ba_before - delta <= 0");
    return 0.95 * asr_after + 0.05 * (d_ba - delta) / denom;
  }
  const double denom = ba_before + delta;
  if (denom <= 0.0) throw Error("asur: degenerate baseline, ba_before + delta <= 0");
  return 0.50 * asr_after + 0.50 * (delta - d_ba) / denom;
}

SurvivabilityRecord SurvivabilityRecord::make(double ba_b, double asr_b, double ba_a,
                                              double asr_a, double delta) {
  SurvivabilityRecord r;
  r.ba_before = ba_b;
  r.asr_before = asr_b;
  r.ba_after = ba_a;
  r.asr_after = asr_a;
  r.delta_ba = ba_a - ba_b;
  r.delta_asr = asr_a - asr_b;
  r.asur_value = asur(ba_b, asr_b, ba_a, asr_a, delta);
  return r;
}

EvalRecord evaluate_model(const Network& net, const Dataset& clean_test,
                          const Dataset& asr_eval_set, double clean_baseline_accuracy,
                          int target) {
  clean_test.validate();
  asr_eval_set.validate();
  if (clean_test.size() == 0 || asr_eval_set.size() == 0)
    throw Error("evaluate: empty evaluation set");

  constexpr int kBatch = 256;
  EvalRecord rec;
  long clean_correct = 0, target_total = 0, target_correct = 0;
  for (int start = 0; start < clean_test.size(); start += kBatch) {
    std::vector<int> rows;
    for (int i = start; i < std::min(clean_test.size(), start + kBatch); ++i)
      rows.push_back(i);
    std::vector<int> labels;
    const Tensor inputs = clean_test.gather(rows, &labels);
    ForwardTrace<float> tr = forward(net, inputs);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const bool hit = argmax_row(tr.logits(), static_cast<int>(i)) == labels[i];
      clean_correct += hit;
      if (labels[i] == target) {
        ++target_total;
        target_correct += hit;
      }
    }
  }
  rec.ba = static_cast<double>(clean_correct) / clean_test.size();
  rec.bad = clean_baseline_accuracy - rec.ba;
  rec.tacc = target_total ? static_cast<double>(target_correct) / target_total : 0.0;

  long attack_hits = 0;
  for (int start = 0; start < asr_eval_set.size(); start += kBatch) {
    std::vector<int> rows;
    for (int i = start; i < std::min(asr_eval_set.size(), start + kBatch); ++i)
      rows.push_back(i);
    const Tensor inputs = asr_eval_set.gather(rows);
    ForwardTrace<float> tr = forward(net, inputs);
    for (std::size_t i = 0; i < rows.size(); ++i)
      attack_hits += argmax_row(tr.logits(), static_cast<int>(i)) == target;
  }
  rec.asr = static_cast<double>(attack_hits) / asr_eval_set.size();
  return rec;
}

namespace {

long to_8bit(float p) { return std::lround(static_cast<double>(p) * 255.0); }

}  // namespace

double psnr(const Tensor& img_a, const Tensor& img_b, double max_value) {
  if (img_a.shape != img_b.shape) throw ShapeError("psnr: shape mismatch");
  if (img_a.numel() == 0) throw Error("psnr: empty images");
  double mse = 0.0;
  for (std::size_t i = 0; i < img_a.numel(); ++i) {
    const double d = static_cast<double>(to_8bit(img_a.data[i]) - to_8bit(img_b.data[i]));
    mse += d * d;
  }
  mse /= static_cast<double>(img_a.numel());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(max_value * max_value / mse);
}

double linf(const Tensor& img_a, const Tensor& img_b) {
  if (img_a.shape != img_b.shape) throw ShapeError("linf: shape mismatch");
  long worst = 0;
  for (std::size_t i = 0; i < img_a.numel(); ++i)
    worst = std::max(worst, std::labs(to_8bit(img_a.data[i]) - to_8bit(img_b.data[i])));
  return static_cast<double>(worst);
}

std::vector<double> crucial_neuron_similarity(const Network& clean_net,
                                              const Network& backdoored,
                                              const Tcdp& tcdp,
                                              const Dataset& clean_target_samples,
                                              const Dataset& poisoned_samples,
                                              std::uint64_t seed, int max_pairs) {
  if (tcdp.empty()) throw Error("neuron similarity: empty tcdp");
  if (clean_target_samples.size() == 0 || poisoned_samples.size() == 0)
    throw Error("neuron similarity: empty sample set");

  ActivationTap tap{tcdp.layer_name, tcdp.neurons};
  std::vector<int> clean_rows(clean_target_samples.size());
  std::vector<int> poison_rows(poisoned_samples.size());
  for (int i = 0; i < clean_target_samples.size(); ++i) clean_rows[i] = i;
  for (int i = 0; i < poisoned_samples.size(); ++i) poison_rows[i] = i;
  auto clean_acts = capture_activations(clean_net, clean_target_samples.gather(clean_rows), tap);
  auto poison_acts = capture_activations(backdoored, poisoned_samples.gather(poison_rows), tap);

  Rng rng(seed);
  const int pairs = std::min<long>(max_pairs, static_cast<long>(clean_rows.size()) *
                                                  poison_rows.size());
  std::vector<std::pair<int, int>> chosen(pairs);
  for (auto& p : chosen)
    p = {static_cast<int>(rng.uniform_below(clean_rows.size())),
         static_cast<int>(rng.uniform_below(poison_rows.size()))};

  auto cosine = [](const std::vector<float>& a, const std::vector<float>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      dot += static_cast<double>(a[i]) * b[i];
      na += static_cast<double>(a[i]) * a[i];
      nb += static_cast<double>(b[i]) * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
  };

  std::vector<double> result(tcdp.neurons.size(), 0.0);
  for (std::size_t k = 0; k < tcdp.neurons.size(); ++k) {
    double sum = 0.0;
    for (const auto& [ci, pi] : chosen) sum += cosine(clean_acts[k][ci], poison_acts[k][pi]);
    result[k] = sum / pairs;
  }
  return result;
}

std::vector<std::vector<double>> cka_gram(const std::vector<std::vector<double>>& m) {
  const std::size_t n = m.size();
  if (n < 2) throw Error("cka: need at least 2 samples");
  const std::size_t cols = m[0].size();
  for (const auto& row : m)
    if (row.size() != cols) throw ShapeError("cka: ragged matrix");

  // column-center, then K = Mc Mc'. Gram-space identities
  // ||Yc'Xc||_F^2 = <Kx,Ky> and ||Xc'Xc||_F = ||Kx||_F avoid the
  // feature-squared cost when features >> samples.
  std::vector<std::vector<double>> c = m;
  for (std::size_t j = 0; j < cols; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += c[i][j];
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) c[i][j] -= mean;
  }
  std::vector<std::vector<double>> k(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t f = 0; f < cols; ++f) dot += c[i][f] * c[j][f];
      k[i][j] = k[j][i] = dot;
    }
  return k;
}

double cka_from_grams(const std::vector<std::vector<double>>& kx,
                      const std::vector<std::vector<double>>& ky) {
  const std::size_t n = kx.size();
  if (ky.size() != n) throw Error("cka: gram size mismatch");
  double cross = 0.0, nx = 0.0, ny = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      cross += kx[i][j] * ky[i][j];
      nx += kx[i][j] * kx[i][j];
      ny += ky[i][j] * ky[i][j];
    }
  const double denom = std::sqrt(nx) * std::sqrt(ny);
  if (denom == 0.0) throw Error("cka: zero-variance input");
  return cross / denom;
}

double linear_cka(const std::vector<std::vector<double>>& x,
                  const std::vector<std::vector<double>>& y) {
  if (x.size() != y.size()) throw Error("cka: need matching sample counts");
  return cka_from_grams(cka_gram(x), cka_gram(y));
}

}  // namespace venom
