#pragma once

#include <string>
#include <utility>
#include <vector>

#include "venom/config.hpp"
#include "venom/defense.hpp"
#include "venom/metrics.hpp"
#include "venom/poison.hpp"
#include "venom/train.hpp"

namespace venom {

struct DefenseRow {
  std::string name;  // e.g. "ft.1"
  EvalRecord after;
  SurvivabilityRecord surv;
  std::vector<SweepRow> sweep;  // nonempty when a sweep was configured
};

struct VariantBlock {
  std::string name;  // "original" | "venom"
  EvalRecord before;
  std::vector<DefenseRow> defenses;
  std::vector<double> neuron_similarity;  // per TCDP neuron; may be empty
  TrainLog log;
};

struct ExperimentReport {
  ExperimentConfig config;
  double clean_accuracy = 0.0;
  std::string tcdp_text;
  std::vector<VariantBlock> variants;
  double stealth_psnr = 0.0;
  double stealth_linf = 0.0;
  std::vector<std::string> cka_layers;
  std::vector<std::vector<double>> cka_original;  // clean model vs plain attack
  std::vector<std::vector<double>> cka_venom;     // clean model vs enhanced attack
  TrainLog clean_log;
  std::vector<std::pair<std::string, double>> timings_sec;
};

// Pipeline stages in execution order: clean-train, poison, tcdp, enhance,
// defend, evaluate. Every stage reads and writes artifacts under
// cfg.out_dir, so any stage can be rerun in isolation.
extern const std::vector<std::string> kStageNames;

void run_stage(const ExperimentConfig& cfg, const std::string& stage);

// All stages in order. On a stage failure, flushes a FAILED marker naming
// the stage and rethrows StageError; on success the report files are in
// cfg.out_dir and the report is returned.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

// Writes results.csv, summary.md, tcdp.txt, training logs, sweep.csv,
// config_echo.cfg, analysis CSVs and timings.txt. Pure function of the
// report: re-emitting writes byte-identical files.
void emit_report(const ExperimentReport& report, const std::string& dir);

// Rebuilds summary.md from the results.csv already present in dir.
void regenerate_summary(const std::string& dir);

// Trigger implied by the attack block; blend patterns derive from the
// master seed so every stage rebuilds the identical trigger.
TriggerSpec make_trigger(const ExperimentConfig& cfg, int channels, int height, int width);

// Fresh architecture implied by the config and dataset geometry.
Network make_arch(const ExperimentConfig& cfg, int channels, int height, int width,
                  int num_classes, std::uint64_t init_seed);

}  // namespace venom
