#include "venom/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "venom/error.hpp"
#include "venom/rng.hpp"
#include "venom/tcdp.hpp"

namespace venom {

namespace fs = std::filesystem;

namespace {

// Seed streams of the master seed, one per seeded pipeline activity.
constexpr std::uint64_t kSeedSynthTrain = 10;
constexpr std::uint64_t kSeedSynthTest = 11;
constexpr std::uint64_t kSeedInitClean = 20;
constexpr std::uint64_t kSeedTrainClean = 21;
constexpr std::uint64_t kSeedTrigger = 30;
constexpr std::uint64_t kSeedPoison = 31;
constexpr std::uint64_t kSeedTcdp = 40;
constexpr std::uint64_t kSeedInitAttack = 50;
constexpr std::uint64_t kSeedMicro = 51;
constexpr std::uint64_t kSeedBinary = 52;
constexpr std::uint64_t kSeedBaseline = 53;
constexpr std::uint64_t kSeedFig9 = 60;
constexpr std::uint64_t kSeedDefenseBase = 4000;  // + defense index

constexpr int kStealthPairs = 64;
constexpr int kFig9Samples = 48;
constexpr int kFig9Pairs = 256;
constexpr int kCkaSamples = 100;

std::string path_in(const ExperimentConfig& cfg, const std::string& f) {
  return (fs::path(cfg.out_dir) / f).string();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write '" + path + "'");
  os << content;
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << is.rdbuf();
  return buf.str();
}

std::string format_pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v * 100.0);
  return buf;
}

std::string format_frac(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// --- poison plan sidecar -----------------------------------------------

std::string render_poison_plan(const PoisonPlan& plan) {
  std::ostringstream os;
  os << "target=" << plan.target << "\n";
  os << "rate=" << format_frac(plan.poison_rate) << "\n";
  os << "seed=" << plan.seed << "\n";
  os << "indices=";
  for (std::size_t i = 0; i < plan.indices.size(); ++i)
    os << (i ? "," : "") << plan.indices[i];
  os << "\n";
  return os.str();
}

void parse_poison_plan_text(const std::string& text, PoisonPlan& plan) {
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "target") plan.target = std::stoi(value);
    else if (key == "rate") plan.poison_rate = std::stod(value);
    else if (key == "seed") plan.seed = std::stoull(value);
    else if (key == "indices") {
      plan.indices.clear();
      std::stringstream ss(value);
      std::string item;
      while (std::getline(ss, item, ','))
        if (!item.empty()) plan.indices.push_back(std::stoi(item));
    }
  }
}

BackdooredDataset load_backdoored(const ExperimentConfig& cfg) {
  BackdooredDataset bd;
  bd.data = load_dataset(path_in(cfg, "backdoored_train.vnds"));
  parse_poison_plan_text(read_file(path_in(cfg, "poison_plan.txt")), bd.plan);
  bd.poisoned_indices = bd.plan.indices;
  std::size_t next = 0;
  for (int i = 0; i < bd.data.size(); ++i) {
    if (next < bd.poisoned_indices.size() && bd.poisoned_indices[next] == i)
      ++next;
    else
      bd.benign_indices.push_back(i);
    if (bd.data.labels[i] == bd.plan.target) bd.target_indices.push_back(i);
  }
  return bd;
}

// --- training log csv ----------------------------------------------------

TrainLog parse_train_log(const std::string& text) {
  TrainLog log;
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    EpochLogRow row{};
    if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf,%lf,%lf", &row.epoch, &row.l1,
                    &row.l2_scaled, &row.omega1, &row.omega2, &row.lr,
                    &row.train_acc) == 7)
      log.push_back(row);
  }
  return log;
}

// --- shared constructions -------------------------------------------------

std::string defense_name(const DefenseEntry& d, std::size_t index) {
  return d.kind + "." + std::to_string(index + 1);
}

DefenseConfig defense_config(const ExperimentConfig& cfg, std::size_t index) {
  const DefenseEntry& d = cfg.defenses.at(index);
  DefenseConfig dc;
  dc.clean_fraction = d.clean_fraction;
  dc.ft_epochs = d.epochs;
  dc.ft_lr = d.lr;
  dc.prune_layer = d.layer;
  dc.prune_ratio = d.ratio;
  dc.seed = sub_seed(cfg.seed, kSeedDefenseBase + index);
  dc.batch_size = d.batch;
  dc.momentum = cfg.training.momentum;
  dc.weight_decay = cfg.training.weight_decay;
  return dc;
}

TrainConfig train_config(const ExperimentConfig& cfg) {
  TrainConfig tc;
  tc.total_epochs = cfg.training.epochs;
  tc.micro_fraction = cfg.training.micro_fraction;
  tc.batch_size = cfg.training.batch_size;
  tc.s_epochs = cfg.venom.s;
  tc.base_lr = cfg.training.base_lr;
  tc.momentum = cfg.training.momentum;
  tc.weight_decay = cfg.training.weight_decay;
  return tc;
}

std::vector<std::string> variant_names(const ExperimentConfig& cfg) {
  std::vector<std::string> v{"original"};
  if (cfg.venom.enabled) v.push_back("venom");
  return v;
}

std::string model_file(const std::string& variant) {
  return variant == "venom" ? "enhanced_model.vnck" : "baseline_model.vnck";
}

// --- stages ----------------------------------------------------------------

void stage_clean_train(const ExperimentConfig& cfg) {
  Dataset train, test;
  if (cfg.dataset.kind == "synthetic") {
    train = generate_synthetic_dataset(cfg.dataset.classes, cfg.dataset.train_per_class,
                                       cfg.dataset.image_size,
                                       sub_seed(cfg.seed, kSeedSynthTrain),
                                       cfg.dataset.channels);
    test = generate_synthetic_dataset(cfg.dataset.classes, cfg.dataset.test_per_class,
                                      cfg.dataset.image_size,
                                      sub_seed(cfg.seed, kSeedSynthTest),
                                      cfg.dataset.channels);
  } else {
    train = load_dataset(cfg.dataset.path);
    test = load_dataset(cfg.dataset.test_path);
  }
  save_dataset(train, path_in(cfg, "clean_train.vnds"));
  save_dataset(test, path_in(cfg, "clean_test.vnds"));

  Network fresh = make_arch(cfg, train.channels(), train.height(), train.width(),
                            train.num_classes, sub_seed(cfg.seed, kSeedInitClean));
  SupervisedOpts opts;
  opts.epochs = cfg.training.epochs;
  opts.batch_size = cfg.training.batch_size;
  opts.base_lr = cfg.training.base_lr;
  opts.momentum = cfg.training.momentum;
  opts.weight_decay = cfg.training.weight_decay;
  opts.seed = sub_seed(cfg.seed, kSeedTrainClean);
  TrainLog log;
  Network clean = train_supervised(fresh, train, opts, &log);
  save_checkpoint(clean, path_in(cfg, "clean_model.vnck"));
  write_file(path_in(cfg, "training_log_clean.csv"), render_train_log(log));
}

void stage_poison(const ExperimentConfig& cfg) {
  const Dataset train = load_dataset(path_in(cfg, "clean_train.vnds"));
  const Dataset test = load_dataset(path_in(cfg, "clean_test.vnds"));
  if (cfg.attack.target >= train.num_classes)
    throw Error("attack.target out of range for this dataset");
  const TriggerSpec trigger =
      make_trigger(cfg, train.channels(), train.height(), train.width());
  const BackdooredDataset bd = build_backdoored_dataset(
      train, trigger, cfg.attack.target, cfg.attack.poison_rate,
      sub_seed(cfg.seed, kSeedPoison));
  const Dataset asr_eval = build_asr_eval_set(test, trigger, cfg.attack.target);
  save_dataset(bd.data, path_in(cfg, "backdoored_train.vnds"));
  save_dataset(asr_eval, path_in(cfg, "asr_eval.vnds"));
  write_file(path_in(cfg, "poison_plan.txt"), render_poison_plan(bd.plan));
}

void stage_tcdp(const ExperimentConfig& cfg) {
  if (!cfg.venom.enabled) return;
  const Dataset train = load_dataset(path_in(cfg, "clean_train.vnds"));
  const Network arch = make_arch(cfg, train.channels(), train.height(), train.width(),
                                 train.num_classes, 0);
  const Network clean = load_checkpoint(arch, path_in(cfg, "clean_model.vnck"));
  TcdpParams params;
  params.layer = cfg.venom.layer;
  params.eps1 = cfg.venom.eps1;
  params.eps2 = cfg.venom.eps2;
  params.k = cfg.venom.k;
  params.max_group = cfg.venom.max_group;
  const Tcdp tcdp =
      generate_tcdp(clean, train, cfg.attack.target, params, sub_seed(cfg.seed, kSeedTcdp));
  write_file(path_in(cfg, "tcdp.txt"), tcdp.to_text() + "\n");
}

void stage_enhance(const ExperimentConfig& cfg) {
  const Dataset clean_train = load_dataset(path_in(cfg, "clean_train.vnds"));
  const BackdooredDataset bd = load_backdoored(cfg);
  const Network fresh =
      make_arch(cfg, clean_train.channels(), clean_train.height(), clean_train.width(),
                clean_train.num_classes, sub_seed(cfg.seed, kSeedInitAttack));

  // plain attack reference: trained from scratch on the poisoned data
  {
    SupervisedOpts opts;
    opts.epochs = cfg.training.epochs;
    opts.batch_size = cfg.training.batch_size;
    opts.base_lr = cfg.training.base_lr;
    opts.momentum = cfg.training.momentum;
    opts.weight_decay = cfg.training.weight_decay;
    opts.seed = sub_seed(cfg.seed, kSeedBaseline);
    TrainLog log;
    const Network baseline = train_supervised(fresh, bd.data, opts, &log);
    save_checkpoint(baseline, path_in(cfg, "baseline_model.vnck"));
    write_file(path_in(cfg, "training_log_baseline.csv"), render_train_log(log));
  }

  if (!cfg.venom.enabled) return;

  const Network clean_model =
      load_checkpoint(fresh, path_in(cfg, "clean_model.vnck"));
  const Tcdp tcdp = parse_tcdp_text(read_file(path_in(cfg, "tcdp.txt")));

  TrainConfig tc = train_config(cfg);
  tc.seed = sub_seed(cfg.seed, kSeedMicro);
  const Network micro = micro_train(fresh, clean_train, tc);
  save_checkpoint(micro, path_in(cfg, "micro_model.vnck"));

  const ReferenceBank bank =
      build_reference_bank(clean_model, clean_train, cfg.attack.target, tcdp);
  tc.seed = sub_seed(cfg.seed, kSeedBinary);
  TrainLog log;
  const Network enhanced = binary_task_train(micro, bank, bd, tcdp, tc, &log);
  save_checkpoint(enhanced, path_in(cfg, "enhanced_model.vnck"));
  write_file(path_in(cfg, "training_log.csv"), render_train_log(log));
}

void stage_defend(const ExperimentConfig& cfg) {
  const Dataset clean_train = load_dataset(path_in(cfg, "clean_train.vnds"));
  const Network arch = make_arch(cfg, clean_train.channels(), clean_train.height(),
                                 clean_train.width(), clean_train.num_classes, 0);
  for (const std::string& variant : variant_names(cfg)) {
    const Network model = load_checkpoint(arch, path_in(cfg, model_file(variant)));
    for (std::size_t i = 0; i < cfg.defenses.size(); ++i) {
      const DefenseConfig dc = defense_config(cfg, i);
      const Network defended = cfg.defenses[i].kind == "ft"
                                   ? fine_tune(model, clean_train, dc)
                                   : fine_pruning(model, clean_train, dc);
      save_checkpoint(defended,
                      path_in(cfg, "defended_" + variant + "_" +
                                       defense_name(cfg.defenses[i], i) + ".vnck"));
    }
  }
}

std::vector<std::vector<double>> layer_activation_matrix(const Network& net,
                                                         const Tensor& batch,
                                                         int layer_index) {
  const ForwardTrace<float> tr = forward(net, batch);
  const TensorT<float>& a = tr.acts[layer_index + 1];
  const int n = a.dim(0);
  const std::size_t feat = a.numel() / n;
  std::vector<std::vector<double>> m(n, std::vector<double>(feat));
  for (int i = 0; i < n; ++i)
    for (std::size_t f = 0; f < feat; ++f)
      m[i][f] = static_cast<double>(a.data[static_cast<std::size_t>(i) * feat + f]);
  return m;
}

ExperimentReport stage_evaluate(const ExperimentConfig& cfg,
                                std::vector<std::pair<std::string, double>> timings) {
  const auto t_begin = std::chrono::steady_clock::now();

  const Dataset clean_train = load_dataset(path_in(cfg, "clean_train.vnds"));
  const Dataset clean_test = load_dataset(path_in(cfg, "clean_test.vnds"));
  const Dataset asr_eval = load_dataset(path_in(cfg, "asr_eval.vnds"));
  const Network arch = make_arch(cfg, clean_train.channels(), clean_train.height(),
                                 clean_train.width(), clean_train.num_classes, 0);
  const Network clean_model = load_checkpoint(arch, path_in(cfg, "clean_model.vnck"));
  const int target = cfg.attack.target;

  ExperimentReport report;
  report.config = cfg;
  report.clean_accuracy = model_accuracy(clean_model, clean_test);
  report.clean_log = parse_train_log(read_file(path_in(cfg, "training_log_clean.csv")));

  Tcdp tcdp;
  if (cfg.venom.enabled) {
    report.tcdp_text = read_file(path_in(cfg, "tcdp.txt"));
    while (!report.tcdp_text.empty() && report.tcdp_text.back() == '\n')
      report.tcdp_text.pop_back();
    tcdp = parse_tcdp_text(report.tcdp_text);
  }

  // stealthiness of the trigger on test images
  {
    const TriggerSpec trigger =
        make_trigger(cfg, clean_test.channels(), clean_test.height(), clean_test.width());
    double psnr_sum = 0.0, linf_sum = 0.0;
    int pairs = 0;
    for (int i = 0; i < clean_test.size() && pairs < kStealthPairs; ++i) {
      if (clean_test.labels[i] == target) continue;
      const Tensor clean_img = clean_test.sample(i);
      const Tensor triggered = apply_trigger(clean_img, trigger);
      psnr_sum += psnr(clean_img, triggered);
      linf_sum += linf(clean_img, triggered);
      ++pairs;
    }
    report.stealth_psnr = pairs ? psnr_sum / pairs : 0.0;
    report.stealth_linf = pairs ? linf_sum / pairs : 0.0;
  }

  // neuron-similarity inputs: clean target-class test samples vs triggered samples
  std::vector<int> clean_target_rows;
  for (int i = 0; i < clean_test.size() && static_cast<int>(clean_target_rows.size()) <
                                               kFig9Samples;
       ++i)
    if (clean_test.labels[i] == target) clean_target_rows.push_back(i);
  std::vector<int> poisoned_rows;
  for (int i = 0; i < asr_eval.size() && static_cast<int>(poisoned_rows.size()) <
                                             kFig9Samples;
       ++i)
    poisoned_rows.push_back(i);
  const Dataset fig9_clean = clean_test.subset(clean_target_rows);
  const Dataset fig9_poisoned = asr_eval.subset(poisoned_rows);

  // CKA sample batch
  std::vector<int> cka_rows;
  for (int i = 0; i < std::min(clean_test.size(), kCkaSamples); ++i) cka_rows.push_back(i);
  const Tensor cka_batch = clean_test.gather(cka_rows);
  std::vector<std::vector<std::vector<double>>> clean_grams;
  if (cfg.venom.enabled) {
    for (std::size_t li = 0; li < clean_model.layers.size(); ++li) {
      report.cka_layers.push_back(clean_model.layers[li].spec.name);
      clean_grams.push_back(
          cka_gram(layer_activation_matrix(clean_model, cka_batch, static_cast<int>(li))));
    }
  }

  for (const std::string& variant : variant_names(cfg)) {
    VariantBlock block;
    block.name = variant;
    const Network model = load_checkpoint(arch, path_in(cfg, model_file(variant)));
    block.before = evaluate_model(model, clean_test, asr_eval, report.clean_accuracy, target);
    block.log = parse_train_log(read_file(path_in(
        cfg, variant == "venom" ? "training_log.csv" : "training_log_baseline.csv")));

    for (std::size_t i = 0; i < cfg.defenses.size(); ++i) {
      DefenseRow row;
      row.name = defense_name(cfg.defenses[i], i);
      const Network defended =
          load_checkpoint(arch, path_in(cfg, "defended_" + variant + "_" + row.name +
                                                 ".vnck"));
      row.after = evaluate_model(defended, clean_test, asr_eval, report.clean_accuracy, target);
      row.surv = SurvivabilityRecord::make(block.before.ba, block.before.asr, row.after.ba,
                                           row.after.asr);
      if (!cfg.defenses[i].sweep.empty() && cfg.defenses[i].kind == "fp") {
        const DefenseConfig dc = defense_config(cfg, i);
        row.sweep = pruning_sweep(model, clean_train, cfg.defenses[i].sweep, dc,
                                  [&](const Network& candidate) {
                                    const EvalRecord r =
                                        evaluate_model(candidate, clean_test, asr_eval,
                                                       report.clean_accuracy, target);
                                    return std::make_pair(r.ba, r.asr);
                                  });
      }
      block.defenses.push_back(std::move(row));
    }

    if (cfg.venom.enabled && !tcdp.empty())
      block.neuron_similarity = crucial_neuron_similarity(
          clean_model, model, tcdp, fig9_clean, fig9_poisoned,
          sub_seed(cfg.seed, kSeedFig9), kFig9Pairs);

    if (cfg.venom.enabled) {
      auto& grid = variant == "venom" ? report.cka_venom : report.cka_original;
      grid.resize(clean_grams.size());
      for (std::size_t a = 0; a < clean_grams.size(); ++a) {
        const auto gram_b =
            cka_gram(layer_activation_matrix(model, cka_batch, static_cast<int>(a)));
        // row a: clean layer grams vs this model's layer-a gram
        grid[a].resize(clean_grams.size());
        for (std::size_t b = 0; b < clean_grams.size(); ++b)
          grid[a][b] = cka_from_grams(clean_grams[b], gram_b);
      }
    }
    report.variants.push_back(std::move(block));
  }

  const auto t_end = std::chrono::steady_clock::now();
  timings.emplace_back("evaluate",
                       std::chrono::duration<double>(t_end - t_begin).count());
  report.timings_sec = std::move(timings);
  emit_report(report, cfg.out_dir);
  return report;
}

}  // namespace

const std::vector<std::string> kStageNames = {"clean-train", "poison", "tcdp",
                                              "enhance",     "defend", "evaluate"};

TriggerSpec make_trigger(const ExperimentConfig& cfg, int channels, int height, int width) {
  TriggerSpec trigger;
  if (cfg.attack.trigger == "patch") {
    trigger.kind = TriggerSpec::Kind::Patch;
    const int s = cfg.attack.patch_size;
    trigger.pattern = Tensor({channels, s, s});
    const float hi = static_cast<float>(cfg.attack.patch_value);
    for (int c = 0; c < channels; ++c)
      for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x)
          trigger.pattern.data[(static_cast<std::size_t>(c) * s + y) * s + x] =
              cfg.attack.patch_pattern == "checker" ? ((y + x) % 2 ? 0.0f : hi) : hi;
    trigger.row = cfg.attack.patch_row >= 0 ? cfg.attack.patch_row : height - s;
    trigger.col = cfg.attack.patch_col >= 0 ? cfg.attack.patch_col : width - s;
  } else {
    trigger.kind = TriggerSpec::Kind::Blend;
    trigger.alpha = static_cast<float>(cfg.attack.blend_alpha);
    trigger.pattern = Tensor({channels, height, width});
    if (cfg.attack.blend_pattern == "noise") {
      Rng rng(sub_seed(cfg.seed, kSeedTrigger));
      for (auto& v : trigger.pattern.data) v = static_cast<float>(rng.uniform());
    } else {
      for (int c = 0; c < channels; ++c)
        for (int y = 0; y < height; ++y)
          for (int x = 0; x < width; ++x)
            trigger.pattern.data[(static_cast<std::size_t>(c) * height + y) * width + x] =
                static_cast<float>(y + x) / static_cast<float>(height + width - 2);
    }
  }
  return trigger;
}

Network make_arch(const ExperimentConfig& cfg, int channels, int height, int width,
                  int num_classes, std::uint64_t init_seed) {
  return build_small_cnn<float>(channels, height, width, num_classes,
                                cfg.training.width_multiplier, init_seed);
}

void run_stage(const ExperimentConfig& cfg, const std::string& stage) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  if (stage == "clean-train") stage_clean_train(cfg);
  else if (stage == "poison") stage_poison(cfg);
  else if (stage == "tcdp") stage_tcdp(cfg);
  else if (stage == "enhance") stage_enhance(cfg);
  else if (stage == "defend") stage_defend(cfg);
  else if (stage == "evaluate") stage_evaluate(cfg, {});
  else throw Error("unknown stage '" + stage + "'");
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  fs::remove(path_in(cfg, "FAILED"));

  std::vector<std::pair<std::string, double>> timings;
  auto timed = [&](const std::string& stage, auto&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      fn();
    } catch (const std::exception& e) {
      write_file(path_in(cfg, "FAILED"), stage + ": " + e.what() + "\n");
      throw StageError(stage, e.what());
    }
    const auto t1 = std::chrono::steady_clock::now();
    timings.emplace_back(stage, std::chrono::duration<double>(t1 - t0).count());
  };

  timed("clean-train", [&] { stage_clean_train(cfg); });
  timed("poison", [&] { stage_poison(cfg); });
  timed("tcdp", [&] { stage_tcdp(cfg); });
  timed("enhance", [&] { stage_enhance(cfg); });
  timed("defend", [&] { stage_defend(cfg); });
  try {
    return stage_evaluate(cfg, timings);
  } catch (const std::exception& e) {
    write_file(path_in(cfg, "FAILED"), std::string("evaluate: ") + e.what() + "\n");
    throw StageError("evaluate", e.what());
  }
}

// --- report emission ---------------------------------------------------

namespace {

std::string render_results_csv(const ExperimentReport& report) {
  std::ostringstream os;
  os << "variant,defense,ba,bad,asr,tacc,asur\n";
  for (const auto& block : report.variants) {
    os << block.name << ",none," << format_frac(block.before.ba) << ","
       << format_frac(block.before.bad) << "," << format_frac(block.before.asr) << ","
       << format_frac(block.before.tacc) << ",\n";
    for (const auto& row : block.defenses)
      os << block.name << "," << row.name << "," << format_frac(row.after.ba) << ","
         << format_frac(row.after.bad) << "," << format_frac(row.after.asr) << ","
         << format_frac(row.after.tacc) << "," << format_frac(row.surv.asur_value)
         << "\n";
  }
  return os.str();
}

struct SummaryCell {
  double ba = 0.0, asr = 0.0, asur = -1.0;  // asur < 0: not applicable
  bool present = false;
};

std::string render_summary_from_cells(
    const std::vector<std::string>& variants, const std::vector<std::string>& defense_rows,
    const std::vector<std::vector<SummaryCell>>& cells, double clean_accuracy) {
  std::ostringstream os;
  os << "# Experiment summary\n\n";
  os << "Clean model accuracy: " << format_pct(clean_accuracy) << "%\n\n";
  os << "Cell format: BA / ASR / ASuR, in percent.\n\n";
  os << "| Defense |";
  for (const auto& v : variants) os << " " << v << " |";
  os << "\n|---|";
  for (std::size_t i = 0; i < variants.size(); ++i) os << "---|";
  os << "\n";
  for (std::size_t r = 0; r < defense_rows.size(); ++r) {
    os << "| " << defense_rows[r] << " |";
    for (std::size_t v = 0; v < variants.size(); ++v) {
      const SummaryCell& c = cells[r][v];
      if (!c.present) {
        os << " - |";
      } else {
        os << " " << format_pct(c.ba) << " / " << format_pct(c.asr) << " / "
           << (c.asur < 0 ? std::string("-") : format_pct(c.asur)) << " |";
      }
    }
    os << "\n";
  }
  return os.str();
}

std::string render_summary(const ExperimentReport& report) {
  std::vector<std::string> variants, rows;
  for (const auto& block : report.variants) variants.push_back(block.name);
  rows.push_back("none");
  if (!report.variants.empty())
    for (const auto& d : report.variants.front().defenses) rows.push_back(d.name);

  std::vector<std::vector<SummaryCell>> cells(
      rows.size(), std::vector<SummaryCell>(variants.size()));
  for (std::size_t v = 0; v < report.variants.size(); ++v) {
    const auto& block = report.variants[v];
    cells[0][v] = {block.before.ba, block.before.asr, -1.0, true};
    for (std::size_t d = 0; d < block.defenses.size(); ++d)
      cells[d + 1][v] = {block.defenses[d].after.ba, block.defenses[d].after.asr,
                         block.defenses[d].surv.asur_value, true};
  }
  return render_summary_from_cells(variants, rows, cells, report.clean_accuracy);
}

}  // namespace

void emit_report(const ExperimentReport& report, const std::string& dir) {
  fs::create_directories(dir);
  auto p = [&](const std::string& f) { return (fs::path(dir) / f).string(); };

  write_file(p("results.csv"), render_results_csv(report));
  write_file(p("summary.md"), render_summary(report));
  write_file(p("config_echo.cfg"), render_config(report.config));
  if (!report.tcdp_text.empty()) write_file(p("tcdp.txt"), report.tcdp_text + "\n");
  write_file(p("training_log_clean.csv"), render_train_log(report.clean_log));
  for (const auto& block : report.variants)
    write_file(p(block.name == "venom" ? "training_log.csv" : "training_log_baseline.csv"),
               render_train_log(block.log));
  if (report.variants.size() == 1)
    write_file(p("training_log.csv"), render_train_log(report.variants.front().log));

  bool any_sweep = false;
  std::ostringstream sweep;
  sweep << "variant,ratio,ba,asr\n";
  for (const auto& block : report.variants)
    for (const auto& row : block.defenses)
      for (const auto& s : row.sweep) {
        any_sweep = true;
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s,%.2f,%.6f,%.6f\n", block.name.c_str(), s.ratio,
                      s.ba, s.asr);
        sweep << buf;
      }
  if (any_sweep) write_file(p("sweep.csv"), sweep.str());

  bool any_similarity = false;
  std::ostringstream fig9;
  fig9 << "variant,neuron_rank,similarity\n";
  for (const auto& block : report.variants)
    for (std::size_t i = 0; i < block.neuron_similarity.size(); ++i) {
      any_similarity = true;
      fig9 << block.name << "," << i << "," << format_frac(block.neuron_similarity[i])
           << "\n";
    }
  if (any_similarity) write_file(p("neuron_similarity.csv"), fig9.str());

  if (!report.cka_layers.empty()) {
    std::ostringstream cka;
    cka << "variant,layer_clean,layer_model,value\n";
    auto dump = [&](const std::string& variant,
                    const std::vector<std::vector<double>>& grid) {
      for (std::size_t a = 0; a < grid.size(); ++a)
        for (std::size_t b = 0; b < grid[a].size(); ++b)
          cka << variant << "," << report.cka_layers[b] << "," << report.cka_layers[a]
              << "," << format_frac(grid[a][b]) << "\n";
    };
    if (!report.cka_original.empty()) dump("original", report.cka_original);
    if (!report.cka_venom.empty()) dump("venom", report.cka_venom);
    write_file(p("cka.csv"), cka.str());
  }

  std::ostringstream times;
  for (const auto& [stage, seconds] : report.timings_sec) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s,%.3f\n", stage.c_str(), seconds);
    times << buf;
  }
  write_file(p("timings.txt"), times.str());
}

void regenerate_summary(const std::string& dir) {
  const std::string csv = read_file((fs::path(dir) / "results.csv").string());
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);  // header

  std::vector<std::string> variants, rows;
  std::vector<std::vector<SummaryCell>> cells;
  double clean_accuracy = 0.0;
  bool have_acc = false;

  auto variant_col = [&](const std::string& v) {
    for (std::size_t i = 0; i < variants.size(); ++i)
      if (variants[i] == v) return i;
    variants.push_back(v);
    for (auto& r : cells) r.emplace_back();
    return variants.size() - 1;
  };
  auto defense_row = [&](const std::string& d) {
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (rows[i] == d) return i;
    rows.push_back(d);
    cells.emplace_back(variants.size());
    return rows.size() - 1;
  };

  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) fields.push_back(item);
    while (fields.size() < 7) fields.emplace_back();
    const std::size_t v = variant_col(fields[0]);
    const std::size_t r = defense_row(fields[1]);
    SummaryCell cell;
    cell.ba = std::stod(fields[2]);
    cell.asr = std::stod(fields[4]);
    cell.asur = fields[6].empty() ? -1.0 : std::stod(fields[6]);
    cell.present = true;
    cells[r][v] = cell;
    if (!have_acc) {
      clean_accuracy = cell.ba + std::stod(fields[3]);
      have_acc = true;
    }
  }
  write_file((fs::path(dir) / "summary.md").string(),
             render_summary_from_cells(variants, rows, cells, clean_accuracy));
}

}  // namespace venom
