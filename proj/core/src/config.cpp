#include "venom/config.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "venom/error.hpp"

namespace venom {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& v, int line) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0' || !std::isfinite(d))
    throw ConfigError("invalid number '" + v + "'", line);
  return d;
}

int parse_int(const std::string& v, int line) {
  char* end = nullptr;
  const long d = std::strtol(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0')
    throw ConfigError("invalid integer '" + v + "'", line);
  return static_cast<int>(d);
}

std::uint64_t parse_u64(const std::string& v, int line) {
  char* end = nullptr;
  const unsigned long long d = std::strtoull(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0')
    throw ConfigError("invalid unsigned integer '" + v + "'", line);
  return d;
}

bool parse_bool(const std::string& v, int line) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError("invalid boolean '" + v + "' (use true/false)", line);
}

std::vector<double> parse_double_list(const std::string& v, int line) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_double(item, line));
  }
  if (out.empty()) throw ConfigError("empty list", line);
  return out;
}

// Shortest decimal that parses back exactly.
std::string format_double(double d) {
  char buf[64];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, d);
    if (std::strtod(buf, nullptr) == d) return buf;
  }
  return buf;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (dataset.kind != "synthetic" && dataset.kind != "file")
    throw ConfigError("dataset.kind must be 'synthetic' or 'file'");
  if (dataset.kind == "synthetic") {
    if (dataset.classes < 2 || dataset.classes > 16)
      throw ConfigError("dataset.classes must be in [2,16]");
    if (dataset.image_size < 16) throw ConfigError("dataset.image_size must be >= 16");
    if (dataset.train_per_class < 10) throw ConfigError("dataset.train_per_class must be >= 10");
    if (dataset.test_per_class < 10) throw ConfigError("dataset.test_per_class must be >= 10");
    if (dataset.channels != 1 && dataset.channels != 3)
      throw ConfigError("dataset.channels must be 1 or 3");
  } else if (dataset.path.empty() || dataset.test_path.empty()) {
    throw ConfigError("dataset.kind=file requires dataset.path and dataset.test_path");
  }

  if (attack.trigger.empty()) throw ConfigError("missing required key attack.trigger");
  if (attack.trigger != "patch" && attack.trigger != "blend")
    throw ConfigError("attack.trigger must be 'patch' or 'blend'");
  if (!(attack.poison_rate > 0.0 && attack.poison_rate < 1.0))
    throw ConfigError("attack.poison_rate must be strictly in (0,1)");
  if (attack.target < 0) throw ConfigError("attack.target must be >= 0");
  if (attack.trigger == "patch") {
    if (attack.patch_size < 1) throw ConfigError("attack.patch_size must be >= 1");
    if (attack.patch_value < 0.0 || attack.patch_value > 1.0)
      throw ConfigError("attack.patch_value must be in [0,1]");
    if (attack.patch_pattern != "solid" && attack.patch_pattern != "checker")
      throw ConfigError("attack.patch_pattern must be 'solid' or 'checker'");
  } else {
    if (!(attack.blend_alpha > 0.0 && attack.blend_alpha < 1.0))
      throw ConfigError("attack.blend_alpha must be strictly in (0,1)");
    if (attack.blend_pattern != "noise" && attack.blend_pattern != "gradient")
      throw ConfigError("attack.blend_pattern must be 'noise' or 'gradient'");
  }

  if (!(venom.eps1 > 0.0 && venom.eps1 < 1.0 && venom.eps2 > 0.0 && venom.eps2 < 1.0))
    throw ConfigError("venom.eps1/eps2 must be strictly in (0,1)");
  if (venom.k < 1) throw ConfigError("venom.k must be >= 1");
  if (venom.s < 1) throw ConfigError("venom.s must be >= 1");
  if (venom.max_group < 0) throw ConfigError("venom.max_group must be >= 0");

  if (training.epochs < 1) throw ConfigError("training.epochs must be >= 1");
  if (!(training.micro_fraction > 0.0 && training.micro_fraction < 1.0))
    throw ConfigError("training.micro_fraction must be strictly in (0,1)");
  if (training.batch_size < 1) throw ConfigError("training.batch_size must be >= 1");
  if (training.width_multiplier < 1) throw ConfigError("training.width_multiplier must be >= 1");
  if (venom.s > training.epochs) throw ConfigError("venom.s must be <= training.epochs");

  for (const auto& d : defenses) {
    if (d.kind != "ft" && d.kind != "fp")
      throw ConfigError("defense kind must be 'ft' or 'fp'");
    if (!(d.clean_fraction > 0.0 && d.clean_fraction <= 1.0))
      throw ConfigError("defense clean_fraction must be in (0,1]");
    if (d.epochs < 0) throw ConfigError("defense epochs must be >= 0");
    if (d.ratio < 0.0 || d.ratio > 1.0) throw ConfigError("defense ratio must be in [0,1]");
    if (d.batch < 1) throw ConfigError("defense batch must be >= 1");
    for (std::size_t i = 0; i < d.sweep.size(); ++i) {
      if (d.sweep[i] < 0.0 || d.sweep[i] > 1.0)
        throw ConfigError("defense sweep ratios must be in [0,1]");
      if (i && d.sweep[i] < d.sweep[i - 1])
        throw ConfigError("defense sweep ratios must ascend");
    }
  }
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  cfg.attack.trigger.clear();

  std::istringstream is(text);
  std::string raw;
  std::string section;
  int defense_ordinal = 0;
  int line_no = 0;

  while (std::getline(is, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("unterminated section header", line_no);
      section = trim(line.substr(1, line.size() - 2));
      if (section.rfind("defense.", 0) == 0) {
        const int n = parse_int(section.substr(8), line_no);
        if (n != defense_ordinal + 1)
          throw ConfigError("defense sections must be numbered consecutively from 1", line_no);
        defense_ordinal = n;
        cfg.defenses.emplace_back();
      } else if (section != "dataset" && section != "attack" && section != "venom" &&
                 section != "training") {
        throw ConfigError("unknown section [" + section + "]", line_no);
      }
      continue;
    }

    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value'", line_no);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("empty key", line_no);

    auto unknown = [&]() -> ConfigError {
      const std::string where = section.empty() ? key : section + "." + key;
      return ConfigError("unknown key '" + where + "'", line_no);
    };

    if (section.empty()) {
      if (key == "seed") cfg.seed = parse_u64(value, line_no);
      else if (key == "out") cfg.out_dir = value;
      else throw unknown();
    } else if (section == "dataset") {
      auto& d = cfg.dataset;
      if (key == "kind") d.kind = value;
      else if (key == "classes") d.classes = parse_int(value, line_no);
      else if (key == "train_per_class") d.train_per_class = parse_int(value, line_no);
      else if (key == "test_per_class") d.test_per_class = parse_int(value, line_no);
      else if (key == "image_size") d.image_size = parse_int(value, line_no);
      else if (key == "channels") d.channels = parse_int(value, line_no);
      else if (key == "path") d.path = value;
      else if (key == "test_path") d.test_path = value;
      else throw unknown();
    } else if (section == "attack") {
      auto& a = cfg.attack;
      if (key == "trigger") a.trigger = value;
      else if (key == "poison_rate") a.poison_rate = parse_double(value, line_no);
      else if (key == "target") a.target = parse_int(value, line_no);
      else if (key == "patch_size") a.patch_size = parse_int(value, line_no);
      else if (key == "patch_value") a.patch_value = parse_double(value, line_no);
      else if (key == "patch_pattern") a.patch_pattern = value;
      else if (key == "patch_row") a.patch_row = parse_int(value, line_no);
      else if (key == "patch_col") a.patch_col = parse_int(value, line_no);
      else if (key == "blend_alpha") a.blend_alpha = parse_double(value, line_no);
      else if (key == "blend_pattern") a.blend_pattern = value;
      else throw unknown();
    } else if (section == "venom") {
      auto& v = cfg.venom;
      if (key == "enabled") v.enabled = parse_bool(value, line_no);
      else if (key == "layer") v.layer = value;
      else if (key == "eps1") v.eps1 = parse_double(value, line_no);
      else if (key == "eps2") v.eps2 = parse_double(value, line_no);
      else if (key == "k") v.k = parse_int(value, line_no);
      else if (key == "s") v.s = parse_int(value, line_no);
      else if (key == "max_group") v.max_group = parse_int(value, line_no);
      else throw unknown();
    } else if (section == "training") {
      auto& t = cfg.training;
      if (key == "epochs") t.epochs = parse_int(value, line_no);
      else if (key == "micro_fraction") t.micro_fraction = parse_double(value, line_no);
      else if (key == "batch_size") t.batch_size = parse_int(value, line_no);
      else if (key == "base_lr") t.base_lr = parse_double(value, line_no);
      else if (key == "momentum") t.momentum = parse_double(value, line_no);
      else if (key == "weight_decay") t.weight_decay = parse_double(value, line_no);
      else if (key == "width_multiplier") t.width_multiplier = parse_int(value, line_no);
      else throw unknown();
    } else {  // defense.N
      auto& d = cfg.defenses.back();
      if (key == "kind") d.kind = value;
      else if (key == "clean_fraction") d.clean_fraction = parse_double(value, line_no);
      else if (key == "epochs") d.epochs = parse_int(value, line_no);
      else if (key == "lr") d.lr = parse_double(value, line_no);
      else if (key == "ratio") d.ratio = parse_double(value, line_no);
      else if (key == "layer") d.layer = value;
      else if (key == "sweep") d.sweep = parse_double_list(value, line_no);
      else if (key == "batch") d.batch = parse_int(value, line_no);
      else throw unknown();
    }
  }

  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config(buf.str());
}

std::string render_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "seed = " << cfg.seed << "\n";
  os << "out = " << cfg.out_dir << "\n\n";

  os << "[dataset]\n";
  os << "kind = " << cfg.dataset.kind << "\n";
  os << "classes = " << cfg.dataset.classes << "\n";
  os << "train_per_class = " << cfg.dataset.train_per_class << "\n";
  os << "test_per_class = " << cfg.dataset.test_per_class << "\n";
  os << "image_size = " << cfg.dataset.image_size << "\n";
  os << "channels = " << cfg.dataset.channels << "\n";
  if (!cfg.dataset.path.empty()) os << "path = " << cfg.dataset.path << "\n";
  if (!cfg.dataset.test_path.empty()) os << "test_path = " << cfg.dataset.test_path << "\n";

  os << "\n[attack]\n";
  os << "trigger = " << cfg.attack.trigger << "\n";
  os << "poison_rate = " << format_double(cfg.attack.poison_rate) << "\n";
  os << "target = " << cfg.attack.target << "\n";
  os << "patch_size = " << cfg.attack.patch_size << "\n";
  os << "patch_value = " << format_double(cfg.attack.patch_value) << "\n";
  os << "patch_pattern = " << cfg.attack.patch_pattern << "\n";
  os << "patch_row = " << cfg.attack.patch_row << "\n";
  os << "patch_col = " << cfg.attack.patch_col << "\n";
  os << "blend_alpha = " << format_double(cfg.attack.blend_alpha) << "\n";
  os << "blend_pattern = " << cfg.attack.blend_pattern << "\n";

  os << "\n[venom]\n";
  os << "enabled = " << (cfg.venom.enabled ? "true" : "false") << "\n";
  os << "layer = " << cfg.venom.layer << "\n";
  os << "eps1 = " << format_double(cfg.venom.eps1) << "\n";
  os << "eps2 = " << format_double(cfg.venom.eps2) << "\n";
  os << "k = " << cfg.venom.k << "\n";
  os << "s = " << cfg.venom.s << "\n";
  os << "max_group = " << cfg.venom.max_group << "\n";

  os << "\n[training]\n";
  os << "epochs = " << cfg.training.epochs << "\n";
  os << "micro_fraction = " << format_double(cfg.training.micro_fraction) << "\n";
  os << "batch_size = " << cfg.training.batch_size << "\n";
  os << "base_lr = " << format_double(cfg.training.base_lr) << "\n";
  os << "momentum = " << format_double(cfg.training.momentum) << "\n";
  os << "weight_decay = " << format_double(cfg.training.weight_decay) << "\n";
  os << "width_multiplier = " << cfg.training.width_multiplier << "\n";

  for (std::size_t i = 0; i < cfg.defenses.size(); ++i) {
    const auto& d = cfg.defenses[i];
    os << "\n[defense." << i + 1 << "]\n";
    os << "kind = " << d.kind << "\n";
    os << "clean_fraction = " << format_double(d.clean_fraction) << "\n";
    os << "epochs = " << d.epochs << "\n";
    os << "lr = " << format_double(d.lr) << "\n";
    os << "ratio = " << format_double(d.ratio) << "\n";
    os << "layer = " << d.layer << "\n";
    os << "batch = " << d.batch << "\n";
    if (!d.sweep.empty()) {
      os << "sweep = ";
      for (std::size_t j = 0; j < d.sweep.size(); ++j)
        os << (j ? "," : "") << format_double(d.sweep[j]);
      os << "\n";
    }
  }
  return os.str();
}

}  // namespace venom
