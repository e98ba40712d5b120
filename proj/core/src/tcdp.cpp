#include "venom/tcdp.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "venom/error.hpp"
#include "venom/rng.hpp"

namespace venom {

double SimilarityTable::value_for(int channel) const {
  for (std::size_t i = 0; i < channels.size(); ++i)
    if (channels[i] == channel) return values[i];
  throw Error("similarity table: channel " + std::to_string(channel) + " not present");
}

std::string Tcdp::to_text() const {
  std::ostringstream os;
  os << "layer=" << layer_name << "; neurons=";
  for (std::size_t i = 0; i < neurons.size(); ++i) os << (i ? "," : "") << neurons[i];
  os << "; counts=";
  for (std::size_t i = 0; i < counts.size(); ++i) os << (i ? "," : "") << counts[i];
  os << "; eps1=" << eps1 << "; eps2=" << eps2 << "; k=" << k;
  return os.str();
}

Tcdp parse_tcdp_text(const std::string& text) {
  Tcdp t;
  std::map<std::string, std::string> fields;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ';')) {
    const std::size_t eq = part.find('=');
    if (eq == std::string::npos) continue;
    auto strip = [](std::string s) {
      while (!s.empty() && (s.front() == ' ' || s.front() == '\n')) s.erase(s.begin());
      while (!s.empty() && (s.back() == ' ' || s.back() == '\n')) s.pop_back();
      return s;
    };
    fields[strip(part.substr(0, eq))] = strip(part.substr(eq + 1));
  }
  if (!fields.count("layer")) throw Error("tcdp record: missing layer field");
  t.layer_name = fields["layer"];
  auto ints = [](const std::string& s) {
    std::vector<int> out;
    std::stringstream p(s);
    std::string item;
    while (std::getline(p, item, ','))
      if (!item.empty()) out.push_back(std::stoi(item));
    return out;
  };
  t.neurons = ints(fields["neurons"]);
  t.counts = ints(fields["counts"]);
  if (fields.count("eps1")) t.eps1 = std::stod(fields["eps1"]);
  if (fields.count("eps2")) t.eps2 = std::stod(fields["eps2"]);
  if (fields.count("k")) t.k = std::stoi(fields["k"]);
  if (t.neurons.size() != t.counts.size())
    throw Error("tcdp record: neurons/counts length mismatch");
  return t;
}

namespace {

double cosine(const std::vector<float>& a, const std::vector<float>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;  // dead channel counts as dissimilar
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

SimilarityTable calc_similarity(const Network& clean_net, const std::string& layer,
                                const std::vector<int>& channels, const Dataset& data,
                                const std::vector<int>& samples, std::uint64_t seed,
                                int max_group) {
  if (samples.size() < 2) throw Error("calc_similarity: need at least 2 samples");
  if (channels.empty()) throw Error("calc_similarity: no channels requested");

  std::vector<int> order = samples;
  Rng rng(seed);
  shuffle(order, rng);
  std::size_t size_a = (order.size() + 1) / 2;
  std::size_t size_b = order.size() - size_a;
  if (max_group > 0) {
    size_a = std::min(size_a, static_cast<std::size_t>(max_group));
    size_b = std::min(size_b, static_cast<std::size_t>(max_group));
  }
  std::vector<int> group_a(order.begin(), order.begin() + size_a);
  std::vector<int> group_b(order.begin() + (order.size() + 1) / 2,
                           order.begin() + (order.size() + 1) / 2 + size_b);

  ActivationTap tap{layer, channels};
  auto acts_a = capture_activations(clean_net, data.gather(group_a), tap);
  auto acts_b = capture_activations(clean_net, data.gather(group_b), tap);

  SimilarityTable table;
  table.channels = channels;
  table.values.resize(channels.size());
  for (std::size_t c = 0; c < channels.size(); ++c) {
    double sum = 0.0;
    for (const auto& va : acts_a[c])
      for (const auto& vb : acts_b[c]) sum += cosine(va, vb);
    table.values[c] = sum / (static_cast<double>(size_a) * static_cast<double>(size_b));
  }
  return table;
}

Tcdp generate_tcdp(const Network& clean_net, const Dataset& clean, int target,
                   const TcdpParams& params, std::uint64_t seed) {
  const int li = clean_net.layer_index(params.layer);
  if (li < 0) throw Error("tcdp: unknown layer '" + params.layer + "'");
  if (clean_net.layers[li].spec.kind != LayerKind::Conv2d)
    throw Error("tcdp: layer '" + params.layer + "' is not conv2d");
  if (!(params.eps1 > 0.0 && params.eps1 < 1.0 && params.eps2 > 0.0 && params.eps2 < 1.0))
    throw Error("tcdp: thresholds must be strictly in (0,1)");
  if (params.k < 1) throw Error("tcdp: k must be >= 1");
  if (target < 0 || target >= clean.num_classes) throw Error("tcdp: target out of range");

  const int num_channels = clean_net.layers[li].spec.out_channels;
  std::vector<int> all_channels(num_channels);
  std::iota(all_channels.begin(), all_channels.end(), 0);

  // per class: channels whose within-class similarity exceeds eps1
  std::vector<std::vector<int>> crucial(clean.num_classes);
  SimilarityTable target_table;
  for (int cls = 0; cls < clean.num_classes; ++cls) {
    auto members = clean.indices_of_class(cls);
    SimilarityTable t = calc_similarity(clean_net, params.layer, all_channels, clean,
                                        members, sub_seed(seed, cls), params.max_group);
    for (std::size_t i = 0; i < t.channels.size(); ++i)
      if (t.values[i] > params.eps1) crucial[cls].push_back(t.channels[i]);
    if (cls == target) target_table = t;
  }

  if (crucial[target].empty())
    throw Error("tcdp: no crucial neurons at layer '" + params.layer + "'");

  // drop common channels: similarity over the whole dataset >= eps2
  std::vector<int> everything(clean.size());
  std::iota(everything.begin(), everything.end(), 0);
  SimilarityTable whole =
      calc_similarity(clean_net, params.layer, crucial[target], clean, everything,
                      sub_seed(seed, static_cast<std::uint64_t>(clean.num_classes)),
                      params.max_group);
  std::vector<int> survivors;
  for (std::size_t i = 0; i < whole.channels.size(); ++i)
    if (whole.values[i] < params.eps2) survivors.push_back(whole.channels[i]);

  // rank by the number of classes calling the channel crucial
  std::vector<int> count(survivors.size(), 0);
  for (std::size_t i = 0; i < survivors.size(); ++i)
    for (int cls = 0; cls < clean.num_classes; ++cls)
      if (std::find(crucial[cls].begin(), crucial[cls].end(), survivors[i]) !=
          crucial[cls].end())
        ++count[i];

  std::vector<std::size_t> order(survivors.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (count[a] != count[b]) return count[a] > count[b];
    const double sa = target_table.value_for(survivors[a]);
    const double sb = target_table.value_for(survivors[b]);
    if (sa != sb) return sa > sb;
    return survivors[a] < survivors[b];
  });

  Tcdp tcdp;
  tcdp.layer_name = params.layer;
  tcdp.eps1 = params.eps1;
  tcdp.eps2 = params.eps2;
  tcdp.k = params.k;
  const std::size_t take = std::min<std::size_t>(params.k, order.size());
  tcdp.truncated = order.size() < static_cast<std::size_t>(params.k);
  for (std::size_t i = 0; i < take; ++i) {
    tcdp.neurons.push_back(survivors[order[i]]);
    tcdp.counts.push_back(count[order[i]]);
  }
  return tcdp;
}

}  // namespace venom
