#include "protopop/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "protopop/binary_io.hpp"
#include "protopop/error.hpp"
#include "protopop/metrics.hpp"
#include "protopop/parallel.hpp"
#include "protopop/random.hpp"

namespace protopop {

void GbdtConfig::validate() const {
  if (max_depth < 1) throw ConfigError("gbdt max_depth must be at least 1");
  if (min_leaf < 1) throw ConfigError("gbdt min_leaf must be at least 1");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw ConfigError("gbdt learning_rate must be in (0, 1]");
  if (!(feature_subsample > 0.0 && feature_subsample <= 1.0)) {
    throw ConfigError("gbdt feature_subsample must be in (0, 1]");
  }
}

GbdtConfig GbdtConfig::config_a(std::uint64_t seed) {
  GbdtConfig c;
  c.rounds = 300;
  c.max_depth = 6;
  c.learning_rate = 0.05;
  c.feature_subsample = 0.8;
  c.seed = derive_seed(seed, 0xA);
  c.tag = "A";
  return c;
}

GbdtConfig GbdtConfig::config_b(std::uint64_t seed) {
  GbdtConfig c;
  c.rounds = 500;
  c.max_depth = 4;
  c.learning_rate = 0.05;
  c.feature_subsample = 0.6;
  c.seed = derive_seed(seed, 0xB);
  c.tag = "B";
  return c;
}

double Tree::predict(std::span<const double> row) const {
  if (nodes.empty()) return 0.0;
  std::size_t i = 0;
  while (!nodes[i].is_leaf()) {
    const TreeNode& n = nodes[i];
    i = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return nodes[i].value;
}

double Forest::predict_row(std::span<const double> row) const {
  if (row.size() != features) {
    throw ShapeError("forest expects " + std::to_string(features) + " features, got " + std::to_string(row.size()));
  }
  double total = 0.0;
  for (const Tree& t : trees) total += t.predict(row);
  return base_score + learning_rate * total;
}

std::vector<double> Forest::predict(const Tensor& x) const {
  if (x.cols() != features) {
    throw ShapeError("forest expects " + std::to_string(features) + " features, got " + std::to_string(x.cols()));
  }
  std::vector<double> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = predict_row(x.row(r));
  return out;
}

namespace {

struct Candidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

struct NodeStats {
  std::size_t count = 0;
  double sum = 0.0;
};

double split_threshold(double lo, double hi) {
  const double mid = lo + 0.5 * (hi - lo);
  return (mid >= hi) ? lo : mid;
}

class TreeGrower {
 public:
  TreeGrower(const Tensor& x, const std::vector<std::vector<std::uint32_t>>& sorted, const GbdtConfig& config)
      : x_(x), sorted_(sorted), config_(config) {}

  // Grows one tree on `residual`; leaf[i] receives the leaf value of row i.
  Tree grow(const std::vector<double>& residual, const std::vector<std::size_t>& features,
            std::vector<double>& leaf) {
    const std::size_t n = residual.size();
    Tree tree;
    tree.nodes.emplace_back();
    std::vector<int> node_of(n, 0);  // index into `active`, -1 once settled
    std::vector<std::size_t> active{0};
    std::vector<int> tree_node_of(n, 0);

    for (std::size_t depth = 0; depth < config_.max_depth && !active.empty(); ++depth) {
      std::vector<NodeStats> totals(active.size());
      for (std::size_t i = 0; i < n; ++i) {
        if (node_of[i] < 0) continue;
        totals[static_cast<std::size_t>(node_of[i])].count++;
        totals[static_cast<std::size_t>(node_of[i])].sum += residual[i];
      }
      // Best split per (feature, node); reduced in feature order so the
      // result equals the sequential scan.
      std::vector<std::vector<Candidate>> per_feature(features.size());
      parallel_for(features.size(), [&](std::size_t k) {
        per_feature[k] = scan_feature(features[k], residual, node_of, totals);
      });
      std::vector<Candidate> best(active.size());
      for (std::size_t k = 0; k < features.size(); ++k) {
        for (std::size_t a = 0; a < active.size(); ++a) {
          if (per_feature[k][a].gain > best[a].gain) best[a] = per_feature[k][a];
        }
      }

      std::vector<std::size_t> next;
      std::vector<int> remap(active.size() * 2, -1);
      for (std::size_t a = 0; a < active.size(); ++a) {
        if (best[a].feature < 0 || !(best[a].gain > 1e-12)) continue;
        const std::size_t id = active[a];
        const int left = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        tree.nodes[id].feature = best[a].feature;
        tree.nodes[id].threshold = best[a].threshold;
        tree.nodes[id].left = left;
        tree.nodes[id].right = left + 1;
        remap[2 * a] = static_cast<int>(next.size());
        next.push_back(static_cast<std::size_t>(left));
        remap[2 * a + 1] = static_cast<int>(next.size());
        next.push_back(static_cast<std::size_t>(left + 1));
      }
      for (std::size_t i = 0; i < n; ++i) {
        if (node_of[i] < 0) continue;
        const auto a = static_cast<std::size_t>(node_of[i]);
        const std::size_t id = active[a];
        if (tree.nodes[id].is_leaf()) {
          node_of[i] = -1;
          continue;
        }
        const bool go_left = x_(i, static_cast<std::size_t>(tree.nodes[id].feature)) <= tree.nodes[id].threshold;
        node_of[i] = remap[2 * a + (go_left ? 0 : 1)];
        tree_node_of[i] = tree.nodes[id].left + (go_left ? 0 : 1);
      }
      active = std::move(next);
    }

    std::vector<NodeStats> leaf_stats(tree.nodes.size());
    for (std::size_t i = 0; i < n; ++i) {
      leaf_stats[static_cast<std::size_t>(tree_node_of[i])].count++;
      leaf_stats[static_cast<std::size_t>(tree_node_of[i])].sum += residual[i];
    }
    for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
      if (tree.nodes[id].is_leaf() && leaf_stats[id].count > 0) {
        tree.nodes[id].value = leaf_stats[id].sum / static_cast<double>(leaf_stats[id].count);
      }
    }
    leaf.resize(n);
    for (std::size_t i = 0; i < n; ++i) leaf[i] = tree.nodes[static_cast<std::size_t>(tree_node_of[i])].value;
    return tree;
  }

 private:
  std::vector<Candidate> scan_feature(std::size_t f, const std::vector<double>& residual,
                                      const std::vector<int>& node_of, const std::vector<NodeStats>& totals) const {
    const std::size_t m = totals.size();
    std::vector<Candidate> best(m);
    std::vector<NodeStats> left(m);
    std::vector<double> last(m, 0.0);
    const std::size_t min_leaf = config_.min_leaf;
    for (std::uint32_t i : sorted_[f]) {
      if (node_of[i] < 0) continue;
      const auto a = static_cast<std::size_t>(node_of[i]);
      const double v = x_(i, f);
      NodeStats& l = left[a];
      const NodeStats& t = totals[a];
      if (l.count >= min_leaf && t.count - l.count >= min_leaf && v > last[a]) {
        const double nl = static_cast<double>(l.count);
        const double nr = static_cast<double>(t.count - l.count);
        const double sr = t.sum - l.sum;
        const double gain = l.sum * l.sum / nl + sr * sr / nr - t.sum * t.sum / static_cast<double>(t.count);
        if (gain > best[a].gain) best[a] = {gain, static_cast<int>(f), split_threshold(last[a], v)};
      }
      l.count++;
      l.sum += residual[i];
      last[a] = v;
    }
    return best;
  }

  const Tensor& x_;
  const std::vector<std::vector<std::uint32_t>>& sorted_;
  const GbdtConfig& config_;
};

double mean_squared(const std::vector<double>& r) {
  double s = 0.0;
  for (double v : r) s += v * v;
  return s / static_cast<double>(r.size());
}

}  // namespace

Forest fit_gbdt(const Tensor& x, std::span<const double> y, const GbdtConfig& config,
                std::vector<double>* mse_trace) {
  config.validate();
  const std::size_t n = x.rows();
  if (y.size() != n) {
    throw ShapeError("gbdt: " + std::to_string(n) + " feature rows but " + std::to_string(y.size()) + " labels");
  }
  if (n == 0 || n < 2 * config.min_leaf) {
    throw DataError("gbdt: need at least " + std::to_string(2 * config.min_leaf) + " rows, got " +
                    std::to_string(n));
  }
  if (!x.all_finite()) throw NumericError("gbdt: non-finite feature value");
  for (double v : y)
    if (!std::isfinite(v)) throw NumericError("gbdt: non-finite label");

  Forest forest;
  forest.features = x.cols();
  forest.learning_rate = config.learning_rate;
  forest.tag = config.tag;
  forest.base_score = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);

  std::vector<std::vector<std::uint32_t>> sorted(x.cols());
  parallel_for(x.cols(), [&](std::size_t f) {
    auto& order = sorted[f];
    order.resize(n);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return x(a, f) < x(b, f); });
  });

  std::vector<double> residual(n);
  for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - forest.base_score;
  if (mse_trace) {
    mse_trace->clear();
    mse_trace->push_back(mean_squared(residual));
  }

  const auto per_tree = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(config.feature_subsample * static_cast<double>(x.cols()))));
  Rng rng(config.seed);
  std::vector<std::size_t> all(x.cols());
  std::iota(all.begin(), all.end(), 0);
  TreeGrower grower(x, sorted, config);
  std::vector<double> leaf;
  for (std::size_t round = 0; round < config.rounds; ++round) {
    std::vector<std::size_t> features = all;
    if (per_tree < features.size()) {
      rng.shuffle(features);
      features.resize(per_tree);
      std::sort(features.begin(), features.end());
    }
    forest.trees.push_back(grower.grow(residual, features, leaf));
    for (std::size_t i = 0; i < n; ++i) residual[i] -= config.learning_rate * leaf[i];
    if (mse_trace) mse_trace->push_back(mean_squared(residual));
  }
  return forest;
}

std::vector<std::size_t> oversample_tail(std::span<const double> labels, double threshold, std::size_t factor) {
  if (factor < 1) throw ConfigError("oversample factor must be at least 1");
  std::vector<std::size_t> out(labels.size());
  std::iota(out.begin(), out.end(), 0);
  for (std::size_t copy = 1; copy < factor; ++copy) {
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] > threshold) out.push_back(i);
  }
  return out;
}

std::vector<double> blend(double w, std::span<const double> pred_a, std::span<const double> pred_b) {
  if (pred_a.size() != pred_b.size()) throw ShapeError("blend: prediction lengths differ");
  std::vector<double> out(pred_a.size());
  // Equal members and the endpoints are reproduced exactly.
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (w == 1.0 || pred_a[i] == pred_b[i]) {
      out[i] = pred_a[i];
    } else if (w == 0.0) {
      out[i] = pred_b[i];
    } else {
      out[i] = w * pred_a[i] + (1.0 - w) * pred_b[i];
    }
  }
  return out;
}

FusionWeights fuse_predictions(std::span<const double> pred_a, std::span<const double> pred_b,
                               std::span<const double> labels) {
  if (pred_a.size() != pred_b.size() || pred_a.size() != labels.size()) {
    throw ShapeError("fuse_predictions: lengths " + std::to_string(pred_a.size()) + ", " +
                     std::to_string(pred_b.size()) + ", " + std::to_string(labels.size()) + " differ");
  }
  FusionWeights best;
  bool have = false;
  for (int step = 0; step <= 20; ++step) {
    const double w = step / 20.0;
    const auto mixed = blend(w, pred_a, pred_b);
    const double src = try_spearman(mixed, labels).value_or(-2.0);
    const double err = mae(mixed, labels);
    if (!have || src > best.src || (src == best.src && err < best.mae)) {
      best = {w, src, err};
      have = true;
    }
  }
  return best;
}

namespace {
constexpr std::uint16_t kForestVersion = 1;
}

std::string encode_forest(const Forest& forest) {
  BinaryWriter w;
  w.bytes("PFST");
  w.u16(kForestVersion);
  w.short_string(forest.tag);
  w.u32(static_cast<std::uint32_t>(forest.features));
  w.f64(forest.base_score);
  w.f64(forest.learning_rate);
  w.u32(static_cast<std::uint32_t>(forest.trees.size()));
  for (const Tree& t : forest.trees) {
    w.u32(static_cast<std::uint32_t>(t.nodes.size()));
    for (const TreeNode& n : t.nodes) {
      w.i32(n.feature);
      w.f64(n.threshold);
      w.i32(n.left);
      w.i32(n.right);
      w.f64(n.value);
    }
  }
  return w.take();
}

Forest decode_forest(std::string_view bytes) {
  BinaryReader r(bytes, "forest");
  if (r.remaining() < 4 || r.bytes(4) != "PFST") throw FormatError("forest: bad magic");
  const std::uint16_t version = r.u16();
  if (version != kForestVersion) throw FormatError("forest: version mismatch " + std::to_string(version));
  Forest f;
  f.tag = r.short_string();
  f.features = r.u32();
  f.base_score = r.f64();
  f.learning_rate = r.f64();
  const std::uint32_t trees = r.u32();
  for (std::uint32_t k = 0; k < trees; ++k) {
    Tree t;
    const std::uint32_t nodes = r.u32();
    for (std::uint32_t j = 0; j < nodes; ++j) {
      TreeNode n;
      n.feature = r.i32();
      n.threshold = r.f64();
      n.left = r.i32();
      n.right = r.i32();
      n.value = r.f64();
      t.nodes.push_back(n);
    }
    for (const TreeNode& n : t.nodes) {
      if (n.is_leaf()) continue;
      if (n.feature >= static_cast<int>(f.features) || n.left <= 0 || n.right <= 0 ||
          n.left >= static_cast<int>(nodes) || n.right >= static_cast<int>(nodes) || !std::isfinite(n.threshold)) {
        throw FormatError("forest: malformed node in tree " + std::to_string(k));
      }
    }
    f.trees.push_back(std::move(t));
  }
  if (!r.at_end()) throw FormatError("forest: trailing bytes");
  return f;
}

void save_forest(const std::filesystem::path& path, const Forest& forest) { write_file(path, encode_forest(forest)); }

Forest load_forest(const std::filesystem::path& path) { return decode_forest(read_file(path)); }

void write_predictions(const std::filesystem::path& path, std::span<const std::string> ids,
                       std::span<const double> values) {
  if (ids.size() != values.size()) throw ShapeError("write_predictions: ids and values differ in length");
  std::string out = "post_id,prediction\n";
  char buf[64];
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", values[i]);
    out += ids[i] + "," + buf + "\n";
  }
  write_file(path, out);
}

std::vector<std::pair<std::string, double>> read_predictions(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != "post_id,prediction") {
    throw FormatError("predictions " + path.filename().string() + ": missing header");
  }
  std::vector<std::pair<std::string, double>> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    char* end = nullptr;
    const double v = comma == std::string::npos ? 0.0 : std::strtod(line.c_str() + comma + 1, &end);
    if (comma == std::string::npos || end == line.c_str() + comma + 1 || *end != '\0') {
      throw FormatError("predictions " + path.filename().string() + " line " + std::to_string(line_no) +
                        ": malformed row");
    }
    out.emplace_back(line.substr(0, comma), v);
  }
  return out;
}

}  // namespace protopop
