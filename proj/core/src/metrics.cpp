#include "protopop/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "json.hpp"
#include "protopop/error.hpp"

namespace protopop {

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

namespace {

void check_pair(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) {
    throw DataError(std::string(what) + ": length mismatch " + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()));
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i]) || !std::isfinite(b[i])) throw NumericError(std::string(what) + ": non-finite input");
  }
}

}  // namespace

double spearman(std::span<const double> predicted, std::span<const double> actual) {
  check_pair(predicted, actual, "spearman");
  if (predicted.size() < 2) throw DataError("spearman needs at least two values");
  const auto rp = average_ranks(predicted);
  const auto ra = average_ranks(actual);
  const double n = static_cast<double>(rp.size());
  const double mp = std::accumulate(rp.begin(), rp.end(), 0.0) / n;
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  double cov = 0, vp = 0, va = 0;
  for (std::size_t i = 0; i < rp.size(); ++i) {
    cov += (rp[i] - mp) * (ra[i] - ma);
    vp += (rp[i] - mp) * (rp[i] - mp);
    va += (ra[i] - ma) * (ra[i] - ma);
  }
  if (vp == 0.0 || va == 0.0) throw NumericError("spearman undefined for constant input");
  return cov / std::sqrt(vp * va);
}

std::optional<double> try_spearman(std::span<const double> predicted, std::span<const double> actual) {
  try {
    return spearman(predicted, actual);
  } catch (const DataError&) {
    return std::nullopt;
  } catch (const NumericError&) {
    return std::nullopt;
  }
}

double mae(std::span<const double> predicted, std::span<const double> actual) {
  check_pair(predicted, actual, "mae");
  if (predicted.empty()) throw DataError("mae of an empty set");
  double total = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) total += std::abs(predicted[i] - actual[i]);
  return total / static_cast<double>(predicted.size());
}

EvalReport per_class_report(const Dataset& dataset, const std::map<std::string, double>& predictions) {
  if (predictions.empty()) throw DataError("no predictions to evaluate");
  std::vector<std::vector<double>> pred(dataset.classes().size()), actual(dataset.classes().size());
  std::vector<double> all_pred, all_actual;
  for (const auto& [id, value] : predictions) {
    const PostRecord& post = dataset.get(id);
    pred[static_cast<std::size_t>(post.class_index)].push_back(value);
    actual[static_cast<std::size_t>(post.class_index)].push_back(post.popularity);
    all_pred.push_back(value);
    all_actual.push_back(post.popularity);
  }
  EvalReport report;
  report.count = all_pred.size();
  report.src = try_spearman(all_pred, all_actual);
  report.mae = mae(all_pred, all_actual);
  for (std::size_t c = 0; c < pred.size(); ++c) {
    if (pred[c].empty()) continue;
    ClassMetrics m;
    m.name = dataset.classes().at(c).name;
    m.count = pred[c].size();
    m.src = try_spearman(pred[c], actual[c]);
    m.mae = mae(pred[c], actual[c]);
    report.per_class.push_back(std::move(m));
  }
  return report;
}

namespace {

nlohmann::ordered_json opt(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

std::string fmt(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

}  // namespace

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["count"] = count;
  j["src"] = opt(src);
  j["mae"] = mae;
  auto& classes = j["per_class"] = nlohmann::ordered_json::array();
  for (const ClassMetrics& m : per_class) {
    classes.push_back({{"class", m.name}, {"count", m.count}, {"src", opt(m.src)}, {"mae", m.mae}});
  }
  if (!sweep.empty()) {
    auto& rows = j["sweep"] = nlohmann::ordered_json::array();
    for (const SweepRow& r : sweep) {
      rows.push_back({{"ratio", r.ratio}, {"kept", r.kept}, {"src", opt(r.src)}, {"mae", r.mae}});
    }
  }
  return j.dump(2) + "\n";
}

std::string EvalReport::to_table() const {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-24s %8s %10s %10s\n", "class", "count", "src", "mae");
  out += line;
  for (const ClassMetrics& m : per_class) {
    std::snprintf(line, sizeof line, "%-24s %8zu %10s %10.4f\n", m.name.c_str(), m.count, fmt(m.src).c_str(), m.mae);
    out += line;
  }
  std::snprintf(line, sizeof line, "%-24s %8zu %10s %10.4f\n", "overall", count, fmt(src).c_str(), mae);
  out += line;
  if (!sweep.empty()) {
    std::snprintf(line, sizeof line, "\n%-8s %8s %10s %10s\n", "ratio", "kept", "src", "mae");
    out += line;
    for (const SweepRow& r : sweep) {
      std::snprintf(line, sizeof line, "%-8.2f %8zu %10s %10.4f\n", r.ratio, r.kept, fmt(r.src).c_str(), r.mae);
      out += line;
    }
  }
  return out;
}

}  // namespace protopop
