#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "protopop/dataset.hpp"

namespace protopop {

// 1-based ranks with ties sharing their average rank.
std::vector<double> average_ranks(std::span<const double> values);

// Pearson correlation of average ranks. Throws DataError for mismatched
// lengths or fewer than two values, NumericError when either side is
// constant.
double spearman(std::span<const double> predicted, std::span<const double> actual);

double mae(std::span<const double> predicted, std::span<const double> actual);

struct ClassMetrics {
  std::string name;
  std::size_t count = 0;
  std::optional<double> src;  // undefined below two samples or for constant inputs
  double mae = 0.0;
};

struct SweepRow {
  double ratio = 0.0;
  std::size_t kept = 0;
  std::optional<double> src;
  double mae = 0.0;
};

struct EvalReport {
  std::size_t count = 0;
  std::optional<double> src;
  double mae = 0.0;
  std::vector<ClassMetrics> per_class;
  std::vector<SweepRow> sweep;

  std::string to_json() const;
  std::string to_table() const;
};

// SRC where defined, nullopt otherwise.
std::optional<double> try_spearman(std::span<const double> predicted, std::span<const double> actual);

// Overall and per-class metrics; predictions keyed by post id. Classes with
// no evaluated post are omitted.
EvalReport per_class_report(const Dataset& dataset, const std::map<std::string, double>& predictions);

}  // namespace protopop
