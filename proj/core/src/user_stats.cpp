#include "protopop/user_stats.hpp"

#include <cmath>
#include <numbers>
#include <set>
#include <unordered_map>

#include "protopop/error.hpp"

namespace protopop {

std::map<std::string, UserStats> compute_user_stats(const Dataset& dataset, std::span<const std::string> train_ids) {
  if (train_ids.empty()) throw DataError("cannot compute user statistics from an empty training split");

  struct Accum {
    double count = 0, sum = 0, sum_sq = 0;
  };
  std::map<std::string, Accum> users;
  std::unordered_map<std::string, double> tag_docs;
  for (const std::string& id : train_ids) {
    const PostRecord& p = dataset.get(id);
    Accum& a = users[p.user_id];
    a.count += 1;
    a.sum += p.popularity;
    a.sum_sq += p.popularity * p.popularity;
    std::set<std::string> distinct(p.tag_tokens.begin(), p.tag_tokens.end());
    for (const std::string& t : distinct) tag_docs[t] += 1;
  }

  std::map<std::string, std::array<double, 3>> user_features;
  std::array<double, 3> fallback{0, 0, 0};
  for (const auto& [user, a] : users) {
    const double mean = a.sum / a.count;
    const double var = std::max(0.0, a.sum_sq / a.count - mean * mean);
    std::array<double, 3> f{std::log1p(a.count), mean, std::sqrt(var)};
    for (int k = 0; k < 3; ++k) fallback[k] += f[k];
    user_features.emplace(user, f);
  }
  for (double& v : fallback) v /= static_cast<double>(users.size());

  std::map<std::string, UserStats> out;
  for (const PostRecord& p : dataset.posts()) {
    UserStats s{};
    auto it = user_features.find(p.user_id);
    const auto& uf = it == user_features.end() ? fallback : it->second;
    s[0] = uf[0];
    s[1] = uf[1];
    s[2] = uf[2];
    s[3] = static_cast<double>(p.tag_tokens.size());
    s[4] = static_cast<double>(p.title_tokens.size());
    double freq = 0.0;
    for (const std::string& t : p.tag_tokens) {
      auto f = tag_docs.find(t);
      if (f != tag_docs.end()) freq += f->second;
    }
    if (!p.tag_tokens.empty()) freq /= static_cast<double>(p.tag_tokens.size());
    s[5] = std::log1p(freq);
    const double hour = static_cast<double>((p.timestamp % 86400) / 3600);
    s[6] = std::sin(2.0 * std::numbers::pi * hour / 24.0);
    s[7] = std::cos(2.0 * std::numbers::pi * hour / 24.0);
    out.emplace(p.post_id, s);
  }
  return out;
}

}  // namespace protopop
