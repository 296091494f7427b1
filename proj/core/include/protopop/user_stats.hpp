#pragma once

#include <array>
#include <map>
#include <span>
#include <string>

#include "protopop/dataset.hpp"

namespace protopop {

// Hand-crafted per-post features, in order:
//   0 log(1 + user_post_count)      (training split)
//   1 user_mean_popularity          (training split)
//   2 user_std_popularity           (population std, training split)
//   3 tag_count
//   4 title_token_count
//   5 log(1 + mean_tag_frequency)   (tag document frequency over training split)
//   6 sin(2 pi hour / 24)
//   7 cos(2 pi hour / 24)
// Indices 0-2 are the user-behaviour block, 3-7 the post-statistic block.
inline constexpr std::size_t kUserStatsWidth = 8;
using UserStats = std::array<double, kUserStatsWidth>;

inline constexpr std::array<const char*, kUserStatsWidth> kUserStatsNames = {
    "user_log_posts", "user_mean_pop", "user_std_pop", "tag_count",
    "title_tokens",   "log_tag_freq",  "hour_sin",     "hour_cos"};

// Users absent from the training split get the mean of features 0-2 over
// training users. Throws DataError for an empty training split or an id not
// in the dataset.
std::map<std::string, UserStats> compute_user_stats(const Dataset& dataset,
                                                    std::span<const std::string> train_ids);

}  // namespace protopop
