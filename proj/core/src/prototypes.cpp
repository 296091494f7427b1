#include "protopop/prototypes.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "json.hpp"
#include "protopop/binary_io.hpp"
#include "protopop/embeddings.hpp"
#include "protopop/error.hpp"
#include "protopop/parallel.hpp"
#include "protopop/random.hpp"

namespace protopop {

std::size_t SamplingPlan::effective_user_cap() const {
  return user_cap > 0 ? user_cap : (shots + 15) / 16;
}

void SamplingPlan::validate() const {
  if (shots < 1) throw ConfigError("sampling plan needs shots >= 1");
  if (temporal_bins < 1) throw ConfigError("sampling plan needs temporal_bins >= 1");
}

std::vector<std::size_t> proportional_quotas(std::span<const std::size_t> weights, std::size_t total) {
  const std::size_t sum = std::accumulate(weights.begin(), weights.end(), std::size_t{0});
  std::vector<std::size_t> quota(weights.size(), 0);
  if (sum == 0) return quota;
  std::vector<std::pair<std::size_t, std::size_t>> remainders;  // (remainder, bin)
  std::size_t assigned = 0;
  for (std::size_t b = 0; b < weights.size(); ++b) {
    const std::size_t num = total * weights[b];
    quota[b] = num / sum;
    assigned += quota[b];
    remainders.push_back({num % sum, b});
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& x, const auto& y) { return x.first > y.first; });
  for (std::size_t k = 0; assigned < total && k < remainders.size(); ++k, ++assigned) {
    ++quota[remainders[k].second];
  }
  return quota;
}

Selection stratified_select(std::span<const PostRecord* const> posts_in, const SamplingPlan& plan, std::uint64_t seed) {
  plan.validate();
  if (posts_in.empty()) throw DataError("cannot select shots from an empty class");

  // Canonical order, deduplicated by id, so the result does not depend on the
  // caller's ordering.
  std::vector<const PostRecord*> posts(posts_in.begin(), posts_in.end());
  std::sort(posts.begin(), posts.end(), [](const PostRecord* a, const PostRecord* b) { return a->post_id < b->post_id; });
  posts.erase(std::unique(posts.begin(), posts.end(),
                          [](const PostRecord* a, const PostRecord* b) { return a->post_id == b->post_id; }),
              posts.end());

  const std::size_t bins = plan.temporal_bins;
  const std::size_t cap = plan.effective_user_cap();
  auto [lo_it, hi_it] = std::minmax_element(posts.begin(), posts.end(), [](const PostRecord* a, const PostRecord* b) {
    return a->timestamp < b->timestamp;
  });
  const std::int64_t t_min = (*lo_it)->timestamp;
  const std::int64_t span = (*hi_it)->timestamp - t_min;
  __extension__ using Wide = __int128;
  auto bin_of = [&](const PostRecord* p) -> std::size_t {
    if (span == 0) return 0;
    const auto b = static_cast<std::size_t>((static_cast<Wide>(p->timestamp - t_min) * bins) / span);
    return std::min(b, bins - 1);
  };

  std::vector<std::vector<const PostRecord*>> by_bin(bins);
  for (const PostRecord* p : posts) by_bin[bin_of(p)].push_back(p);

  Selection sel;
  sel.bin_population.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) sel.bin_population[b] = by_bin[b].size();
  const std::size_t shots = std::min(plan.shots, posts.size());
  sel.bin_quota = proportional_quotas(sel.bin_population, shots);
  sel.bin_selected_capped.assign(bins, 0);

  Rng rng(seed);
  std::map<std::string, std::size_t> per_user;
  std::vector<std::vector<const PostRecord*>> deferred(bins);

  for (std::size_t b = 0; b < bins; ++b) {
    if (sel.bin_quota[b] == 0) continue;
    std::map<std::string, std::deque<const PostRecord*>> subtopics;
    for (const PostRecord* p : by_bin[b]) subtopics[p->category.level3].push_back(p);
    std::vector<std::deque<const PostRecord*>*> queues;
    for (auto& [name, q] : subtopics) {
      std::vector<const PostRecord*> shuffled(q.begin(), q.end());
      rng.shuffle(shuffled);
      q.assign(shuffled.begin(), shuffled.end());
      queues.push_back(&q);
    }
    std::size_t taken = 0;
    bool progress = true;
    while (taken < sel.bin_quota[b] && progress) {
      progress = false;
      for (auto* q : queues) {
        if (taken == sel.bin_quota[b]) break;
        while (!q->empty()) {
          const PostRecord* p = q->front();
          q->pop_front();
          if (per_user[p->user_id] >= cap) {
            deferred[b].push_back(p);
            continue;
          }
          ++per_user[p->user_id];
          sel.ids.push_back(p->post_id);
          ++taken;
          progress = true;
          break;
        }
      }
    }
    sel.bin_selected_capped[b] = taken;
  }

  // Relaxation: fill remaining quota from capped-out posts, least-used user first.
  for (std::size_t b = 0; b < bins; ++b) {
    std::size_t taken = sel.bin_selected_capped[b];
    auto& pool = deferred[b];
    while (taken < sel.bin_quota[b] && !pool.empty()) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < pool.size(); ++k) {
        if (per_user[pool[k]->user_id] < per_user[pool[best]->user_id]) best = k;
      }
      const PostRecord* p = pool[best];
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(best));
      ++per_user[p->user_id];
      sel.ids.push_back(p->post_id);
      ++sel.relaxed_picks;
      ++taken;
    }
  }
  return sel;
}

PrototypeSet build_prototypes(const Dataset& dataset, std::span<const std::string> pool_ids,
                              const EncoderProvider& encoder, const SamplingPlan& plan, std::uint64_t seed) {
  plan.validate();
  const std::size_t K = dataset.classes().size();
  const std::size_t d = encoder.dim();
  std::vector<std::vector<const PostRecord*>> by_class(K);
  for (const std::string& id : pool_ids) {
    const PostRecord& p = dataset.get(id);
    by_class[static_cast<std::size_t>(p.class_index)].push_back(&p);
  }
  for (std::size_t i = 0; i < K; ++i) {
    if (by_class[i].empty()) throw DataError("empty class '" + dataset.classes().at(i).name + "'");
  }

  PrototypeSet set;
  set.visual = Tensor(K, d);
  set.textual = Tensor(K, d);
  set.selections.resize(K);
  const bool tags_available = encoder.has_text_source(TextSource::AllTags);

  parallel_for(K, [&](std::size_t i) {
    Selection sel = stratified_select(by_class[i], plan, derive_seed(seed, i));
    std::vector<double> v(d, 0.0), t(d, 0.0);
    for (const std::string& id : sel.ids) {
      const Tensor image = encoder.encode_image(id);
      const PostRecord& post = dataset.get(id);
      const TextSource source =
          post.title_tokens.empty() && tags_available ? TextSource::AllTags : TextSource::Title;
      const TextEncoding text = encoder.encode_text(id, source);
      const auto vi = l2_normalized(image.values());
      const auto ti = l2_normalized(text.global.values());
      for (std::size_t k = 0; k < d; ++k) {
        v[k] += vi[k];
        t[k] += ti[k];
      }
    }
    const double n = static_cast<double>(sel.ids.size());
    for (std::size_t k = 0; k < d; ++k) {
      set.visual(i, k) = v[k] / n;
      set.textual(i, k) = t[k] / n;
    }
    set.selections[i] = std::move(sel);
  });
  return set;
}

void save_prototypes(const std::filesystem::path& dir, const PrototypeSet& set, const ClassTable& classes) {
  if (set.classes() != classes.size()) throw DataError("prototype count does not match class table");
  PembFile visual{EmbeddingKind::ImageGlobal, static_cast<std::uint32_t>(set.visual.cols()), {}};
  PembFile textual{EmbeddingKind::TextGlobal, static_cast<std::uint32_t>(set.textual.cols()), {}};
  nlohmann::ordered_json provenance = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const std::string& name = classes.at(i).name;
    visual.records.push_back({name, set.visual.row_copy(i)});
    textual.records.push_back({name, set.textual.row_copy(i)});
    const Selection& sel = set.selections.at(i);
    provenance.push_back({{"class_index", i},
                          {"name", name},
                          {"ids", sel.ids},
                          {"bin_population", sel.bin_population},
                          {"bin_quota", sel.bin_quota},
                          {"bin_selected_capped", sel.bin_selected_capped},
                          {"relaxed_picks", sel.relaxed_picks}});
  }
  std::filesystem::create_directories(dir);
  write_pemb(dir / "visual.pemb", visual);
  write_pemb(dir / "textual.pemb", textual);
  write_file(dir / "provenance.json", provenance.dump(2) + "\n");
}

PrototypeSet load_prototypes(const std::filesystem::path& dir, const ClassTable& classes) {
  PembFile visual = read_pemb(dir / "visual.pemb");
  PembFile textual = read_pemb(dir / "textual.pemb");
  if (visual.dim != textual.dim) throw FormatError("prototype files disagree on dim");
  const std::size_t K = classes.size();
  PrototypeSet set;
  set.visual = Tensor(K, visual.dim);
  set.textual = Tensor(K, textual.dim);
  auto place = [&](const PembFile& f, Tensor& dst, const char* what) {
    if (f.records.size() != K) throw FormatError(std::string(what) + " prototypes: expected " + std::to_string(K) + " classes");
    std::map<std::string, const Tensor*> by_name;
    for (const auto& r : f.records) by_name[r.id] = &r.values;
    for (std::size_t i = 0; i < K; ++i) {
      auto it = by_name.find(classes.at(i).name);
      if (it == by_name.end()) throw FormatError(std::string(what) + " prototypes missing class '" + classes.at(i).name + "'");
      std::copy(it->second->values().begin(), it->second->values().end(), dst.row(i).begin());
    }
  };
  place(visual, set.visual, "visual");
  place(textual, set.textual, "textual");

  auto doc = nlohmann::json::parse(read_file(dir / "provenance.json"));
  set.selections.resize(K);
  for (const auto& entry : doc) {
    const auto i = entry.at("class_index").get<std::size_t>();
    if (i >= K) throw FormatError("provenance entry for class " + std::to_string(i) + " out of range");
    Selection& sel = set.selections[i];
    sel.ids = entry.at("ids").get<std::vector<std::string>>();
    sel.bin_population = entry.at("bin_population").get<std::vector<std::size_t>>();
    sel.bin_quota = entry.at("bin_quota").get<std::vector<std::size_t>>();
    sel.bin_selected_capped = entry.at("bin_selected_capped").get<std::vector<std::size_t>>();
    sel.relaxed_picks = entry.at("relaxed_picks").get<std::size_t>();
  }
  return set;
}

}  // namespace protopop
