#include "protopop/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "protopop/error.hpp"
#include "protopop/random.hpp"

namespace protopop {

void SynthConfig::validate() const {
  if (classes < 2) throw ConfigError("synthetic config needs at least 2 classes");
  if (dim < 4) throw ConfigError("synthetic config needs dim >= 4");
  if (posts_per_class < 1) throw ConfigError("synthetic config needs posts_per_class >= 1");
  if (subtopics_per_class < 1) throw ConfigError("synthetic config needs subtopics_per_class >= 1");
  if (posts_per_user < 1) throw ConfigError("synthetic config needs posts_per_user >= 1");
  for (double f : {alpha, alpha_spread, noise_tokens_frac, empty_title_frac, class_name_mix, mislabeled_frac}) {
    if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("synthetic mixing fractions must lie in [0, 1]");
  }
}

namespace {

constexpr std::int64_t kEpochStart = 1'600'000'000;
constexpr std::int64_t kYear = 365LL * 24 * 3600;

std::vector<double> unit_gaussian(std::size_t d, Rng& rng) {
  std::vector<double> v(d);
  for (;;) {
    for (double& x : v) x = rng.normal();
    double n = l2_norm(v);
    if (n > 1e-12) {
      for (double& x : v) x /= n;
      return v;
    }
  }
}

std::vector<double> mix(const std::vector<double>& anchor, double alpha, Rng& rng) {
  std::vector<double> noise = unit_gaussian(anchor.size(), rng);
  std::vector<double> v(anchor.size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = alpha * anchor[k] + (1.0 - alpha) * noise[k];
  if (l2_norm(v) < 1e-12) return noise;
  return l2_normalized(v);
}

std::string padded(const char* prefix, std::size_t n, int width) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, n);
  return buf;
}

// noise[j] marks token j as off-topic.
TextEmbedding text_embedding(const std::vector<double>& anchor, const std::vector<bool>& noise, double alpha,
                             Rng& rng) {
  const std::size_t tokens = noise.size();
  TextEmbedding t;
  const std::size_t d = anchor.size();
  if (tokens == 0) {
    // Embedding of an empty string carries no class signal.
    t.global = unit_gaussian(d, rng);
    t.tokens = Tensor(0, d);
    return t;
  }
  t.global = mix(anchor, alpha, rng);
  t.tokens = Tensor(tokens, d);
  for (std::size_t j = 0; j < tokens; ++j) {
    std::vector<double> v = noise[j] ? unit_gaussian(d, rng) : mix(anchor, alpha, rng);
    std::copy(v.begin(), v.end(), t.tokens.row(j).begin());
  }
  return t;
}

}  // namespace

SyntheticData generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  const std::size_t K = cfg.classes;
  const std::size_t d = cfg.dim;
  Rng rng(derive_seed(cfg.seed, 0x5E17));

  SyntheticData out;
  out.image_anchors = Tensor(K, d);
  out.text_anchors = Tensor(K, d);
  std::vector<ClassInfo> classes;
  std::vector<double> class_offset(K);
  std::vector<std::int64_t> burst_start(K);
  for (std::size_t i = 0; i < K; ++i) {
    auto img = unit_gaussian(d, rng);
    auto txt = unit_gaussian(d, rng);
    // Anchors are stored at f32 precision like every other interchange value.
    for (double& v : img) v = static_cast<float>(v);
    for (double& v : txt) v = static_cast<float>(v);
    std::copy(img.begin(), img.end(), out.image_anchors.row(i).begin());
    std::copy(txt.begin(), txt.end(), out.text_anchors.row(i).begin());
    const std::string name = padded("class", i, 2);
    classes.push_back({static_cast<int>(i), name, name, padded("group", i / 2, 2)});
    class_offset[i] = rng.normal(0.0, 1.5);
    burst_start[i] = kEpochStart + static_cast<std::int64_t>(rng.uniform() * (kYear - 30LL * 86400));
    out.embeddings.class_tokens[name] = mix(txt, cfg.class_name_mix, rng);
  }

  const std::size_t total = K * cfg.posts_per_class;
  const std::size_t n_users = std::max<std::size_t>(4, total / cfg.posts_per_user);
  std::vector<double> user_effect(n_users);
  for (double& u : user_effect) u = rng.normal();

  std::vector<PostRecord> posts;
  posts.reserve(total);
  out.embeddings.dim = d;
  out.embeddings.has_tags = true;
  std::size_t counter = 0;
  for (std::size_t i = 0; i < K; ++i) {
    std::vector<double> img_anchor(out.image_anchors.row(i).begin(), out.image_anchors.row(i).end());
    for (std::size_t n = 0; n < cfg.posts_per_class; ++n, ++counter) {
      PostRecord p;
      p.post_id = padded("p", counter, 6);
      // Squaring a uniform skews activity toward low-numbered users.
      const double u = rng.uniform();
      const std::size_t user = std::min(n_users - 1, static_cast<std::size_t>(u * u * static_cast<double>(n_users)));
      p.user_id = padded("u", user, 5);
      p.class_index = static_cast<int>(i);
      // Subtopic weights decay geometrically so some subtopics are rare.
      std::size_t sub = 0;
      while (sub + 1 < cfg.subtopics_per_class && rng.uniform() < 0.45) ++sub;
      p.category = {classes[i].parent1, classes[i].parent2, classes[i].name + "_topic" + std::to_string(sub)};
      // A quarter of each class lands in a 30-day burst.
      if (rng.uniform() < 0.25) {
        p.timestamp = burst_start[i] + static_cast<std::int64_t>(rng.uniform() * 30.0 * 86400.0);
      } else {
        p.timestamp = kEpochStart + static_cast<std::int64_t>(rng.uniform() * static_cast<double>(kYear));
      }
      // Mislabeled posts take their content from another class.
      std::size_t src = i;
      if (cfg.mislabeled_frac > 0.0 && rng.uniform() < cfg.mislabeled_frac) src = (i + 1 + rng.index(K - 1)) % K;
      const bool mislabeled = src != i;
      const std::string& topic = mislabeled ? classes[src].name + "_topic0" : p.category.level3;
      const std::size_t title_len = rng.uniform() < cfg.empty_title_frac ? 0 : 1 + rng.index(6);
      std::vector<bool> title_noise, tag_noise;
      for (std::size_t t = 0; t < title_len; ++t) {
        title_noise.push_back(rng.uniform() < cfg.noise_tokens_frac);
        p.title_tokens.push_back(title_noise.back() ? padded("w", rng.index(200), 3)
                                                    : classes[src].name + "_w" + std::to_string(rng.index(20)));
      }
      const std::size_t tag_count = 1 + rng.index(10);
      for (std::size_t t = 0; t < tag_count; ++t) {
        tag_noise.push_back(rng.uniform() < cfg.noise_tokens_frac);
        p.tag_tokens.push_back(tag_noise.back() ? padded("tag", rng.index(100), 3)
                                                : topic + "_t" + std::to_string(rng.index(8)));
      }
      p.image_ref = "img/" + p.post_id + ".jpg";

      // Image and text get independent on-topic strengths.
      auto draw_alpha = [&] {
        return std::clamp(cfg.alpha + cfg.alpha_spread * (1.0 - cfg.alpha) * (2.0 * rng.uniform() - 1.0), 0.0, 1.0);
      };
      const double image_alpha = draw_alpha();
      const double text_alpha = draw_alpha();
      const auto src_img = out.image_anchors.row(src);
      const auto src_txt = out.text_anchors.row(src);
      const std::vector<double> content_img(src_img.begin(), src_img.end());
      const std::vector<double> content_txt(src_txt.begin(), src_txt.end());
      EmbeddingRecord rec;
      rec.image = mix(content_img, image_alpha, rng);
      rec.title = text_embedding(content_txt, title_noise, text_alpha, rng);
      rec.tags = text_embedding(content_txt, tag_noise, text_alpha, rng);

      const double aligned = cosine_similarity(rec.image, img_anchor);
      const double skew = -std::log(std::max(1e-12, 1.0 - rng.uniform())) - 1.0;
      // Centred terms keep the mean near 6 so a tail threshold of 12 stays rare.
      if (mislabeled) {
        p.popularity = 6.0 + class_offset[i] + 2.0 * rng.normal();
        out.embeddings.records.emplace(p.post_id, std::move(rec));
        posts.push_back(std::move(p));
        continue;
      }
      p.popularity = 6.0 + class_offset[i] + cfg.user_effect_scale * user_effect[user] +
                     cfg.alignment_scale * (aligned - 0.8) + cfg.tag_effect * (static_cast<double>(tag_count) - 5.5) +
                     cfg.noise_scale * rng.normal() + cfg.tail_scale * skew;
      out.embeddings.records.emplace(p.post_id, std::move(rec));
      posts.push_back(std::move(p));
    }
  }
  quantize_to_f32(out.embeddings);
  out.dataset = Dataset(std::move(posts), ClassTable(std::move(classes)));
  return out;
}

}  // namespace protopop
