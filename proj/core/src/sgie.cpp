#include "msgnet/sgie.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace msgnet {

SceneDiscriminator::ResBlock::ResBlock(int64_t cin, int64_t cout, int64_t stride,
                                       std::mt19937_64& rng) {
  Conv2dSpec s1;
  s1.stride_h = s1.stride_w = stride;
  s1.pad_h = s1.pad_w = 1;
  conv1 = Conv2d(cin, cout, 3, 3, rng, s1);
  bn1 = BatchNorm2d(cout);
  conv2 = Conv2d::same(cout, cout, 3, rng);
  bn2 = BatchNorm2d(cout);
  has_proj = stride != 1 || cin != cout;
  if (has_proj) {
    Conv2dSpec sp;
    sp.stride_h = sp.stride_w = stride;
    proj = Conv2d(cin, cout, 1, 1, rng, sp);
  }
}

Tensor SceneDiscriminator::ResBlock::forward(const Tensor& x, bool training) {
  Tensor y = relu(bn1.forward(conv1.forward(x), training));
  y = bn2.forward(conv2.forward(y), training);
  Tensor skip = has_proj ? proj.forward(x) : x;
  return relu(add(y, skip));
}

void SceneDiscriminator::ResBlock::register_into(ParamRegistry& reg,
                                                 const std::string& prefix) const {
  conv1.register_into(reg, prefix + ".conv1");
  bn1.register_into(reg, prefix + ".bn1");
  conv2.register_into(reg, prefix + ".conv2");
  bn2.register_into(reg, prefix + ".bn2");
  if (has_proj) proj.register_into(reg, prefix + ".proj");
}

SceneDiscriminator::SceneDiscriminator(const SceneDiscriminatorConfig& cfg, std::mt19937_64& rng)
    : config(cfg) {
  check(cfg.base_width >= 4, "SceneDiscriminator: base_width too small");
  int64_t w = cfg.base_width;
  stem = Conv2d::same(3, w, 3, rng);
  stem_bn = BatchNorm2d(w);
  blocks.emplace_back(w, w * 2, 2, rng);
  blocks.emplace_back(w * 2, w * 4, 2, rng);
  blocks.emplace_back(w * 4, w * 8, 2, rng);
  embed = Linear(w * 8, cfg.embed_dim, rng);
  head = Linear(cfg.embed_dim, cfg.num_classes, rng);
}

SceneEmbedding SceneDiscriminator::forward(const Tensor& images, bool training) {
  const Shape& s = images.shape();
  check(s.size() == 4 && s[1] == 3, "SceneDiscriminator: expected (B, 3, H, W) input");
  Tensor x = relu(stem_bn.forward(stem.forward(images), training));
  for (auto& b : blocks) x = b.forward(x, training);
  Tensor pooled = global_avg_pool(x);            // (B, 8w)
  Tensor vec = relu(embed.forward(pooled));      // (B, 512)
  SceneEmbedding out;
  out.vector = vec;
  out.logits = head.forward(vec);
  return out;
}

void SceneDiscriminator::register_into(ParamRegistry& reg, const std::string& prefix) const {
  stem.register_into(reg, prefix + ".stem");
  stem_bn.register_into(reg, prefix + ".stem_bn");
  for (size_t i = 0; i < blocks.size(); ++i)
    blocks[i].register_into(reg, prefix + ".block" + std::to_string(i));
  embed.register_into(reg, prefix + ".embed");
  head.register_into(reg, prefix + ".head");
}

ParamRegistry SceneDiscriminator::registry() const {
  ParamRegistry reg;
  register_into(reg, "scene");
  return reg;
}

SceneEmbedding classify_scene(const Tensor& images, SceneDiscriminator& disc, bool training) {
  return disc.forward(images, training);
}

PromptBank::PromptBank(const EnhancerConfig& cfg, std::mt19937_64& rng) {
  check(cfg.prompt_count >= 2, "PromptBank: need at least 2 prompts");
  prompt_count = cfg.prompt_count;
  int64_t w = cfg.base_width;
  for (int64_t c : {4 * w, 2 * w, w}) {
    Level lvl;
    lvl.prompts = Tensor::randn({c, cfg.prompt_count}, rng, 0.1).set_requires_grad(true);
    lvl.mixer = Linear(c, cfg.prompt_count, rng);
    levels.push_back(std::move(lvl));
  }
}

void PromptBank::register_into(ParamRegistry& reg, const std::string& prefix) const {
  for (size_t i = 0; i < levels.size(); ++i) {
    reg.add_param(prefix + ".level" + std::to_string(i) + ".prompts", levels[i].prompts);
    levels[i].mixer.register_into(reg, prefix + ".level" + std::to_string(i) + ".mixer");
  }
}

void EnhancerParams::LevelPrompt::register_into(ParamRegistry& reg,
                                                const std::string& prefix) const {
  cgm.register_into(reg, prefix + ".cgm");
  scene_proj.register_into(reg, prefix + ".scene_proj");
  inject.register_into(reg, prefix + ".inject");
}

EnhancerParams::EnhancerParams(const EnhancerConfig& cfg, std::mt19937_64& rng) : config(cfg) {
  int64_t w = cfg.base_width;
  enc1 = Conv2d::same(3, w, 3, rng);
  Conv2dSpec s2;
  s2.stride_h = s2.stride_w = 2;
  s2.pad_h = s2.pad_w = 1;
  down1 = Conv2d(w, 2 * w, 3, 3, rng, s2);
  enc2 = Conv2d::same(2 * w, 2 * w, 3, rng);
  down2 = Conv2d(2 * w, 4 * w, 3, 3, rng, s2);
  bottleneck = Conv2d::same(4 * w, 4 * w, 3, rng);
  up1_conv = Conv2d::same(4 * w, 2 * w, 3, rng);
  dec1 = Conv2d::same(4 * w, 2 * w, 3, rng);
  up2_conv = Conv2d::same(2 * w, w, 3, rng);
  dec2 = Conv2d::same(2 * w, w, 3, rng);
  head = Conv2d::same(w, 3, 3, rng);
  for (int64_t c : {4 * w, 2 * w, w}) {
    LevelPrompt lp;
    lp.cgm = Conv2d::same(c, c, 3, rng);
    lp.scene_proj = Linear(cfg.embed_dim, c, rng, /*zero_init=*/true);
    lp.inject = Conv2d::same(c, c, 3, rng);
    level_prompts.push_back(std::move(lp));
  }
}

void EnhancerParams::register_into(ParamRegistry& reg, const std::string& prefix) const {
  enc1.register_into(reg, prefix + ".enc1");
  down1.register_into(reg, prefix + ".down1");
  enc2.register_into(reg, prefix + ".enc2");
  down2.register_into(reg, prefix + ".down2");
  bottleneck.register_into(reg, prefix + ".bottleneck");
  up1_conv.register_into(reg, prefix + ".up1_conv");
  dec1.register_into(reg, prefix + ".dec1");
  up2_conv.register_into(reg, prefix + ".up2_conv");
  dec2.register_into(reg, prefix + ".dec2");
  head.register_into(reg, prefix + ".head");
  for (size_t i = 0; i < level_prompts.size(); ++i)
    level_prompts[i].register_into(reg, prefix + ".prompt" + std::to_string(i));
}

Tensor fuse_scene_prompt(const Tensor& content_prompt, const SceneEmbedding& scene,
                         const Linear& projection) {
  Tensor projected = projection.forward(scene.vector);
  check(projected.shape() == content_prompt.shape(),
        "fuse_scene_prompt: projection output " + shape_str(projected.shape()) +
            " does not match content prompt " + shape_str(content_prompt.shape()));
  return add(content_prompt, projected);
}

namespace {

// Content prompt -> scene fusion -> softmax bank mixing -> broadcast add ->
// injection convolution.
Tensor inject_prompt(const Tensor& features, const EnhancerParams::LevelPrompt& lp,
                     const PromptBank::Level& bank_level, const SceneEmbedding& scene) {
  Tensor content = global_avg_pool(lp.cgm.forward(features));  // (B, C)
  Tensor fused = fuse_scene_prompt(content, scene, lp.scene_proj);
  Tensor weights = softmax_rows(bank_level.mixer.forward(fused));  // (B, P)
  // (B, P) x (C, P)^T -> (B, C)
  Tensor mixed = linear(weights, bank_level.prompts, Tensor());
  Tensor prompted = add(features, broadcast_spatial(mixed, features.dim(2), features.dim(3)));
  return silu(lp.inject.forward(prompted));
}

}  // namespace

Tensor enhance_image(const Tensor& images, EnhancerParams& params, PromptBank& bank,
                     const SceneEmbedding& scene) {
  const Shape& s = images.shape();
  check(s.size() == 4 && s[1] == 3, "enhance_image: expected (B, 3, H, W) input");
  check(s[2] % 4 == 0 && s[3] % 4 == 0,
        "enhance_image: spatial size must be divisible by 4 for the 3-level U-net");
  for (double v : images.data())
    if (v < 0.0 || v > 1.0)
      throw std::domain_error("enhance_image: input must be normalized to [0, 1]");
  check(bank.levels.size() == params.level_prompts.size(),
        "enhance_image: prompt bank / enhancer level mismatch");

  Tensor e1 = silu(params.enc1.forward(images));        // (B, w, H, W)
  Tensor e2 = silu(params.enc2.forward(silu(params.down1.forward(e1))));  // (B, 2w, H/2, W/2)
  Tensor b = silu(params.bottleneck.forward(silu(params.down2.forward(e2))));

  Tensor d0 = inject_prompt(b, params.level_prompts[0], bank.levels[0], scene);
  Tensor u1 = silu(params.up1_conv.forward(upsample_nearest2x(d0)));      // (B, 2w, H/2, W/2)
  Tensor d1 = silu(params.dec1.forward(concat_channels({u1, e2})));
  d1 = inject_prompt(d1, params.level_prompts[1], bank.levels[1], scene);
  Tensor u2 = silu(params.up2_conv.forward(upsample_nearest2x(d1)));      // (B, w, H, W)
  Tensor d2 = silu(params.dec2.forward(concat_channels({u2, e1})));
  d2 = inject_prompt(d2, params.level_prompts[2], bank.levels[2], scene);

  Tensor delta = params.head.forward(d2);
  return clamp01(add(images, delta));
}

namespace {

Tensor batch_from(const std::vector<SceneSample>& samples, const std::vector<size_t>& idx,
                  size_t start, size_t count, std::vector<int>* labels) {
  std::vector<const Image*> ptrs;
  for (size_t k = start; k < start + count; ++k) {
    ptrs.push_back(&samples[idx[k]].image);
    if (labels) labels->push_back(static_cast<int>(samples[idx[k]].label));
  }
  return stack_images(ptrs);
}

}  // namespace

double scene_accuracy(SceneDiscriminator& disc, const std::vector<SceneSample>& samples) {
  if (samples.empty()) return 0.0;
  NoGradGuard ng;
  int64_t correct = 0;
  for (const auto& s : samples) {
    Tensor img = image_to_tensor(s.image);
    SceneEmbedding emb = disc.forward(img, /*training=*/false);
    auto logits = emb.logits.data();
    int best = 0;
    for (int k = 1; k < kNumSceneClasses; ++k)
      if (logits[k] > logits[best]) best = k;
    if (best == static_cast<int>(s.label)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

SceneTrainResult train_scene_discriminator(SceneDiscriminator& disc,
                                           const std::vector<SceneSample>& train,
                                           const std::vector<SceneSample>& holdout,
                                           const SceneTrainOptions& opts) {
  check(!train.empty(), "train_scene_discriminator: empty training set");
  ParamRegistry reg = disc.registry();
  Adam opt(reg.param_tensors(), opts.lr);
  std::mt19937_64 rng(opts.seed);
  std::vector<size_t> idx(train.size());
  std::iota(idx.begin(), idx.end(), 0);

  SceneTrainResult result;
  for (int64_t epoch = 0; epoch < opts.epochs; ++epoch) {
    std::shuffle(idx.begin(), idx.end(), rng);
    double epoch_loss = 0.0;
    int64_t batches = 0;
    for (size_t start = 0; start < idx.size(); start += opts.batch_size) {
      size_t count = std::min<size_t>(opts.batch_size, idx.size() - start);
      std::vector<int> labels;
      Tensor images = batch_from(train, idx, start, count, &labels);
      SceneEmbedding emb = disc.forward(images, /*training=*/true);
      Tensor loss = cross_entropy(emb.logits, labels);
      opt.zero_grad();
      loss.backward();
      opt.step();
      epoch_loss += loss.item();
      ++batches;
    }
    result.final_train_loss = epoch_loss / std::max<int64_t>(batches, 1);
  }
  result.holdout_accuracy = scene_accuracy(disc, holdout);
  return result;
}

EnhancerTrainResult train_enhancer(EnhancerParams& params, PromptBank& bank,
                                   SceneDiscriminator& frozen_disc,
                                   const std::vector<EnhancerPair>& train,
                                   const std::vector<EnhancerPair>& validation,
                                   const EnhancerTrainOptions& opts) {
  check(!train.empty(), "train_enhancer: empty training set");
  ParamRegistry reg;
  params.register_into(reg, "enhancer");
  bank.register_into(reg, "bank");
  Adam opt(reg.param_tensors(), opts.lr);
  std::mt19937_64 rng(opts.seed);
  std::uniform_int_distribution<size_t> pick(0, train.size() - 1);

  EnhancerTrainResult result;
  for (int64_t step = 0; step < opts.steps; ++step) {
    std::vector<const Image*> deg, cln;
    for (int64_t k = 0; k < opts.batch_size; ++k) {
      const auto& pair = train[pick(rng)];
      deg.push_back(&pair.degraded);
      cln.push_back(&pair.clean);
    }
    Tensor degraded = stack_images(deg);
    Tensor clean = stack_images(cln);
    SceneEmbedding scene;
    {
      NoGradGuard ng;  // discriminator frozen
      scene = frozen_disc.forward(degraded, /*training=*/false);
    }
    Tensor enhanced = enhance_image(degraded, params, bank, scene);
    Tensor loss = l1_loss(enhanced, clean);
    opt.zero_grad();
    loss.backward();
    opt.step();
    result.final_l1 = loss.item();
  }

  // validation PSNR, enhancer vs raw degraded input
  if (!validation.empty()) {
    NoGradGuard ng;
    double sum_deg = 0.0, sum_enh = 0.0;
    for (const auto& pair : validation) {
      Tensor degraded = image_to_tensor(pair.degraded);
      SceneEmbedding scene = frozen_disc.forward(degraded, false);
      Tensor enhanced = enhance_image(degraded, params, bank, scene);
      Image enh = tensor_to_image(enhanced);
      auto mse = [](const Image& a, const Image& b) {
        double acc = 0.0;
        for (size_t i = 0; i < a.data.size(); ++i) {
          double d = a.data[i] - b.data[i];
          acc += d * d;
        }
        return acc / static_cast<double>(a.data.size());
      };
      auto to_psnr = [](double m) {
        return m <= 0.0 ? std::numeric_limits<double>::infinity() : 10.0 * std::log10(1.0 / m);
      };
      sum_deg += to_psnr(mse(pair.degraded, pair.clean));
      sum_enh += to_psnr(mse(enh, pair.clean));
    }
    result.val_psnr_degraded = sum_deg / static_cast<double>(validation.size());
    result.val_psnr_enhanced = sum_enh / static_cast<double>(validation.size());
  }
  return result;
}

}  // namespace msgnet
