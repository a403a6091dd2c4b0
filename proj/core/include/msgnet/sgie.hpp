#pragma once

// Scene-guided image enhancement: a residual scene discriminator whose 512-d
// penultimate embedding conditions content-generated prompts, mixed against a
// learnable prompt bank and injected into the decoder of a 3-level U-shaped
// enhancer.

#include "msgnet/datakit.hpp"
#include "msgnet/nn.hpp"

namespace msgnet {

// (B, 512) embedding plus (B, 6) class logits.
struct SceneEmbedding {
  Tensor vector;
  Tensor logits;
};

struct SceneDiscriminatorConfig {
  int64_t base_width = 16;
  int64_t embed_dim = 512;
  int64_t num_classes = kNumSceneClasses;
};

// Small residual classifier: stem, three strided residual stages, global
// average pooling, an embedding projection and a linear class head.
struct SceneDiscriminator {
  struct ResBlock {
    Conv2d conv1, conv2;
    BatchNorm2d bn1, bn2;
    Conv2d proj;  // 1x1, used when stride or width changes
    bool has_proj = false;

    ResBlock() = default;
    ResBlock(int64_t cin, int64_t cout, int64_t stride, std::mt19937_64& rng);
    Tensor forward(const Tensor& x, bool training);
    void register_into(ParamRegistry& reg, const std::string& prefix) const;
  };

  SceneDiscriminatorConfig config;
  Conv2d stem;
  BatchNorm2d stem_bn;
  std::vector<ResBlock> blocks;
  Linear embed;   // -> 512
  Linear head;    // 512 -> 6

  SceneDiscriminator() = default;
  SceneDiscriminator(const SceneDiscriminatorConfig& cfg, std::mt19937_64& rng);

  // images (B, 3, H, W) normalized to [0, 1]
  SceneEmbedding forward(const Tensor& images, bool training);
  void register_into(ParamRegistry& reg, const std::string& prefix) const;
  ParamRegistry registry() const;
};

// Deterministic in evaluation mode; rejects non-3-channel input.
SceneEmbedding classify_scene(const Tensor& images, SceneDiscriminator& disc,
                              bool training = false);

struct EnhancerConfig {
  int64_t base_width = 12;   // decoder level widths are 4w, 2w, w
  int64_t prompt_count = 5;  // P
  int64_t embed_dim = 512;
};

// Learnable prompts per decoder level. prompts is stored (C_level, P): column
// p is prompt p, broadcastable over the level's spatial grid after mixing.
struct PromptBank {
  struct Level {
    Tensor prompts;  // (C, P)
    Linear mixer;    // C -> P softmax weights
  };
  std::vector<Level> levels;
  int64_t prompt_count = 0;

  PromptBank() = default;
  PromptBank(const EnhancerConfig& cfg, std::mt19937_64& rng);
  void register_into(ParamRegistry& reg, const std::string& prefix) const;
};

struct EnhancerParams {
  EnhancerConfig config;
  // encoder
  Conv2d enc1, down1, enc2, down2, bottleneck;
  // decoder
  Conv2d up1_conv, dec1, up2_conv, dec2, head;
  // per-level prompt machinery: content-prompt head, zero-init scene
  // projection, post-injection convolution
  struct LevelPrompt {
    Conv2d cgm;         // content prompt head
    Linear scene_proj;  // 512 -> C, zero-init
    Conv2d inject;
    void register_into(ParamRegistry& reg, const std::string& prefix) const;
  };
  std::vector<LevelPrompt> level_prompts;  // bottleneck, mid, full resolution

  EnhancerParams() = default;
  EnhancerParams(const EnhancerConfig& cfg, std::mt19937_64& rng);
  void register_into(ParamRegistry& reg, const std::string& prefix) const;
};

// content_prompt (B, C) + projection(scene.vector); pure addition.
Tensor fuse_scene_prompt(const Tensor& content_prompt, const SceneEmbedding& scene,
                         const Linear& projection);

// Encoder -> per-level prompt generation, scene fusion, bank mixing and
// injection -> decoded residual image, clamped to [0, 1]. Preserves shape.
Tensor enhance_image(const Tensor& images, EnhancerParams& params, PromptBank& bank,
                     const SceneEmbedding& scene);

// ---- staged desk-scale training ----

struct SceneSample {
  Image image;
  SceneClass label;
};

struct SceneTrainOptions {
  int64_t epochs = 12;
  int64_t batch_size = 16;
  double lr = 1e-3;  // Adam
  uint64_t seed = 1;
};

struct SceneTrainResult {
  double final_train_loss = 0.0;
  double holdout_accuracy = 0.0;
};

SceneTrainResult train_scene_discriminator(SceneDiscriminator& disc,
                                           const std::vector<SceneSample>& train,
                                           const std::vector<SceneSample>& holdout,
                                           const SceneTrainOptions& opts);

double scene_accuracy(SceneDiscriminator& disc, const std::vector<SceneSample>& samples);

struct EnhancerPair {
  Image degraded;
  Image clean;
  SceneClass scene;
};

struct EnhancerTrainOptions {
  int64_t steps = 400;
  int64_t batch_size = 4;
  double lr = 2e-3;  // Adam
  uint64_t seed = 1;
};

struct EnhancerTrainResult {
  double final_l1 = 0.0;
  double val_psnr_degraded = 0.0;  // PSNR(degraded, clean) on validation
  double val_psnr_enhanced = 0.0;  // PSNR(enhanced, clean) on validation
};

// Trains with pixel-wise L1 on (degraded, clean) pairs; the discriminator
// stays frozen and supplies scene embeddings.
EnhancerTrainResult train_enhancer(EnhancerParams& params, PromptBank& bank,
                                   SceneDiscriminator& frozen_disc,
                                   const std::vector<EnhancerPair>& train,
                                   const std::vector<EnhancerPair>& validation,
                                   const EnhancerTrainOptions& opts);

}  // namespace msgnet
