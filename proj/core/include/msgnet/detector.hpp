#pragma once

// MSG-Net assembly: optional scene-guided enhancement front end, a
// stride-pyramid backbone whose stage-final 3x3 convolutions are PLD-Conv
// blocks, a top-down/bottom-up neck fused by MS-DRF blocks, and an
// anchor-free decoupled head with center-based assignment, BCE + IoU-loss
// training and per-class NMS decoding.

#include "msgnet/datakit.hpp"
#include "msgnet/msdrf.hpp"
#include "msgnet/nn.hpp"
#include "msgnet/pld_conv.hpp"
#include "msgnet/sgie.hpp"

namespace msgnet {

struct DetectorConfig {
  int64_t num_classes = kNumCategories;
  int64_t input_size = 320;  // square resize target for train/eval
  // stem width followed by the four stage widths (/4, /8, /16, /32)
  std::vector<int64_t> widths = {16, 24, 32, 48, 64};
  std::vector<int64_t> strides = {8, 16, 32};
  int64_t neck_channels = 32;
  PLDConfig pld;      // channel counts filled per stage
  MSDRFConfig msdrf;  // channel counts filled per fusion node
  bool use_sgie = false;
  bool use_pld = true;
  bool use_msdrf = true;
  double score_threshold = 0.25;
  double nms_iou_threshold = 0.5;
  double cls_loss_weight = 1.0;
  double box_loss_weight = 2.0;
  // sqrt(box area) boundaries assigning ground truth to pyramid levels
  std::vector<double> level_size_thresholds = {32.0, 96.0};

  void validate() const;
};

struct Detection {
  Category category = Category::cargo_ship;
  double score = 0.0;
  double x = 0, y = 0, w = 0, h = 0;  // pixels in the original image frame
};
using DetectionSet = std::vector<Detection>;

struct LossReport {
  double classification_loss = 0.0;
  double box_loss = 0.0;
  double total = 0.0;
};

// One backbone stage: strided downsample followed by the stage-final 3x3
// block, which is a PLD-Conv when enabled and a plain convolution otherwise.
struct BackboneStage {
  Conv2d down;
  BatchNorm2d down_bn;
  bool use_pld = false;
  PLDConfig pld_config;
  PLDParams pld;
  Conv2d plain;
  BatchNorm2d final_bn;

  Tensor forward(const Tensor& x, bool training);
  void register_into(ParamRegistry& reg, const std::string& prefix) const;
};

// Neck fusion node: concat of two same-size maps -> MS-DRF (or plain conv).
struct FusionNode {
  bool use_msdrf = false;
  MSDRFConfig msdrf_config;
  MSDRFParams msdrf;
  Conv2d plain;
  BatchNorm2d plain_bn;

  Tensor forward(const Tensor& a, const Tensor& b, bool training);
  void register_into(ParamRegistry& reg, const std::string& prefix) const;
};

struct MSGNet {
  DetectorConfig config;

  // optional SGIE front end (frozen during detector training by default)
  SceneDiscriminator scene;
  EnhancerParams enhancer;
  PromptBank prompt_bank;
  bool sgie_initialized = false;

  Conv2d stem;
  BatchNorm2d stem_bn;
  std::vector<BackboneStage> stages;          // 4 stages
  std::vector<Conv2d> laterals;               // 3x 1x1 to neck width
  std::vector<BatchNorm2d> lateral_bns;
  FusionNode td4, td3, bu4, bu5;              // fusion nodes
  Conv2d down3, down4;                        // stride-2 transfers
  BatchNorm2d down3_bn, down4_bn;
  Conv2d cls_conv, cls_head, reg_conv, reg_head;  // shared decoupled head

  // (B, 3, S, S) -> per-level {cls logits (B, C, Hl, Wl), reg raw (B, 4, ...)}
  struct LevelOutput {
    Tensor cls_logits;
    Tensor reg_raw;
    int64_t stride;
  };
  std::vector<LevelOutput> forward(const Tensor& images, bool training);

  void register_into(ParamRegistry& reg, const std::string& prefix) const;
  // All parameters including SGIE (for checkpoints).
  ParamRegistry full_registry() const;
  // Parameters the detector optimizer updates (SGIE excluded: frozen).
  ParamRegistry trainable_registry() const;
  int64_t param_count() const;
};

MSGNet build_msgnet(const DetectorConfig& config, std::mt19937_64& rng);

// Parameter-count change from swapping one plain stage-final 3x3 convolution
// for a PLD-Conv block at the given width.
int64_t pld_block_param_delta(int64_t channels, const PLDConfig& pld_template);

// ---- assignment ----

struct PositiveSample {
  int64_t batch = 0, level = 0, i = 0, j = 0;
  int category = 0;
  double l = 0, t = 0, r = 0, b = 0;  // distances to box edges, input pixels
};

struct LevelShape {
  int64_t stride, h, w;
};

// Center-based: a location is positive for the ground-truth box containing
// its center at the box's matching stride level; ties go to the smaller box,
// then to the earlier annotation.
std::vector<PositiveSample> assign_targets(
    const std::vector<std::vector<BoxAnnotation>>& annotations,
    const std::vector<LevelShape>& levels, const DetectorConfig& config);

// 1 - IoU between distance-parameterized boxes sharing a center, averaged
// over rows. pred and target are (P, 4) with columns (l, t, r, b), all >= 0.
Tensor iou_loss(const Tensor& pred, const Tensor& target);

struct TrainStepResult {
  Tensor total_loss;  // backward-capable
  LossReport report;
};

// images normalized (B, 3, S, S); annotations in the same resized frame.
TrainStepResult forward_train(MSGNet& model, const Tensor& images,
                              const std::vector<std::vector<BoxAnnotation>>& annotations);

// Decode + threshold + per-class NMS; boxes are reported in the original
// image frame and clipped to its bounds. Deterministic.
DetectionSet detect(MSGNet& model, const Image& image, const DetectorConfig& config);

// Greedy per-class non-maximum suppression over scored boxes.
DetectionSet nms_per_class(DetectionSet candidates, double iou_threshold);

// ---- training loop ----

struct DetectorSample {
  Image image;
  std::vector<BoxAnnotation> boxes;  // original image frame
};

struct DetectorTrainOptions {
  int64_t steps = 500;
  int64_t batch_size = 8;
  std::string optimizer = "adam";  // "adam" | "sgd"
  double lr = 1e-3;
  double sgd_momentum = 0.9;
  uint64_t seed = 7;
  int64_t log_every = 50;
};

struct TrainLogEntry {
  int64_t step;
  LossReport loss;
};

std::vector<TrainLogEntry> train_detector(MSGNet& model,
                                          const std::vector<DetectorSample>& dataset,
                                          const DetectorTrainOptions& opts);

}  // namespace msgnet
