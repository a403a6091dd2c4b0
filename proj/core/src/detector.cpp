#include "msgnet/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace msgnet {

void DetectorConfig::validate() const {
  check(num_classes >= 1, "DetectorConfig: num_classes must be >= 1");
  check(input_size >= 32 && input_size % 32 == 0,
        "DetectorConfig: input_size must be a positive multiple of 32");
  check(widths.size() == 5, "DetectorConfig: widths must list stem + 4 stage widths");
  for (int64_t w : widths) check(w >= 1, "DetectorConfig: widths must be positive");
  check(strides.size() == 3, "DetectorConfig: exactly three pyramid strides expected");
  int64_t prev = 0;
  for (int64_t s : strides) {
    check(s > prev, "DetectorConfig: strides must be ascending");
    check((s & (s - 1)) == 0, "DetectorConfig: strides must be powers of two");
    prev = s;
  }
  check(score_threshold > 0.0 && score_threshold <= 1.0,
        "DetectorConfig: score_threshold must be in (0, 1]");
  check(nms_iou_threshold > 0.0 && nms_iou_threshold < 1.0,
        "DetectorConfig: nms_iou_threshold must be in (0, 1)");
  check(level_size_thresholds.size() == 2 &&
            level_size_thresholds[0] < level_size_thresholds[1],
        "DetectorConfig: need two ascending level size thresholds");
  check(neck_channels >= 4, "DetectorConfig: neck_channels too small");
}

Tensor BackboneStage::forward(const Tensor& x, bool training) {
  Tensor y = silu(down_bn.forward(down.forward(x), training));
  Tensor z = use_pld ? pld_forward(y, pld, pld_config) : plain.forward(y);
  return silu(final_bn.forward(z, training));
}

void BackboneStage::register_into(ParamRegistry& reg, const std::string& prefix) const {
  down.register_into(reg, prefix + ".down");
  down_bn.register_into(reg, prefix + ".down_bn");
  if (use_pld)
    pld.register_into(reg, prefix + ".pld");
  else
    plain.register_into(reg, prefix + ".plain");
  final_bn.register_into(reg, prefix + ".final_bn");
}

Tensor FusionNode::forward(const Tensor& a, const Tensor& b, bool training) {
  Tensor cat = concat_channels({a, b});
  if (use_msdrf) return msdrf_forward(cat, msdrf, msdrf_config, training);
  return silu(plain_bn.forward(plain.forward(cat), training));
}

void FusionNode::register_into(ParamRegistry& reg, const std::string& prefix) const {
  if (use_msdrf) {
    msdrf.register_into(reg, prefix + ".msdrf");
  } else {
    plain.register_into(reg, prefix + ".plain");
    plain_bn.register_into(reg, prefix + ".plain_bn");
  }
}

MSGNet build_msgnet(const DetectorConfig& config, std::mt19937_64& rng) {
  config.validate();
  MSGNet net;
  net.config = config;

  if (config.use_sgie) {
    SceneDiscriminatorConfig sd;
    net.scene = SceneDiscriminator(sd, rng);
    EnhancerConfig ec;
    net.enhancer = EnhancerParams(ec, rng);
    net.prompt_bank = PromptBank(ec, rng);
    net.sgie_initialized = true;
  }

  Conv2dSpec s2;
  s2.stride_h = s2.stride_w = 2;
  s2.pad_h = s2.pad_w = 1;

  const auto& w = config.widths;
  net.stem = Conv2d(3, w[0], 3, 3, rng, s2);
  net.stem_bn = BatchNorm2d(w[0]);
  for (int stage = 0; stage < 4; ++stage) {
    BackboneStage st;
    st.down = Conv2d(w[stage], w[stage + 1], 3, 3, rng, s2);
    st.down_bn = BatchNorm2d(w[stage + 1]);
    st.use_pld = config.use_pld;
    if (st.use_pld) {
      st.pld_config = config.pld;
      st.pld_config.in_channels = w[stage + 1];
      st.pld_config.out_channels = w[stage + 1];
      st.pld = PLDParams(st.pld_config, rng);
    } else {
      st.plain = Conv2d::same(w[stage + 1], w[stage + 1], 3, rng);
    }
    st.final_bn = BatchNorm2d(w[stage + 1]);
    net.stages.push_back(std::move(st));
  }

  int64_t n = config.neck_channels;
  for (int lvl = 0; lvl < 3; ++lvl) {
    net.laterals.push_back(Conv2d(w[2 + lvl], n, 1, 1, rng, Conv2dSpec{}));
    net.lateral_bns.push_back(BatchNorm2d(n));
  }
  auto make_fusion = [&](FusionNode& node) {
    node.use_msdrf = config.use_msdrf;
    if (node.use_msdrf) {
      node.msdrf_config = config.msdrf;
      node.msdrf_config.in_channels = 2 * n;
      node.msdrf_config.out_channels = n;
      node.msdrf = MSDRFParams(node.msdrf_config, rng);
    } else {
      node.plain = Conv2d::same(2 * n, n, 3, rng);
      node.plain_bn = BatchNorm2d(n);
    }
  };
  make_fusion(net.td4);
  make_fusion(net.td3);
  make_fusion(net.bu4);
  make_fusion(net.bu5);
  net.down3 = Conv2d(n, n, 3, 3, rng, s2);
  net.down3_bn = BatchNorm2d(n);
  net.down4 = Conv2d(n, n, 3, 3, rng, s2);
  net.down4_bn = BatchNorm2d(n);

  net.cls_conv = Conv2d::same(n, n, 3, rng);
  net.cls_head = Conv2d(n, config.num_classes, 1, 1, rng, Conv2dSpec{});
  net.reg_conv = Conv2d::same(n, n, 3, rng);
  net.reg_head = Conv2d(n, 4, 1, 1, rng, Conv2dSpec{});
  return net;
}

std::vector<MSGNet::LevelOutput> MSGNet::forward(const Tensor& images, bool training) {
  const Shape& s = images.shape();
  check(s.size() == 4 && s[1] == 3, "MSGNet: expected (B, 3, H, W) input");
  check(s[2] % 32 == 0 && s[3] % 32 == 0, "MSGNet: spatial size must be a multiple of 32");

  Tensor x = images;
  if (config.use_sgie) {
    check(sgie_initialized, "MSGNet: SGIE enabled but not initialized");
    // frozen front end: no gradient flows into SGIE during detector training
    NoGradGuard ng;
    SceneEmbedding emb = scene.forward(x, false);
    x = enhance_image(x, enhancer, prompt_bank, emb);
  }

  x = silu(stem_bn.forward(stem.forward(x), training));
  std::vector<Tensor> feats;  // stage outputs at /4, /8, /16, /32
  for (auto& st : stages) {
    x = st.forward(x, training);
    feats.push_back(x);
  }

  Tensor c3 = silu(lateral_bns[0].forward(laterals[0].forward(feats[1]), training));
  Tensor c4 = silu(lateral_bns[1].forward(laterals[1].forward(feats[2]), training));
  Tensor c5 = silu(lateral_bns[2].forward(laterals[2].forward(feats[3]), training));

  Tensor p4_td = td4.forward(c4, upsample_nearest2x(c5), training);
  Tensor p3 = td3.forward(c3, upsample_nearest2x(p4_td), training);
  Tensor p4 = bu4.forward(p4_td, silu(down3_bn.forward(down3.forward(p3), training)), training);
  Tensor p5 = bu5.forward(c5, silu(down4_bn.forward(down4.forward(p4), training)), training);

  std::vector<LevelOutput> out;
  const Tensor* levels[3] = {&p3, &p4, &p5};
  for (int lvl = 0; lvl < 3; ++lvl) {
    LevelOutput lo;
    Tensor cls_f = silu(cls_conv.forward(*levels[lvl]));
    lo.cls_logits = cls_head.forward(cls_f);
    Tensor reg_f = silu(reg_conv.forward(*levels[lvl]));
    lo.reg_raw = reg_head.forward(reg_f);
    lo.stride = config.strides[lvl];
    out.push_back(std::move(lo));
  }
  return out;
}

void MSGNet::register_into(ParamRegistry& reg, const std::string& prefix) const {
  stem.register_into(reg, prefix + ".stem");
  stem_bn.register_into(reg, prefix + ".stem_bn");
  for (size_t i = 0; i < stages.size(); ++i)
    stages[i].register_into(reg, prefix + ".stage" + std::to_string(i));
  for (size_t i = 0; i < laterals.size(); ++i) {
    laterals[i].register_into(reg, prefix + ".lateral" + std::to_string(i));
    lateral_bns[i].register_into(reg, prefix + ".lateral_bn" + std::to_string(i));
  }
  td4.register_into(reg, prefix + ".td4");
  td3.register_into(reg, prefix + ".td3");
  bu4.register_into(reg, prefix + ".bu4");
  bu5.register_into(reg, prefix + ".bu5");
  down3.register_into(reg, prefix + ".down3");
  down3_bn.register_into(reg, prefix + ".down3_bn");
  down4.register_into(reg, prefix + ".down4");
  down4_bn.register_into(reg, prefix + ".down4_bn");
  cls_conv.register_into(reg, prefix + ".cls_conv");
  cls_head.register_into(reg, prefix + ".cls_head");
  reg_conv.register_into(reg, prefix + ".reg_conv");
  reg_head.register_into(reg, prefix + ".reg_head");
}

ParamRegistry MSGNet::full_registry() const {
  ParamRegistry reg;
  register_into(reg, "detector");
  if (sgie_initialized) {
    scene.register_into(reg, "scene");
    enhancer.register_into(reg, "enhancer");
    prompt_bank.register_into(reg, "bank");
  }
  return reg;
}

ParamRegistry MSGNet::trainable_registry() const {
  ParamRegistry reg;
  register_into(reg, "detector");
  return reg;
}

int64_t MSGNet::param_count() const {
  int64_t n = 0;
  for (const auto& [name, t] : full_registry().params) n += t.numel();
  return n;
}

int64_t pld_block_param_delta(int64_t channels, const PLDConfig& pld_template) {
  PLDConfig cfg = pld_template;
  cfg.in_channels = channels;
  cfg.out_channels = channels;
  std::mt19937_64 rng(0);
  PLDParams pld(cfg, rng);
  int64_t plain = channels * channels * 9 + channels;  // 3x3 conv + bias
  return pld.param_count() - plain;
}

std::vector<PositiveSample> assign_targets(
    const std::vector<std::vector<BoxAnnotation>>& annotations,
    const std::vector<LevelShape>& levels, const DetectorConfig& config) {
  std::vector<PositiveSample> out;
  for (size_t b = 0; b < annotations.size(); ++b) {
    for (size_t lvl = 0; lvl < levels.size(); ++lvl) {
      const LevelShape& ls = levels[lvl];
      for (int64_t i = 0; i < ls.h; ++i) {
        for (int64_t j = 0; j < ls.w; ++j) {
          double cx = (static_cast<double>(j) + 0.5) * ls.stride;
          double cy = (static_cast<double>(i) + 0.5) * ls.stride;
          int best = -1;
          double best_area = 0.0;
          for (size_t g = 0; g < annotations[b].size(); ++g) {
            const BoxAnnotation& box = annotations[b][g];
            double size = std::sqrt(box.area());
            size_t match_level = size < config.level_size_thresholds[0] ? 0
                                 : size < config.level_size_thresholds[1] ? 1
                                                                          : 2;
            if (match_level != lvl) continue;
            if (cx < box.x || cx > box.x + box.w || cy < box.y || cy > box.y + box.h) continue;
            if (best < 0 || box.area() < best_area) {
              best = static_cast<int>(g);
              best_area = box.area();
            }
          }
          if (best >= 0) {
            const BoxAnnotation& box = annotations[b][best];
            PositiveSample p;
            p.batch = static_cast<int64_t>(b);
            p.level = static_cast<int64_t>(lvl);
            p.i = i;
            p.j = j;
            p.category = static_cast<int>(box.category);
            p.l = cx - box.x;
            p.t = cy - box.y;
            p.r = box.x + box.w - cx;
            p.b = box.y + box.h - cy;
            out.push_back(p);
          }
        }
      }
    }
  }
  return out;
}

Tensor iou_loss(const Tensor& pred, const Tensor& target) {
  check(pred.shape() == target.shape() && pred.shape().size() == 2 && pred.dim(1) == 4,
        "iou_loss: expected matching (P, 4) tensors");
  int64_t p = pred.dim(0);
  check(p > 0, "iou_loss: empty positive set");

  auto pv = pred.data();
  auto tv = target.data();
  std::vector<double> value(1, 0.0);
  // cache per-row quantities for the backward pass
  auto iou_vals = std::make_shared<std::vector<double>>(p);
  double loss = 0.0;
  for (int64_t r = 0; r < p; ++r) {
    const double* a = pv.data() + r * 4;
    const double* g = tv.data() + r * 4;
    double iw = std::min(a[0], g[0]) + std::min(a[2], g[2]);
    double ih = std::min(a[1], g[1]) + std::min(a[3], g[3]);
    double inter = iw * ih;
    double area_a = (a[0] + a[2]) * (a[1] + a[3]);
    double area_g = (g[0] + g[2]) * (g[1] + g[3]);
    double uni = area_a + area_g - inter;
    double iou = uni > 0 ? inter / uni : 0.0;
    (*iou_vals)[r] = iou;
    loss += 1.0 - iou;
  }
  value[0] = loss / static_cast<double>(p);

  auto pn = pred.node();
  auto tn = target.node();
  auto node = std::make_shared<detail::Node>();
  node->shape = {1};
  node->value = std::move(value);
  if (detail::grad_mode() && pn->requires_grad) {
    node->requires_grad = true;
    node->parents = {pn, tn};
    node->backprop = [pn, tn, p, iou_vals](detail::Node& o) {
      double* pg = pn->grad_data();
      double scale = -o.grad[0] / static_cast<double>(p);  // d(1-iou)/d iou = -1
      for (int64_t r = 0; r < p; ++r) {
        const double* a = pn->value.data() + r * 4;
        const double* g = tn->value.data() + r * 4;
        double iw = std::min(a[0], g[0]) + std::min(a[2], g[2]);
        double ih = std::min(a[1], g[1]) + std::min(a[3], g[3]);
        double inter = iw * ih;
        double area_a = (a[0] + a[2]) * (a[1] + a[3]);
        double area_g = (g[0] + g[2]) * (g[1] + g[3]);
        double uni = area_a + area_g - inter;
        if (uni <= 0) continue;
        // d iou / d inter = (uni + inter) / uni^2 given uni = A + G - inter
        double d_inter = (uni + inter) / (uni * uni);
        double d_area_a = -inter / (uni * uni);
        for (int k = 0; k < 4; ++k) {
          // d inter / d a_k: only when a_k is the min on its axis
          double dk = 0.0;
          bool horizontal = (k == 0 || k == 2);
          double other = horizontal ? ih : iw;
          if (a[k] <= g[k]) dk += other;  // min picks the prediction side
          double darea;
          switch (k) {
            case 0: darea = a[1] + a[3]; break;
            case 1: darea = a[0] + a[2]; break;
            case 2: darea = a[1] + a[3]; break;
            default: darea = a[0] + a[2]; break;
          }
          double diou = d_inter * dk + d_area_a * darea;
          pg[r * 4 + k] += scale * diou;
        }
      }
    };
  }
  return Tensor(node);
}

TrainStepResult forward_train(MSGNet& model, const Tensor& images,
                              const std::vector<std::vector<BoxAnnotation>>& annotations) {
  const Shape& s = images.shape();
  check(static_cast<size_t>(s[0]) == annotations.size(),
        "forward_train: batch size does not match annotation count");
  check(s[0] > 0, "forward_train: empty batch");
  for (const auto& anns : annotations)
    for (const auto& box : anns)
      check(box.x >= 0 && box.y >= 0 && box.x + box.w <= static_cast<double>(s[3]) &&
                box.y + box.h <= static_cast<double>(s[2]) && box.w > 0 && box.h > 0,
            "forward_train: box outside image bounds");

  auto levels = model.forward(images, /*training=*/true);
  std::vector<LevelShape> shapes;
  for (const auto& lo : levels)
    shapes.push_back({lo.stride, lo.cls_logits.dim(2), lo.cls_logits.dim(3)});

  auto positives = assign_targets(annotations, shapes, model.config);
  int64_t num_pos = static_cast<int64_t>(positives.size());
  double norm = static_cast<double>(std::max<int64_t>(num_pos, 1));

  // classification: per-class BCE over every location, one-hot at positives
  Tensor cls_loss = Tensor::scalar(0.0);
  for (size_t lvl = 0; lvl < levels.size(); ++lvl) {
    Tensor targets = Tensor::zeros(levels[lvl].cls_logits.shape());
    auto tv = targets.data();
    const Shape& ls = levels[lvl].cls_logits.shape();
    for (const auto& pos : positives) {
      if (pos.level != static_cast<int64_t>(lvl)) continue;
      tv[((pos.batch * ls[1] + pos.category) * ls[2] + pos.i) * ls[3] + pos.j] = 1.0;
    }
    cls_loss = add(cls_loss, sum_all(bce_with_logits(levels[lvl].cls_logits, targets)));
  }
  cls_loss = mul_scalar(cls_loss, 1.0 / norm);

  // box regression: IoU loss over positives
  Tensor box_loss = Tensor::scalar(0.0);
  if (num_pos > 0) {
    std::vector<Tensor> pred_rows;
    std::vector<double> gt(num_pos * 4);
    for (size_t lvl = 0; lvl < levels.size(); ++lvl) {
      std::vector<SpatialIndex> idx;
      for (int64_t r = 0; r < num_pos; ++r) {
        if (positives[r].level != static_cast<int64_t>(lvl)) continue;
        idx.push_back({positives[r].batch, positives[r].i, positives[r].j});
        gt[r * 4 + 0] = positives[r].l;
        gt[r * 4 + 1] = positives[r].t;
        gt[r * 4 + 2] = positives[r].r;
        gt[r * 4 + 3] = positives[r].b;
      }
      if (idx.empty()) continue;
      Tensor raw = gather_positions(levels[lvl].reg_raw, idx);  // (Pl, 4)
      Tensor dist = mul_scalar(softplus(raw), static_cast<double>(levels[lvl].stride));
      pred_rows.push_back(dist);
    }
    // positives are ordered by level already (assign_targets iterates levels
    // outermost per batch; regroup ground truth to match the gathered order)
    std::vector<double> gt_ordered;
    gt_ordered.reserve(gt.size());
    for (size_t lvl = 0; lvl < levels.size(); ++lvl)
      for (int64_t r = 0; r < num_pos; ++r)
        if (positives[r].level == static_cast<int64_t>(lvl))
          for (int k = 0; k < 4; ++k) gt_ordered.push_back(gt[r * 4 + k]);

    Tensor pred_all = pred_rows.size() == 1
                          ? pred_rows[0]
                          : [&] {
                              // stack row blocks via concat on a 4-D view
                              std::vector<Tensor> as4;
                              for (auto& t : pred_rows)
                                as4.push_back(t.reshape({1, t.dim(0) * 4, 1, 1}));
                              Tensor cat = concat_channels(as4);
                              return cat.reshape({cat.dim(1) / 4, 4});
                            }();
    Tensor gt_t = Tensor::from_vector({num_pos, 4}, std::move(gt_ordered));
    box_loss = iou_loss(pred_all, gt_t);
  }

  Tensor total = add(mul_scalar(cls_loss, model.config.cls_loss_weight),
                     mul_scalar(box_loss, model.config.box_loss_weight));

  TrainStepResult result;
  result.total_loss = total;
  result.report.classification_loss = cls_loss.item();
  result.report.box_loss = box_loss.item();
  result.report.total = total.item();
  check(std::isfinite(result.report.total), "forward_train: non-finite loss");
  return result;
}

DetectionSet nms_per_class(DetectionSet candidates, double iou_threshold) {
  std::stable_sort(candidates.begin(), candidates.end(), [](const Detection& a, const Detection& b) {
    return a.score > b.score;
  });
  DetectionSet kept;
  std::vector<bool> suppressed(candidates.size(), false);
  for (size_t i = 0; i < candidates.size(); ++i) {
    if (suppressed[i]) continue;
    kept.push_back(candidates[i]);
    for (size_t j = i + 1; j < candidates.size(); ++j) {
      if (suppressed[j] || candidates[j].category != candidates[i].category) continue;
      double x0 = std::max(candidates[i].x, candidates[j].x);
      double y0 = std::max(candidates[i].y, candidates[j].y);
      double x1 = std::min(candidates[i].x + candidates[i].w, candidates[j].x + candidates[j].w);
      double y1 = std::min(candidates[i].y + candidates[i].h, candidates[j].y + candidates[j].h);
      double inter = std::max(0.0, x1 - x0) * std::max(0.0, y1 - y0);
      double uni = candidates[i].w * candidates[i].h + candidates[j].w * candidates[j].h - inter;
      double iou = uni > 0 ? inter / uni : 0.0;
      if (iou > iou_threshold) suppressed[j] = true;
    }
  }
  return kept;
}

DetectionSet detect(MSGNet& model, const Image& image, const DetectorConfig& config) {
  NoGradGuard ng;
  check(image.width > 0 && image.height > 0, "detect: empty image");
  int64_t size = config.input_size;
  Image resized = (image.width == size && image.height == size)
                      ? image
                      : resize_bilinear(image, size, size);
  Tensor input = image_to_tensor(resized);
  auto levels = model.forward(input, /*training=*/false);

  double sx = static_cast<double>(image.width) / static_cast<double>(size);
  double sy = static_cast<double>(image.height) / static_cast<double>(size);

  DetectionSet candidates;
  for (const auto& lo : levels) {
    const Shape& ls = lo.cls_logits.shape();
    check(ls[1] == config.num_classes, "detect: config num_classes mismatch with model head");
    auto logits = lo.cls_logits.data();
    auto reg = lo.reg_raw.data();
    int64_t h = ls[2], w = ls[3];
    for (int64_t i = 0; i < h; ++i)
      for (int64_t j = 0; j < w; ++j) {
        double cx = (static_cast<double>(j) + 0.5) * lo.stride;
        double cy = (static_cast<double>(i) + 0.5) * lo.stride;
        double dist[4];
        for (int k = 0; k < 4; ++k) {
          double raw = reg[((0 * 4 + k) * h + i) * w + j];
          double sp = raw > 30.0 ? raw : std::log1p(std::exp(raw));
          dist[k] = sp * static_cast<double>(lo.stride);
        }
        for (int64_t c = 0; c < config.num_classes; ++c) {
          double score = 1.0 / (1.0 + std::exp(-logits[((0 * ls[1] + c) * h + i) * w + j]));
          if (score < config.score_threshold) continue;
          Detection det;
          det.category = static_cast<Category>(c);
          det.score = score;
          double x0 = (cx - dist[0]) * sx;
          double y0 = (cy - dist[1]) * sy;
          double x1 = (cx + dist[2]) * sx;
          double y1 = (cy + dist[3]) * sy;
          x0 = std::clamp(x0, 0.0, static_cast<double>(image.width));
          y0 = std::clamp(y0, 0.0, static_cast<double>(image.height));
          x1 = std::clamp(x1, 0.0, static_cast<double>(image.width));
          y1 = std::clamp(y1, 0.0, static_cast<double>(image.height));
          if (x1 - x0 <= 0 || y1 - y0 <= 0) continue;
          det.x = x0;
          det.y = y0;
          det.w = x1 - x0;
          det.h = y1 - y0;
          candidates.push_back(det);
        }
      }
  }
  return nms_per_class(std::move(candidates), config.nms_iou_threshold);
}

std::vector<TrainLogEntry> train_detector(MSGNet& model,
                                          const std::vector<DetectorSample>& dataset,
                                          const DetectorTrainOptions& opts) {
  check(!dataset.empty(), "train_detector: empty dataset");
  int64_t size = model.config.input_size;

  // resize once up front; boxes scale with the image
  std::vector<Image> images;
  std::vector<std::vector<BoxAnnotation>> boxes;
  for (const auto& sample : dataset) {
    double sx = static_cast<double>(size) / sample.image.width;
    double sy = static_cast<double>(size) / sample.image.height;
    images.push_back(sample.image.width == size && sample.image.height == size
                         ? sample.image
                         : resize_bilinear(sample.image, size, size));
    std::vector<BoxAnnotation> scaled;
    for (auto b : sample.boxes) {
      b.x *= sx;
      b.w *= sx;
      b.y *= sy;
      b.h *= sy;
      scaled.push_back(b);
    }
    boxes.push_back(std::move(scaled));
  }

  ParamRegistry reg = model.trainable_registry();
  std::unique_ptr<SGD> sgd;
  std::unique_ptr<Adam> adam;
  if (opts.optimizer == "sgd")
    sgd = std::make_unique<SGD>(reg.param_tensors(), opts.lr, opts.sgd_momentum);
  else if (opts.optimizer == "adam")
    adam = std::make_unique<Adam>(reg.param_tensors(), opts.lr);
  else
    throw std::invalid_argument("train_detector: unknown optimizer '" + opts.optimizer + "'");

  std::mt19937_64 rng(opts.seed);
  std::vector<size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  size_t cursor = order.size();  // triggers reshuffle on first use

  std::vector<TrainLogEntry> log;
  for (int64_t step = 0; step < opts.steps; ++step) {
    std::vector<const Image*> batch_imgs;
    std::vector<std::vector<BoxAnnotation>> batch_boxes;
    for (int64_t k = 0; k < opts.batch_size; ++k) {
      if (cursor >= order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      size_t pick = order[cursor++];
      batch_imgs.push_back(&images[pick]);
      batch_boxes.push_back(boxes[pick]);
    }
    Tensor input = stack_images(batch_imgs);
    TrainStepResult res = forward_train(model, input, batch_boxes);
    if (sgd) sgd->zero_grad();
    if (adam) adam->zero_grad();
    res.total_loss.backward();
    if (sgd) sgd->step();
    if (adam) adam->step();
    if (step == 0 || (step + 1) % opts.log_every == 0 || step + 1 == opts.steps)
      log.push_back({step + 1, res.report});
  }
  return log;
}

}  // namespace msgnet
