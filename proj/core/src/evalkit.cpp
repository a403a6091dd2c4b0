#include "msgnet/evalkit.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace msgnet {

double iou_xywh(const double a[4], const double b[4]) {
  check(a[2] >= 0 && a[3] >= 0 && b[2] >= 0 && b[3] >= 0, "iou: negative box dimensions");
  double x0 = std::max(a[0], b[0]);
  double y0 = std::max(a[1], b[1]);
  double x1 = std::min(a[0] + a[2], b[0] + b[2]);
  double y1 = std::min(a[1] + a[3], b[1] + b[3]);
  double inter = std::max(0.0, x1 - x0) * std::max(0.0, y1 - y0);
  double uni = a[2] * a[3] + b[2] * b[3] - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

double iou_boxes(const BoxAnnotation& a, const BoxAnnotation& b) {
  double av[4] = {a.x, a.y, a.w, a.h};
  double bv[4] = {b.x, b.y, b.w, b.h};
  return iou_xywh(av, bv);
}

MatchResult match_predictions(const PredictionMap& predictions, const GroundTruthMap& gt,
                              Category category, double iou_threshold) {
  MatchResult result;
  for (const auto& [image, boxes] : gt)
    for (const auto& box : boxes)
      if (box.category == category) ++result.gt_count;

  // flatten predictions of this class: (score, image, det) sorted by
  // descending score; ties keep map order (image name, then insertion)
  struct Entry {
    double score;
    const std::string* image;
    const Detection* det;
  };
  std::vector<Entry> entries;
  for (const auto& [image, dets] : predictions) {
    check(gt.count(image) > 0, "evaluate_map: prediction for unknown image '" + image + "'");
    for (const auto& det : dets)
      if (det.category == category) entries.push_back({det.score, &image, &det});
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& a, const Entry& b) { return a.score > b.score; });

  std::map<std::string, std::vector<bool>> taken;
  for (const auto& e : entries) {
    const auto& boxes = gt.at(*e.image);
    auto& used = taken[*e.image];
    used.resize(boxes.size(), false);
    int best = -1;
    double best_iou = 0.0;
    for (size_t g = 0; g < boxes.size(); ++g) {
      if (boxes[g].category != category || used[g]) continue;
      BoxAnnotation pb;
      pb.x = e.det->x;
      pb.y = e.det->y;
      pb.w = e.det->w;
      pb.h = e.det->h;
      double v = iou_boxes(pb, boxes[g]);
      if (v >= iou_threshold && v > best_iou) {
        best = static_cast<int>(g);
        best_iou = v;
      }
    }
    bool tp = best >= 0;
    if (tp) taken[*e.image][best] = true;
    result.scored.emplace_back(e.score, tp);
  }
  return result;
}

namespace {

// 101-point interpolated average precision from a match result.
double average_precision(const MatchResult& m) {
  if (m.gt_count == 0) return 0.0;
  // cumulative precision/recall along the score-ordered list
  std::vector<double> precision, recall;
  int64_t tp = 0, fp = 0;
  for (const auto& [score, is_tp] : m.scored) {
    if (is_tp)
      ++tp;
    else
      ++fp;
    precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(m.gt_count));
  }
  double ap = 0.0;
  for (int k = 0; k <= 100; ++k) {
    double r = static_cast<double>(k) / 100.0;
    double best = 0.0;
    for (size_t i = 0; i < precision.size(); ++i)
      if (recall[i] >= r) best = std::max(best, precision[i]);
    ap += best;
  }
  return ap / 101.0;
}

}  // namespace

EvalResult evaluate_map(const PredictionMap& predictions, const GroundTruthMap& gt) {
  EvalResult result;
  std::vector<Category> present;
  for (Category c : kAllCategories) {
    bool found = false;
    for (const auto& [image, boxes] : gt)
      for (const auto& box : boxes)
        if (box.category == c) found = true;
    if (found) present.push_back(c);
  }
  if (present.empty()) return result;

  std::map<Category, double> ap_sum;
  double map_sum = 0.0;
  for (int t = 0; t < 10; ++t) {
    double threshold = 0.5 + 0.05 * t;
    double class_sum = 0.0;
    for (Category c : present) {
      double ap = average_precision(match_predictions(predictions, gt, c, threshold));
      ap_sum[c] += ap;
      class_sum += ap;
    }
    double map_t = class_sum / static_cast<double>(present.size());
    if (t == 0) result.map_50 = map_t;
    map_sum += map_t;
  }
  result.map_50_95 = map_sum / 10.0;
  for (Category c : present) result.per_class_ap[c] = ap_sum[c] / 10.0;
  return result;
}

std::string metrics_json(const EvalResult& result) {
  nlohmann::json j;
  j["map_50_95"] = result.map_50_95;
  j["map_50"] = result.map_50;
  nlohmann::json per_class = nlohmann::json::object();
  for (const auto& [cat, ap] : result.per_class_ap) per_class[to_string(cat)] = ap;
  j["per_class_ap"] = per_class;
  return j.dump(2);
}

double psnr(const Image& a, const Image& b, double peak) {
  check(a.width == b.width && a.height == b.height && a.data.size() == b.data.size(),
        "psnr: image shapes differ");
  check(peak > 0, "psnr: peak must be positive");
  double mse = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    double d = a.data[i] - b.data[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.data.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

std::vector<AblationFlags> full_ablation_matrix() {
  return {
      {false, false, false},  // baseline
      {true, false, false},   // + SGIE
      {false, true, false},   // + PLD-Conv
      {false, false, true},   // + MS-DRF
      {true, false, true},    // SGIE + MS-DRF
      {true, true, false},    // SGIE + PLD-Conv
      {false, true, true},    // PLD-Conv + MS-DRF
      {true, true, true},     // all three
  };
}

std::vector<AblationRow> run_ablation(const std::vector<AblationFlags>& matrix,
                                      const std::vector<DetectorSample>& dataset,
                                      const AblationBudget& budget) {
  check(!matrix.empty(), "run_ablation: empty matrix");
  bool has_baseline = false;
  for (const auto& flags : matrix)
    if (!flags.sgie && !flags.pld && !flags.msdrf) has_baseline = true;
  check(has_baseline, "run_ablation: matrix must include the all-off baseline row");
  check(!dataset.empty(), "run_ablation: empty dataset");

  GroundTruthMap gt;
  for (size_t i = 0; i < dataset.size(); ++i)
    gt["sample_" + std::to_string(i)] = dataset[i].boxes;

  std::vector<AblationRow> rows;
  double baseline_value = 0.0;
  bool baseline_seen = false;
  for (const auto& flags : matrix) {
    DetectorConfig cfg = budget.base_config;
    cfg.use_sgie = flags.sgie;
    cfg.use_pld = flags.pld;
    cfg.use_msdrf = flags.msdrf;
    std::mt19937_64 rng(budget.build_seed);
    MSGNet model = build_msgnet(cfg, rng);
    train_detector(model, dataset, budget.train);

    PredictionMap predictions;
    for (size_t i = 0; i < dataset.size(); ++i)
      predictions["sample_" + std::to_string(i)] = detect(model, dataset[i].image, cfg);
    EvalResult eval = evaluate_map(predictions, gt);

    AblationRow row;
    row.flags = flags;
    row.map_50_95 = eval.map_50_95;
    if (!flags.sgie && !flags.pld && !flags.msdrf) {
      baseline_value = row.map_50_95;
      baseline_seen = true;
    }
    rows.push_back(row);
  }
  check(baseline_seen, "run_ablation: baseline row did not run");
  for (auto& row : rows) row.delta = row.map_50_95 - baseline_value;
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << "sgie,pld,msdrf,map_50_95,delta\n";
  char buf[128];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%d,%.6f,%.6f\n", row.flags.sgie ? 1 : 0,
                  row.flags.pld ? 1 : 0, row.flags.msdrf ? 1 : 0, row.map_50_95, row.delta);
    out << buf;
  }
  return out.str();
}

}  // namespace msgnet
