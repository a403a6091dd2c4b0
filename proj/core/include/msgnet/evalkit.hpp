#pragma once

// Detection and restoration metrics: IoU, COCO-style mAP@[0.5:0.95] with
// greedy matching and 101-point interpolation, PSNR, and the module-ablation
// harness mirroring the experimental tables.

#include <map>
#include <string>
#include <vector>

#include "msgnet/detector.hpp"

namespace msgnet {

// Intersection over union of xywh boxes; throws on negative dimensions.
double iou_xywh(const double a[4], const double b[4]);
double iou_boxes(const BoxAnnotation& a, const BoxAnnotation& b);

using GroundTruthMap = std::map<std::string, std::vector<BoxAnnotation>>;
using PredictionMap = std::map<std::string, DetectionSet>;

// Greedy matching outcome for one (IoU threshold, class) pair: predictions in
// descending-score order flagged true/false positive, plus the GT count.
struct MatchResult {
  std::vector<std::pair<double, bool>> scored;  // (score, is_true_positive)
  int64_t gt_count = 0;
};

// Matching protocol: predictions sorted by descending score; each takes the
// highest-IoU not-yet-matched ground truth of its class in its image with
// IoU >= threshold.
MatchResult match_predictions(const PredictionMap& predictions, const GroundTruthMap& gt,
                              Category category, double iou_threshold);

struct EvalResult {
  double map_50_95 = 0.0;
  double map_50 = 0.0;
  std::map<Category, double> per_class_ap;  // averaged over thresholds
};

// 10 thresholds 0.50:0.05:0.95, 101-point interpolated AP per class, class
// mean over classes present in the ground truth, then threshold mean.
// Predictions for unknown images raise std::invalid_argument.
EvalResult evaluate_map(const PredictionMap& predictions, const GroundTruthMap& gt);

std::string metrics_json(const EvalResult& result);

// 10*log10(peak^2 / MSE); +infinity when the images are identical.
double psnr(const Image& a, const Image& b, double peak = 1.0);

// ---- ablation harness ----

struct AblationFlags {
  bool sgie = false;
  bool pld = false;
  bool msdrf = false;
};

struct AblationRow {
  AblationFlags flags;
  double map_50_95 = 0.0;
  double delta = 0.0;  // vs the all-off baseline row
};

struct AblationBudget {
  DetectorConfig base_config;     // flags overridden per row
  DetectorTrainOptions train;     // identical seed/budget for every row
  uint64_t build_seed = 7;
};

// The full 2^3 matrix in table order: baseline, single modules, pairs, all.
std::vector<AblationFlags> full_ablation_matrix();

// Trains and evaluates one detector per row on the dataset (train = eval set
// at desk scale). The matrix must contain the all-off baseline.
std::vector<AblationRow> run_ablation(const std::vector<AblationFlags>& matrix,
                                      const std::vector<DetectorSample>& dataset,
                                      const AblationBudget& budget);

// CSV with columns sgie,pld,msdrf,map_50_95,delta.
std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace msgnet
