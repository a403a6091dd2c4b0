#pragma once

// Dataset toolkit: annotation ingest/validation, distribution statistics,
// offset-limit derivation from aspect ratios, synthetic multi-environment
// degradation and deterministic splitting.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "msgnet/core_geom.hpp"
#include "msgnet/tensor.hpp"

namespace msgnet {

// ---- scene and category enumerations ----

enum class SceneClass { sunny, cloudy, foggy, rainy, light, hybrid };
inline constexpr int kNumSceneClasses = 6;
inline constexpr SceneClass kAllScenes[] = {SceneClass::sunny,  SceneClass::cloudy,
                                            SceneClass::foggy,  SceneClass::rainy,
                                            SceneClass::light,  SceneClass::hybrid};

enum class Category { cargo_ship, passenger_ship, buoy, container_ship };
inline constexpr int kNumCategories = 4;
inline constexpr Category kAllCategories[] = {Category::cargo_ship, Category::passenger_ship,
                                              Category::buoy, Category::container_ship};

std::string to_string(SceneClass s);
std::string to_string(Category c);
std::optional<SceneClass> scene_from_string(const std::string& s);
std::optional<Category> category_from_string(const std::string& s);

// ---- annotation records ----

struct BoxAnnotation {
  Category category = Category::cargo_ship;
  double x = 0, y = 0, w = 0, h = 0;  // pixels, top-left origin

  double area() const { return w * h; }
  double aspect_ratio() const { return w / h; }
  bool operator==(const BoxAnnotation&) const = default;
};

struct ImageRecord {
  std::string image;  // relative path
  int64_t width = 0, height = 0;
  SceneClass scene = SceneClass::sunny;
  std::vector<BoxAnnotation> objects;

  bool operator==(const ImageRecord&) const = default;
};

struct ParseResult {
  std::vector<ImageRecord> records;
  int64_t clipped_boxes = 0;  // boxes adjusted to fit image bounds
};

// Reads canonical JSON Lines annotations. Malformed lines, unknown category
// or scene values, and duplicate image paths raise std::runtime_error naming
// the offending line. Out-of-bounds boxes are clipped and counted.
ParseResult parse_annotations(const std::filesystem::path& path);
ParseResult parse_annotations_stream(std::istream& in, const std::string& origin);

// DarkLabel-style CSV converter (one row per object:
// image,width,height,scene,category,x,y,w,h). Not the canonical format.
ParseResult parse_darklabel_csv(const std::filesystem::path& path);

void write_annotations(const std::vector<ImageRecord>& records,
                       const std::filesystem::path& path);

// ---- statistics ----

struct StatsReport {
  std::map<Category, int64_t> category_counts;
  int64_t small_count = 0;   // area <  32^2
  int64_t medium_count = 0;  // area <  96^2
  int64_t large_count = 0;   // area >= 96^2
  std::map<SceneClass, int64_t> scene_counts;            // per image
  std::map<int64_t, int64_t> objects_per_image;          // object count -> images
  std::vector<double> relative_scales;  // box area / image area, sorted
  std::vector<double> aspect_ratios;    // w / h, sorted
  int64_t total_objects = 0;
  int64_t total_images = 0;

  bool operator==(const StatsReport&) const = default;
};

// Deterministic and permutation-invariant over records.
StatsReport compute_stats_report(const std::vector<ImageRecord>& records);
// Exact on counts for disjoint inputs: merge(report(A), report(B)) ==
// report(A ∪ B).
StatsReport merge_stats(const StatsReport& a, const StatsReport& b);

// Percentile of the sorted relative scales by the nearest-rank rule, as a
// percentage of image area. p in (0, 100].
double relative_scale_percentile(const StatsReport& r, double p);

// Writes the fixed CSV tables (categories.csv, scale_buckets.csv,
// relative_scale.csv, aspect_ratios.csv, objects_per_image.csv, scenes.csv)
// plus summary.json into out_dir.
void write_stats_report(const StatsReport& r, const std::filesystem::path& out_dir);
std::string stats_summary_json(const StatsReport& r);

// r_x = round(median aspect ratio) clamped to [1, 8]; r_y = 1;
// r = max(r_x, r_y). Median takes the lower middle for even counts.
// Throws std::invalid_argument when there are no annotations.
OffsetLimits compute_offset_limits(const std::vector<ImageRecord>& records);

// ---- images ----

// Planar CHW image, 3 channels, values in [0, 1].
struct Image {
  int64_t width = 0, height = 0;
  std::vector<double> data;  // size 3 * height * width

  Image() = default;
  Image(int64_t w, int64_t h) : width(w), height(h), data(static_cast<size_t>(3 * w * h), 0.0) {}

  double& at(int c, int64_t y, int64_t x) { return data[(c * height + y) * width + x]; }
  double at(int c, int64_t y, int64_t x) const { return data[(c * height + y) * width + x]; }
};

Image read_ppm(const std::filesystem::path& path);
void write_ppm(const Image& img, const std::filesystem::path& path);
Image resize_bilinear(const Image& img, int64_t new_width, int64_t new_height);

// (B, 3, H, W) batch from equally-sized images.
Tensor stack_images(const std::vector<const Image*>& images);
Tensor image_to_tensor(const Image& img);         // (1, 3, H, W)
Image tensor_to_image(const Tensor& t, int64_t batch_index = 0);

// ---- synthetic degradation ----

struct DegradationSpec {
  enum class Kind { fog, rain, lowlight, light_fog_hybrid };
  Kind kind = Kind::fog;

  // fog: I = J*t + A*(1-t), t = exp(-beta*d), d a linear vertical ramp from
  // depth_far at the top row to depth_near at the bottom row.
  double fog_beta = 1.0;
  double fog_atmospheric_light = 0.9;  // A in [0.7, 1.0]
  double fog_depth_near = 0.2;
  double fog_depth_far = 2.5;

  // rain: oriented blurred streaks alpha-blended over the image.
  int64_t rain_streaks = 120;
  int64_t rain_length = 9;
  double rain_angle_deg = 75.0;
  double rain_opacity = 0.35;  // in [0, 1]

  // lowlight: I = gain * J^gamma + N(0, sigma), clamped.
  double low_gamma = 1.8;   // >= 1
  double low_gain = 0.45;   // in (0, 1]
  double low_noise_sigma = 0.02;

  uint64_t seed = 0;

  void validate() const;
};

std::string to_string(DegradationSpec::Kind k);
std::optional<DegradationSpec::Kind> degradation_kind_from_string(const std::string& s);

// Deterministic given spec.seed; output stays in [0, 1].
Image apply_degradation(const Image& img, const DegradationSpec& spec);

// ---- splitting ----

struct SplitRatios {
  double train = 0.8, val = 0.1, test = 0.1;
};

struct DatasetSplit {
  std::vector<ImageRecord> train, val, test;
};

// Disjoint covering partition, stratified by scene class, deterministic for a
// given seed. Ratios must be positive and sum to 1.
DatasetSplit split_dataset(const std::vector<ImageRecord>& records, const SplitRatios& ratios,
                           uint64_t seed);

}  // namespace msgnet
