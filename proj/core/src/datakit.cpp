#include "msgnet/datakit.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace msgnet {

using nlohmann::json;

std::string to_string(SceneClass s) {
  switch (s) {
    case SceneClass::sunny: return "sunny";
    case SceneClass::cloudy: return "cloudy";
    case SceneClass::foggy: return "foggy";
    case SceneClass::rainy: return "rainy";
    case SceneClass::light: return "light";
    case SceneClass::hybrid: return "hybrid";
  }
  return "?";
}

std::string to_string(Category c) {
  switch (c) {
    case Category::cargo_ship: return "cargo_ship";
    case Category::passenger_ship: return "passenger_ship";
    case Category::buoy: return "buoy";
    case Category::container_ship: return "container_ship";
  }
  return "?";
}

std::optional<SceneClass> scene_from_string(const std::string& s) {
  for (SceneClass sc : kAllScenes)
    if (to_string(sc) == s) return sc;
  return std::nullopt;
}

std::optional<Category> category_from_string(const std::string& s) {
  for (Category c : kAllCategories)
    if (to_string(c) == s) return c;
  return std::nullopt;
}

namespace {

[[noreturn]] void fail_line(const std::string& origin, int64_t line, const std::string& msg) {
  throw std::runtime_error(origin + " line " + std::to_string(line) + ": " + msg);
}

// Clips a box to [0, width] x [0, height]. Returns true when clipping changed
// it; throws when nothing is left.
bool clip_box(BoxAnnotation& b, int64_t width, int64_t height, const std::string& origin,
              int64_t line) {
  double x0 = b.x, y0 = b.y, x1 = b.x + b.w, y1 = b.y + b.h;
  double cx0 = std::clamp(x0, 0.0, static_cast<double>(width));
  double cy0 = std::clamp(y0, 0.0, static_cast<double>(height));
  double cx1 = std::clamp(x1, 0.0, static_cast<double>(width));
  double cy1 = std::clamp(y1, 0.0, static_cast<double>(height));
  if (cx1 - cx0 <= 0.0 || cy1 - cy0 <= 0.0)
    fail_line(origin, line, "box [" + std::to_string(b.x) + ", " + std::to_string(b.y) + ", " +
                                std::to_string(b.w) + ", " + std::to_string(b.h) +
                                "] lies outside the image");
  bool changed = cx0 != x0 || cy0 != y0 || cx1 != x1 || cy1 != y1;
  b.x = cx0;
  b.y = cy0;
  b.w = cx1 - cx0;
  b.h = cy1 - cy0;
  return changed;
}

ImageRecord record_from_json(const json& j, const std::string& origin, int64_t line,
                             int64_t* clipped) {
  ImageRecord rec;
  if (!j.is_object()) fail_line(origin, line, "expected a JSON object");
  for (const char* key : {"image", "width", "height", "scene", "objects"})
    if (!j.contains(key)) fail_line(origin, line, std::string("missing field '") + key + "'");

  rec.image = j.at("image").get<std::string>();
  rec.width = j.at("width").get<int64_t>();
  rec.height = j.at("height").get<int64_t>();
  if (rec.width <= 0 || rec.height <= 0) fail_line(origin, line, "width/height must be positive");

  std::string scene = j.at("scene").get<std::string>();
  auto sc = scene_from_string(scene);
  if (!sc) fail_line(origin, line, "unknown scene '" + scene + "'");
  rec.scene = *sc;

  for (const auto& obj : j.at("objects")) {
    std::string cat = obj.at("category").get<std::string>();
    auto c = category_from_string(cat);
    if (!c) fail_line(origin, line, "unknown category '" + cat + "'");
    const auto& bb = obj.at("bbox_xywh");
    if (!bb.is_array() || bb.size() != 4) fail_line(origin, line, "bbox_xywh must have 4 values");
    BoxAnnotation box;
    box.category = *c;
    box.x = bb[0].get<double>();
    box.y = bb[1].get<double>();
    box.w = bb[2].get<double>();
    box.h = bb[3].get<double>();
    if (!(box.w > 0 && box.h > 0)) fail_line(origin, line, "box width/height must be positive");
    if (clip_box(box, rec.width, rec.height, origin, line)) ++(*clipped);
    rec.objects.push_back(box);
  }
  return rec;
}

}  // namespace

ParseResult parse_annotations_stream(std::istream& in, const std::string& origin) {
  ParseResult result;
  std::string line;
  int64_t line_no = 0;
  std::map<std::string, int64_t> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail_line(origin, line_no, std::string("malformed JSON: ") + e.what());
    }
    try {
      ImageRecord rec = record_from_json(j, origin, line_no, &result.clipped_boxes);
      auto [it, inserted] = seen.emplace(rec.image, line_no);
      if (!inserted)
        fail_line(origin, line_no,
                  "duplicate image path '" + rec.image + "' (first seen at line " +
                      std::to_string(it->second) + ")");
      result.records.push_back(std::move(rec));
    } catch (const json::exception& e) {
      fail_line(origin, line_no, std::string("bad record: ") + e.what());
    }
  }
  return result;
}

ParseResult parse_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open annotations file " + path.string());
  return parse_annotations_stream(in, path.filename().string());
}

ParseResult parse_darklabel_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open csv file " + path.string());
  std::string origin = path.filename().string();
  // rows: image,width,height,scene,category,x,y,w,h (header optional)
  std::map<std::string, size_t> index;
  ParseResult result;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.starts_with("image,")) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 9) fail_line(origin, line_no, "expected 9 comma-separated fields");
    auto sc = scene_from_string(cells[3]);
    if (!sc) fail_line(origin, line_no, "unknown scene '" + cells[3] + "'");
    auto cat = category_from_string(cells[4]);
    if (!cat) fail_line(origin, line_no, "unknown category '" + cells[4] + "'");
    BoxAnnotation box;
    box.category = *cat;
    try {
      box.x = std::stod(cells[5]);
      box.y = std::stod(cells[6]);
      box.w = std::stod(cells[7]);
      box.h = std::stod(cells[8]);
    } catch (const std::exception&) {
      fail_line(origin, line_no, "bad numeric box field");
    }
    auto it = index.find(cells[0]);
    if (it == index.end()) {
      ImageRecord rec;
      rec.image = cells[0];
      try {
        rec.width = std::stoll(cells[1]);
        rec.height = std::stoll(cells[2]);
      } catch (const std::exception&) {
        fail_line(origin, line_no, "bad numeric image size");
      }
      if (rec.width <= 0 || rec.height <= 0) fail_line(origin, line_no, "bad image size");
      rec.scene = *sc;
      index.emplace(cells[0], result.records.size());
      result.records.push_back(std::move(rec));
      it = index.find(cells[0]);
    }
    ImageRecord& rec = result.records[it->second];
    if (!(box.w > 0 && box.h > 0)) fail_line(origin, line_no, "box width/height must be positive");
    if (clip_box(box, rec.width, rec.height, origin, line_no)) ++result.clipped_boxes;
    rec.objects.push_back(box);
  }
  return result;
}

void write_annotations(const std::vector<ImageRecord>& records,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write annotations file " + path.string());
  for (const auto& rec : records) {
    json objs = json::array();
    for (const auto& b : rec.objects)
      objs.push_back({{"category", to_string(b.category)},
                      {"bbox_xywh", {b.x, b.y, b.w, b.h}}});
    json j = {{"image", rec.image},
              {"width", rec.width},
              {"height", rec.height},
              {"scene", to_string(rec.scene)},
              {"objects", objs}};
    out << j.dump() << "\n";
  }
}

StatsReport compute_stats_report(const std::vector<ImageRecord>& records) {
  StatsReport r;
  for (const auto& rec : records) {
    ++r.total_images;
    ++r.scene_counts[rec.scene];
    ++r.objects_per_image[static_cast<int64_t>(rec.objects.size())];
    double image_area = static_cast<double>(rec.width) * static_cast<double>(rec.height);
    for (const auto& box : rec.objects) {
      ++r.total_objects;
      ++r.category_counts[box.category];
      double area = box.area();
      if (area < 32.0 * 32.0)
        ++r.small_count;
      else if (area < 96.0 * 96.0)
        ++r.medium_count;
      else
        ++r.large_count;
      r.relative_scales.push_back(area / image_area);
      r.aspect_ratios.push_back(box.aspect_ratio());
    }
  }
  std::sort(r.relative_scales.begin(), r.relative_scales.end());
  std::sort(r.aspect_ratios.begin(), r.aspect_ratios.end());
  return r;
}

StatsReport merge_stats(const StatsReport& a, const StatsReport& b) {
  StatsReport r = a;
  for (const auto& [k, v] : b.category_counts) r.category_counts[k] += v;
  r.small_count += b.small_count;
  r.medium_count += b.medium_count;
  r.large_count += b.large_count;
  for (const auto& [k, v] : b.scene_counts) r.scene_counts[k] += v;
  for (const auto& [k, v] : b.objects_per_image) r.objects_per_image[k] += v;
  r.relative_scales.insert(r.relative_scales.end(), b.relative_scales.begin(),
                           b.relative_scales.end());
  r.aspect_ratios.insert(r.aspect_ratios.end(), b.aspect_ratios.begin(), b.aspect_ratios.end());
  std::sort(r.relative_scales.begin(), r.relative_scales.end());
  std::sort(r.aspect_ratios.begin(), r.aspect_ratios.end());
  r.total_objects += b.total_objects;
  r.total_images += b.total_images;
  return r;
}

double relative_scale_percentile(const StatsReport& r, double p) {
  check(p > 0 && p <= 100, "percentile must be in (0, 100]");
  if (r.relative_scales.empty()) return 0.0;
  size_t n = r.relative_scales.size();
  size_t rank = static_cast<size_t>(std::ceil(p / 100.0 * static_cast<double>(n)));
  rank = std::min(std::max<size_t>(rank, 1), n);
  return r.relative_scales[rank - 1] * 100.0;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

double pct(int64_t count, int64_t total) {
  return total == 0 ? 0.0 : 100.0 * static_cast<double>(count) / static_cast<double>(total);
}

constexpr double kAspectBinWidth = 0.5;
constexpr int kAspectBins = 17;  // [0, 8) in 0.5 steps plus an open last bin

std::vector<int64_t> aspect_histogram(const StatsReport& r) {
  std::vector<int64_t> bins(kAspectBins, 0);
  for (double a : r.aspect_ratios) {
    int b = static_cast<int>(a / kAspectBinWidth);
    if (b >= kAspectBins) b = kAspectBins - 1;
    if (b < 0) b = 0;
    ++bins[b];
  }
  return bins;
}

const double kPercentiles[] = {50, 75, 90, 95, 99, 99.5, 100};

}  // namespace

std::string stats_summary_json(const StatsReport& r) {
  json j;
  j["total_images"] = r.total_images;
  j["total_objects"] = r.total_objects;
  json cats = json::array();
  for (Category c : kAllCategories) {
    int64_t n = r.category_counts.count(c) ? r.category_counts.at(c) : 0;
    cats.push_back({{"category", to_string(c)}, {"count", n},
                    {"percentage", pct(n, r.total_objects)}});
  }
  j["categories"] = cats;
  j["scale_buckets"] = {
      {{"bucket", "small"}, {"count", r.small_count}, {"percentage", pct(r.small_count, r.total_objects)}},
      {{"bucket", "medium"}, {"count", r.medium_count}, {"percentage", pct(r.medium_count, r.total_objects)}},
      {{"bucket", "large"}, {"count", r.large_count}, {"percentage", pct(r.large_count, r.total_objects)}}};
  json rel = json::array();
  for (double p : kPercentiles)
    rel.push_back({{"percentile", p}, {"relative_scale_percent", relative_scale_percentile(r, p)}});
  j["relative_scale"] = rel;
  json aspect = json::array();
  auto bins = aspect_histogram(r);
  for (int b = 0; b < kAspectBins; ++b) {
    json e;
    e["bin_low"] = b * kAspectBinWidth;
    if (b + 1 < kAspectBins)
      e["bin_high"] = (b + 1) * kAspectBinWidth;
    else
      e["bin_high"] = nullptr;
    e["count"] = bins[b];
    e["percentage"] = pct(bins[b], r.total_objects);
    aspect.push_back(e);
  }
  j["aspect_ratios"] = aspect;
  json opi = json::array();
  for (const auto& [k, v] : r.objects_per_image)
    opi.push_back({{"objects", k}, {"images", v}, {"percentage", pct(v, r.total_images)}});
  j["objects_per_image"] = opi;
  json scenes = json::array();
  for (SceneClass s : kAllScenes) {
    int64_t n = r.scene_counts.count(s) ? r.scene_counts.at(s) : 0;
    scenes.push_back({{"scene", to_string(s)}, {"count", n}, {"percentage", pct(n, r.total_images)}});
  }
  j["scenes"] = scenes;
  return j.dump(2);
}

void write_stats_report(const StatsReport& r, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  auto open = [&](const char* name) {
    std::ofstream f(out_dir / name);
    if (!f) throw std::runtime_error(std::string("cannot write ") + name);
    return f;
  };
  {
    auto f = open("categories.csv");
    f << "category,count,percentage\n";
    for (Category c : kAllCategories) {
      int64_t n = r.category_counts.count(c) ? r.category_counts.at(c) : 0;
      f << to_string(c) << "," << n << "," << fmt(pct(n, r.total_objects)) << "\n";
    }
  }
  {
    auto f = open("scale_buckets.csv");
    f << "bucket,count,percentage\n";
    f << "small," << r.small_count << "," << fmt(pct(r.small_count, r.total_objects)) << "\n";
    f << "medium," << r.medium_count << "," << fmt(pct(r.medium_count, r.total_objects)) << "\n";
    f << "large," << r.large_count << "," << fmt(pct(r.large_count, r.total_objects)) << "\n";
  }
  {
    auto f = open("relative_scale.csv");
    f << "percentile,relative_scale_percent\n";
    for (double p : kPercentiles)
      f << fmt(p) << "," << fmt(relative_scale_percentile(r, p)) << "\n";
  }
  {
    auto f = open("aspect_ratios.csv");
    f << "bin_low,bin_high,count,percentage\n";
    auto bins = aspect_histogram(r);
    for (int b = 0; b < kAspectBins; ++b) {
      f << fmt(b * kAspectBinWidth) << ",";
      if (b + 1 < kAspectBins)
        f << fmt((b + 1) * kAspectBinWidth);
      else
        f << "inf";
      f << "," << bins[b] << "," << fmt(pct(bins[b], r.total_objects)) << "\n";
    }
  }
  {
    auto f = open("objects_per_image.csv");
    f << "objects,images,percentage\n";
    for (const auto& [k, v] : r.objects_per_image)
      f << k << "," << v << "," << fmt(pct(v, r.total_images)) << "\n";
  }
  {
    auto f = open("scenes.csv");
    f << "scene,count,percentage\n";
    for (SceneClass s : kAllScenes) {
      int64_t n = r.scene_counts.count(s) ? r.scene_counts.at(s) : 0;
      f << to_string(s) << "," << n << "," << fmt(pct(n, r.total_images)) << "\n";
    }
  }
  {
    auto f = open("summary.json");
    f << stats_summary_json(r) << "\n";
  }
}

OffsetLimits compute_offset_limits(const std::vector<ImageRecord>& records) {
  std::vector<double> ratios;
  for (const auto& rec : records)
    for (const auto& box : rec.objects) ratios.push_back(box.aspect_ratio());
  check(!ratios.empty(), "compute_offset_limits: no annotations");
  std::sort(ratios.begin(), ratios.end());
  size_t n = ratios.size();
  // lower of the two middles for even counts
  double median = ratios[(n - 1) / 2];
  int64_t rx = std::lround(median);
  rx = std::clamp<int64_t>(rx, 1, 8);
  OffsetLimits limits;
  limits.r_x = static_cast<double>(rx);
  limits.r_y = 1.0;
  limits.r = std::max(limits.r_x, limits.r_y);
  return limits;
}

// ---- images ----

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open image " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P6") throw std::runtime_error(path.string() + ": not a binary PPM (P6) file");
  auto next_token = [&]() -> int64_t {
    // skips whitespace and '#' comments
    while (true) {
      int ch = in.peek();
      if (ch == '#') {
        std::string comment;
        std::getline(in, comment);
      } else if (ch != EOF && std::isspace(static_cast<unsigned char>(ch))) {
        in.get();
      } else {
        break;
      }
    }
    int64_t v = -1;
    in >> v;
    return in ? v : -1;
  };
  int64_t w = next_token(), h = next_token(), maxval = next_token();
  if (w <= 0 || h <= 0 || maxval != 255)
    throw std::runtime_error(path.string() + ": unsupported PPM header");
  in.get();  // single whitespace after maxval
  std::vector<unsigned char> raw(static_cast<size_t>(w * h * 3));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) throw std::runtime_error(path.string() + ": truncated pixel data");
  Image img(w, h);
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(c, y, x) = raw[(y * w + x) * 3 + c] / 255.0;
  return img;
}

void write_ppm(const Image& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write image " + path.string());
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> raw(static_cast<size_t>(img.width * img.height * 3));
  for (int64_t y = 0; y < img.height; ++y)
    for (int64_t x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        double v = std::clamp(img.at(c, y, x), 0.0, 1.0);
        raw[(y * img.width + x) * 3 + c] = static_cast<unsigned char>(std::lround(v * 255.0));
      }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

Image resize_bilinear(const Image& img, int64_t new_width, int64_t new_height) {
  check(new_width > 0 && new_height > 0, "resize_bilinear: target size must be positive");
  Image out(new_width, new_height);
  double sx = static_cast<double>(img.width) / static_cast<double>(new_width);
  double sy = static_cast<double>(img.height) / static_cast<double>(new_height);
  for (int64_t y = 0; y < new_height; ++y)
    for (int64_t x = 0; x < new_width; ++x) {
      double src_x = (static_cast<double>(x) + 0.5) * sx - 0.5;
      double src_y = (static_cast<double>(y) + 0.5) * sy - 0.5;
      int64_t x0 = static_cast<int64_t>(std::floor(src_x));
      int64_t y0 = static_cast<int64_t>(std::floor(src_y));
      double fx = src_x - static_cast<double>(x0);
      double fy = src_y - static_cast<double>(y0);
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int dy = 0; dy <= 1; ++dy)
          for (int dx = 0; dx <= 1; ++dx) {
            int64_t xi = std::clamp<int64_t>(x0 + dx, 0, img.width - 1);
            int64_t yi = std::clamp<int64_t>(y0 + dy, 0, img.height - 1);
            double wgt = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy);
            acc += wgt * img.at(c, yi, xi);
          }
        out.at(c, y, x) = acc;
      }
    }
  return out;
}

Tensor stack_images(const std::vector<const Image*>& images) {
  check(!images.empty(), "stack_images: empty batch");
  int64_t h = images[0]->height, w = images[0]->width;
  int64_t b = static_cast<int64_t>(images.size());
  std::vector<double> data(static_cast<size_t>(b * 3 * h * w));
  for (int64_t i = 0; i < b; ++i) {
    check(images[i]->height == h && images[i]->width == w, "stack_images: size mismatch");
    std::copy(images[i]->data.begin(), images[i]->data.end(), data.begin() + i * 3 * h * w);
  }
  return Tensor::from_vector({b, 3, h, w}, std::move(data));
}

Tensor image_to_tensor(const Image& img) {
  std::vector<double> data = img.data;
  return Tensor::from_vector({1, 3, img.height, img.width}, std::move(data));
}

Image tensor_to_image(const Tensor& t, int64_t batch_index) {
  const Shape& s = t.shape();
  check(s.size() == 4 && s[1] == 3, "tensor_to_image expects (B, 3, H, W)");
  check(batch_index >= 0 && batch_index < s[0], "tensor_to_image: batch index out of range");
  Image img(s[3], s[2]);
  auto v = t.data();
  std::copy(v.begin() + batch_index * 3 * s[2] * s[3],
            v.begin() + (batch_index + 1) * 3 * s[2] * s[3], img.data.begin());
  return img;
}

// ---- degradation ----

std::string to_string(DegradationSpec::Kind k) {
  switch (k) {
    case DegradationSpec::Kind::fog: return "fog";
    case DegradationSpec::Kind::rain: return "rain";
    case DegradationSpec::Kind::lowlight: return "lowlight";
    case DegradationSpec::Kind::light_fog_hybrid: return "light_fog_hybrid";
  }
  return "?";
}

std::optional<DegradationSpec::Kind> degradation_kind_from_string(const std::string& s) {
  for (auto k : {DegradationSpec::Kind::fog, DegradationSpec::Kind::rain,
                 DegradationSpec::Kind::lowlight, DegradationSpec::Kind::light_fog_hybrid})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

void DegradationSpec::validate() const {
  auto bad = [](const std::string& what) {
    throw std::invalid_argument("DegradationSpec: " + what);
  };
  if (!(fog_beta >= 0)) bad("fog_beta must be >= 0");
  if (!(fog_atmospheric_light >= 0.7 && fog_atmospheric_light <= 1.0))
    bad("fog_atmospheric_light must be in [0.7, 1.0]");
  if (!(fog_depth_near >= 0 && fog_depth_far >= 0)) bad("fog depths must be >= 0");
  if (rain_streaks < 0) bad("rain_streaks must be >= 0");
  if (rain_length < 1) bad("rain_length must be >= 1");
  if (!(rain_opacity >= 0 && rain_opacity <= 1)) bad("rain_opacity must be in [0, 1]");
  if (!(low_gamma >= 1.0)) bad("low_gamma must be >= 1");
  if (!(low_gain > 0.0 && low_gain <= 1.0)) bad("low_gain must be in (0, 1]");
  if (!(low_noise_sigma >= 0.0)) bad("low_noise_sigma must be >= 0");
}

namespace {

void apply_fog(Image& img, const DegradationSpec& spec) {
  int64_t h = img.height, w = img.width;
  double denom = h > 1 ? static_cast<double>(h - 1) : 1.0;
  for (int64_t y = 0; y < h; ++y) {
    // depth grows toward the horizon at the top of the frame
    double d = spec.fog_depth_far +
               (spec.fog_depth_near - spec.fog_depth_far) * (static_cast<double>(y) / denom);
    double t = std::exp(-spec.fog_beta * d);
    double airlight = spec.fog_atmospheric_light * (1.0 - t);
    for (int64_t x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = img.at(c, y, x) * t + airlight;
  }
}

void apply_rain(Image& img, const DegradationSpec& spec, std::mt19937_64& rng) {
  if (spec.rain_streaks == 0) return;
  int64_t h = img.height, w = img.width;
  std::vector<double> mask(static_cast<size_t>(h * w), 0.0);
  std::uniform_real_distribution<double> ux(0.0, static_cast<double>(w));
  std::uniform_real_distribution<double> uy(0.0, static_cast<double>(h));
  std::normal_distribution<double> jitter(0.0, 3.0);
  for (int64_t s = 0; s < spec.rain_streaks; ++s) {
    double x = ux(rng), y = uy(rng);
    double ang = (spec.rain_angle_deg + jitter(rng)) * M_PI / 180.0;
    double dx = std::cos(ang), dy = std::sin(ang);
    for (int64_t step = 0; step < spec.rain_length; ++step) {
      int64_t xi = static_cast<int64_t>(std::lround(x + dx * static_cast<double>(step)));
      int64_t yi = static_cast<int64_t>(std::lround(y + dy * static_cast<double>(step)));
      if (xi >= 0 && xi < w && yi >= 0 && yi < h) mask[yi * w + xi] += 1.0;
    }
  }
  // soften streaks with a 3x3 box blur
  std::vector<double> blurred(mask.size(), 0.0);
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          int64_t yi = y + dy, xi = x + dx;
          if (yi >= 0 && yi < h && xi >= 0 && xi < w) acc += mask[yi * w + xi];
        }
      blurred[y * w + x] = std::min(1.0, acc / 9.0 * 2.0);
    }
  const double streak_brightness = 0.85;
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x) {
      double a = spec.rain_opacity * blurred[y * w + x];
      for (int c = 0; c < 3; ++c)
        img.at(c, y, x) = img.at(c, y, x) * (1.0 - a) + streak_brightness * a;
    }
}

void apply_lowlight(Image& img, const DegradationSpec& spec, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, 1.0);
  for (double& v : img.data) {
    double out = spec.low_gain * std::pow(v, spec.low_gamma);
    if (spec.low_noise_sigma > 0) out += spec.low_noise_sigma * noise(rng);
    v = out;
  }
}

}  // namespace

Image apply_degradation(const Image& img, const DegradationSpec& spec) {
  spec.validate();
  for (double v : img.data)
    check(v >= 0.0 && v <= 1.0, "apply_degradation: input image must be normalized to [0, 1]");
  Image out = img;
  std::mt19937_64 rng(spec.seed);
  switch (spec.kind) {
    case DegradationSpec::Kind::fog:
      apply_fog(out, spec);
      break;
    case DegradationSpec::Kind::rain:
      apply_rain(out, spec, rng);
      break;
    case DegradationSpec::Kind::lowlight:
      apply_lowlight(out, spec, rng);
      break;
    case DegradationSpec::Kind::light_fog_hybrid:
      apply_lowlight(out, spec, rng);
      for (double& v : out.data) v = std::clamp(v, 0.0, 1.0);
      apply_fog(out, spec);
      break;
  }
  for (double& v : out.data) v = std::clamp(v, 0.0, 1.0);
  return out;
}

DatasetSplit split_dataset(const std::vector<ImageRecord>& records, const SplitRatios& ratios,
                           uint64_t seed) {
  double sum = ratios.train + ratios.val + ratios.test;
  check(ratios.train > 0 && ratios.val > 0 && ratios.test > 0,
        "split_dataset: ratios must be positive");
  check(std::fabs(sum - 1.0) < 1e-9, "split_dataset: ratios must sum to 1");

  DatasetSplit out;
  std::mt19937_64 rng(seed);
  for (SceneClass scene : kAllScenes) {
    std::vector<size_t> members;
    for (size_t i = 0; i < records.size(); ++i)
      if (records[i].scene == scene) members.push_back(i);
    if (members.empty()) continue;
    std::shuffle(members.begin(), members.end(), rng);

    size_t n = members.size();
    double targets[3] = {ratios.train * n, ratios.val * n, ratios.test * n};
    size_t counts[3];
    double fracs[3];
    size_t assigned = 0;
    for (int k = 0; k < 3; ++k) {
      counts[k] = static_cast<size_t>(std::floor(targets[k]));
      fracs[k] = targets[k] - std::floor(targets[k]);
      assigned += counts[k];
    }
    // distribute the remainder by largest fractional part, ties to the
    // earlier split (train, val, test)
    while (assigned < n) {
      int best = 0;
      for (int k = 1; k < 3; ++k)
        if (fracs[k] > fracs[best]) best = k;
      ++counts[best];
      fracs[best] = -1.0;
      ++assigned;
    }
    size_t pos = 0;
    for (size_t i = 0; i < counts[0]; ++i) out.train.push_back(records[members[pos++]]);
    for (size_t i = 0; i < counts[1]; ++i) out.val.push_back(records[members[pos++]]);
    for (size_t i = 0; i < counts[2]; ++i) out.test.push_back(records[members[pos++]]);
  }
  return out;
}

}  // namespace msgnet
