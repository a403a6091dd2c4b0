#include "msgnet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace msgnet {

namespace {

struct Rgb {
  double r, g, b;
};

void fill_rect(Image& img, int64_t x0, int64_t y0, int64_t x1, int64_t y1, Rgb c) {
  x0 = std::clamp<int64_t>(x0, 0, img.width);
  x1 = std::clamp<int64_t>(x1, 0, img.width);
  y0 = std::clamp<int64_t>(y0, 0, img.height);
  y1 = std::clamp<int64_t>(y1, 0, img.height);
  for (int64_t y = y0; y < y1; ++y)
    for (int64_t x = x0; x < x1; ++x) {
      img.at(0, y, x) = c.r;
      img.at(1, y, x) = c.g;
      img.at(2, y, x) = c.b;
    }
}

void draw_vessel(Image& img, const BoxAnnotation& box, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> jitter(-0.04, 0.04);
  double jr = jitter(rng), jg = jitter(rng), jb = jitter(rng);
  auto tint = [&](Rgb c) {
    return Rgb{std::clamp(c.r + jr, 0.0, 1.0), std::clamp(c.g + jg, 0.0, 1.0),
               std::clamp(c.b + jb, 0.0, 1.0)};
  };
  int64_t x0 = static_cast<int64_t>(box.x), y0 = static_cast<int64_t>(box.y);
  int64_t x1 = static_cast<int64_t>(box.x + box.w), y1 = static_cast<int64_t>(box.y + box.h);
  int64_t hull_top = y0 + (y1 - y0) * 2 / 5;

  switch (box.category) {
    case Category::cargo_ship: {
      fill_rect(img, x0, hull_top, x1, y1, tint({0.34, 0.18, 0.12}));
      // low deck line and a small wheelhouse at the stern
      fill_rect(img, x0, hull_top, x1, hull_top + 1, tint({0.55, 0.45, 0.35}));
      fill_rect(img, x1 - (x1 - x0) / 5, y0, x1, hull_top, tint({0.72, 0.68, 0.6}));
      break;
    }
    case Category::passenger_ship: {
      fill_rect(img, x0, hull_top, x1, y1, tint({0.92, 0.92, 0.95}));
      fill_rect(img, x0 + (x1 - x0) / 6, y0, x1 - (x1 - x0) / 6, hull_top, tint({0.85, 0.88, 0.95}));
      int64_t stripe = (y1 + hull_top) / 2;
      fill_rect(img, x0, stripe, x1, stripe + 1, tint({0.15, 0.3, 0.6}));
      break;
    }
    case Category::buoy: {
      fill_rect(img, x0, y0, x1, y1, tint({0.85, 0.12, 0.1}));
      fill_rect(img, x0, y0, x1, y0 + std::max<int64_t>(1, (y1 - y0) / 3), tint({0.95, 0.8, 0.2}));
      break;
    }
    case Category::container_ship: {
      fill_rect(img, x0, hull_top, x1, y1, tint({0.16, 0.18, 0.24}));
      // container stacks in alternating colors
      const Rgb stack_colors[3] = {{0.2, 0.55, 0.3}, {0.25, 0.35, 0.7}, {0.8, 0.5, 0.2}};
      int64_t ncols = std::max<int64_t>(2, (x1 - x0) / 4);
      for (int64_t kcol = 0; kcol < ncols; ++kcol) {
        int64_t cx0 = x0 + kcol * (x1 - x0) / ncols;
        int64_t cx1 = x0 + (kcol + 1) * (x1 - x0) / ncols;
        fill_rect(img, cx0, y0, cx1 - 1, hull_top, tint(stack_colors[kcol % 3]));
      }
      break;
    }
  }
}

}  // namespace

SynthScene render_scene(SceneClass style, uint64_t seed, const SynthSceneOptions& opts) {
  check(opts.width >= 32 && opts.height >= 32, "render_scene: scene must be at least 32x32");
  check(opts.min_objects >= 0 && opts.max_objects >= opts.min_objects,
        "render_scene: bad object count range");
  std::mt19937_64 rng(seed);
  SynthScene scene;
  Image& img = scene.image;
  img = Image(opts.width, opts.height);
  int64_t w = opts.width, h = opts.height;

  std::uniform_real_distribution<double> u01(0.0, 1.0);
  bool overcast = style == SceneClass::cloudy;
  int64_t horizon = static_cast<int64_t>(h * (0.3 + 0.1 * u01(rng)));

  // sky gradient; sunny gets a blue sky and a sun disc, overcast a flat gray
  for (int64_t y = 0; y < horizon; ++y) {
    double f = static_cast<double>(y) / std::max<int64_t>(horizon - 1, 1);
    Rgb c = overcast ? Rgb{0.62 + 0.08 * f, 0.63 + 0.08 * f, 0.66 + 0.07 * f}
                     : Rgb{0.42 + 0.22 * f, 0.6 + 0.18 * f, 0.92 - 0.06 * f};
    fill_rect(img, 0, y, w, y + 1, c);
  }
  if (!overcast) {
    int64_t sx = static_cast<int64_t>(w * (0.15 + 0.7 * u01(rng)));
    int64_t sy = static_cast<int64_t>(horizon * 0.45);
    int64_t rad = std::max<int64_t>(2, w / 20);
    for (int64_t y = std::max<int64_t>(0, sy - rad); y < std::min(horizon, sy + rad); ++y)
      for (int64_t x = std::max<int64_t>(0, sx - rad); x < std::min(w, sx + rad); ++x) {
        double d2 = double((x - sx) * (x - sx) + (y - sy) * (y - sy)) / double(rad * rad);
        if (d2 < 1.0) {
          double a = 1.0 - d2;
          img.at(0, y, x) = std::min(1.0, img.at(0, y, x) + 0.5 * a);
          img.at(1, y, x) = std::min(1.0, img.at(1, y, x) + 0.45 * a);
          img.at(2, y, x) = std::min(1.0, img.at(2, y, x) + 0.2 * a);
        }
      }
  }

  // water with horizontal streak modulation
  double phase = u01(rng) * 6.28318;
  for (int64_t y = horizon; y < h; ++y) {
    double f = static_cast<double>(y - horizon) / std::max<int64_t>(h - horizon - 1, 1);
    Rgb base = overcast ? Rgb{0.35 + 0.07 * f, 0.39 + 0.07 * f, 0.43 + 0.06 * f}
                        : Rgb{0.13 + 0.08 * f, 0.3 + 0.1 * f, 0.45 + 0.08 * f};
    double streak = 0.03 * std::sin(phase + y * 1.7);
    fill_rect(img, 0, y, w, y + 1,
              {std::clamp(base.r + streak, 0.0, 1.0), std::clamp(base.g + streak, 0.0, 1.0),
               std::clamp(base.b + streak, 0.0, 1.0)});
  }

  // vessels on the water, spread left to right
  std::uniform_int_distribution<int> count_dist(opts.min_objects, opts.max_objects);
  int count = count_dist(rng);
  std::uniform_int_distribution<int> cat_dist(0, kNumCategories - 1);
  int64_t cursor = 1 + static_cast<int64_t>(u01(rng) * w / 8);
  for (int k = 0; k < count; ++k) {
    Category cat = kAllCategories[cat_dist(rng)];
    // sizes in pixels; every dimension is at least 9 so each object spans a
    // stride-8 grid cell center
    double bw, bh;
    switch (cat) {
      case Category::cargo_ship:
        bw = w * (0.28 + 0.12 * u01(rng));
        bh = std::max(9.0, bw / (3.0 + 1.2 * u01(rng)));
        break;
      case Category::passenger_ship:
        bw = w * (0.22 + 0.1 * u01(rng));
        bh = std::max(9.0, bw / (2.2 + 0.8 * u01(rng)));
        break;
      case Category::buoy:
        bw = std::max(9.0, w * (0.14 + 0.04 * u01(rng)));
        bh = std::max(9.0, bw / (1.0 + 0.4 * u01(rng)));
        break;
      case Category::container_ship:
      default:
        bw = w * (0.3 + 0.14 * u01(rng));
        bh = std::max(10.0, bw / (3.2 + 1.0 * u01(rng)));
        break;
    }
    bw = std::min(bw, static_cast<double>(w) * 0.45);
    int64_t iw = static_cast<int64_t>(bw), ih = static_cast<int64_t>(bh);
    if (cursor + iw >= w - 1) cursor = 1 + static_cast<int64_t>(u01(rng) * 3);
    int64_t ymin = horizon + 1;
    int64_t ymax = h - ih - 1;
    if (ymax <= ymin) continue;
    std::uniform_int_distribution<int64_t> ypos(ymin, ymax);
    BoxAnnotation box;
    box.category = cat;
    box.x = static_cast<double>(cursor);
    box.y = static_cast<double>(ypos(rng));
    box.w = static_cast<double>(iw);
    box.h = static_cast<double>(ih);
    draw_vessel(img, box, rng);
    scene.objects.push_back(box);
    cursor += iw + 2 + static_cast<int64_t>(u01(rng) * w / 10);
  }
  return scene;
}

DegradationSpec degradation_for_scene(SceneClass scene, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  DegradationSpec spec;
  spec.seed = rng();
  switch (scene) {
    case SceneClass::sunny:
    case SceneClass::cloudy:
      // clean: identity fog
      spec.kind = DegradationSpec::Kind::fog;
      spec.fog_beta = 0.0;
      break;
    case SceneClass::foggy:
      spec.kind = DegradationSpec::Kind::fog;
      spec.fog_beta = 0.8 + 0.8 * u01(rng);
      spec.fog_atmospheric_light = 0.85 + 0.15 * u01(rng);
      spec.fog_depth_near = 0.2;
      spec.fog_depth_far = 1.5 + 1.0 * u01(rng);
      break;
    case SceneClass::rainy:
      spec.kind = DegradationSpec::Kind::rain;
      spec.rain_streaks = 80 + static_cast<int64_t>(80 * u01(rng));
      spec.rain_length = 6 + static_cast<int64_t>(5 * u01(rng));
      spec.rain_angle_deg = 65.0 + 15.0 * u01(rng);
      spec.rain_opacity = 0.3 + 0.2 * u01(rng);
      break;
    case SceneClass::light:
      spec.kind = DegradationSpec::Kind::lowlight;
      spec.low_gamma = 1.6 + 0.6 * u01(rng);
      spec.low_gain = 0.3 + 0.2 * u01(rng);
      spec.low_noise_sigma = 0.01 + 0.02 * u01(rng);
      break;
    case SceneClass::hybrid:
      spec.kind = DegradationSpec::Kind::light_fog_hybrid;
      spec.low_gamma = 1.3 + 0.4 * u01(rng);
      spec.low_gain = 0.5 + 0.2 * u01(rng);
      spec.low_noise_sigma = 0.01 + 0.01 * u01(rng);
      spec.fog_beta = 0.5 + 0.4 * u01(rng);
      spec.fog_atmospheric_light = 0.8 + 0.1 * u01(rng);
      spec.fog_depth_near = 0.2;
      spec.fog_depth_far = 1.2 + 0.8 * u01(rng);
      break;
  }
  return spec;
}

Image synthesize_scene_image(SceneClass scene, uint64_t seed, const SynthSceneOptions& opts,
                             std::vector<BoxAnnotation>* objects) {
  // sunny and hybrid/foggy etc. share the sunny base palette; cloudy and
  // rainy use the overcast one
  SceneClass style = (scene == SceneClass::cloudy || scene == SceneClass::rainy)
                         ? SceneClass::cloudy
                         : SceneClass::sunny;
  SynthScene s = render_scene(style, seed, opts);
  if (objects) *objects = s.objects;
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  DegradationSpec spec = degradation_for_scene(scene, rng);
  return apply_degradation(s.image, spec);
}

SynthDataset make_synthetic_dataset(const SynthDatasetOptions& opts) {
  SynthDataset ds;
  SynthSceneOptions sopts;
  sopts.width = opts.width;
  sopts.height = opts.height;
  sopts.min_objects = opts.min_objects;
  sopts.max_objects = opts.max_objects;
  for (int64_t i = 0; i < opts.count; ++i) {
    SceneClass scene =
        opts.mixed_scenes ? kAllScenes[i % kNumSceneClasses] : SceneClass::sunny;
    uint64_t seed = opts.seed * 1000003ull + static_cast<uint64_t>(i);
    ImageRecord rec;
    std::vector<BoxAnnotation> boxes;
    Image img = synthesize_scene_image(scene, seed, sopts, &boxes);
    char name[64];
    std::snprintf(name, sizeof(name), "img_%05lld.ppm", static_cast<long long>(i));
    rec.image = name;
    rec.width = opts.width;
    rec.height = opts.height;
    rec.scene = scene;
    rec.objects = std::move(boxes);
    ds.images.push_back(std::move(img));
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

void write_synthetic_dataset(const SynthDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (size_t i = 0; i < ds.images.size(); ++i)
    write_ppm(ds.images[i], dir / ds.records[i].image);
  write_annotations(ds.records, dir / "annotations.jsonl");
}

}  // namespace msgnet
