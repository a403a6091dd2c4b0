// msgnet command-line tool: dataset analysis, synthetic degradation, staged
// training (scene / enhancer / detector), evaluation and module ablation.
//
// One declarative JSON config drives every subcommand; any config key can be
// overridden on the command line with --set dotted.key=value. Each run writes
// a reproducibility manifest (config hash, seed, version) into its output
// directory.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "msgnet/checkpoint.hpp"
#include "msgnet/datakit.hpp"
#include "msgnet/detector.hpp"
#include "msgnet/evalkit.hpp"
#include "msgnet/sgie.hpp"
#include "msgnet/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace msgnet;

namespace {

constexpr const char* kVersion = "msgnet 0.1.0";

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json default_config() {
  return json{
      {"out_dir", "out"},
      {"detector",
       {{"num_classes", 4},
        {"input_size", 320},
        {"widths", {16, 24, 32, 48, 64}},
        {"strides", {8, 16, 32}},
        {"neck_channels", 32},
        {"use_sgie", false},
        {"use_pld", true},
        {"use_msdrf", true},
        {"score_threshold", 0.25},
        {"nms_iou_threshold", 0.5},
        {"cls_loss_weight", 1.0},
        {"box_loss_weight", 2.0},
        {"level_size_thresholds", {32.0, 96.0}},
        {"pld",
         {{"kernel_x", 3},
          {"kernel_y", 3},
          {"dilation_x", 2},
          {"limits", {{"r_x", 4.0}, {"r_y", 1.0}, {"r", 4.0}}}}},
        {"msdrf", {{"dilation_rates", {1, 3, 5}}, {"compressed_channels", 0}}}}},
      {"train",
       {{"optimizer", "sgd"},
        {"lr", 1e-4},
        {"momentum", 0.9},
        {"batch_size", 16},
        {"epochs", 100},
        {"steps", 0},
        {"log_every", 50}}},
      {"scene",
       {{"base_width", 16},
        {"embed_dim", 512},
        {"epochs", 12},
        {"batch_size", 16},
        {"lr", 1e-3},
        {"holdout_fraction", 0.2}}},
      {"enhancer",
       {{"base_width", 12},
        {"prompts", 5},
        {"steps", 400},
        {"batch_size", 4},
        {"lr", 2e-3},
        {"val_fraction", 0.2},
        {"kind", "fog"}}},
      {"degrade",
       {{"kind", "fog"},
        {"per_scene", false},
        {"fog_beta", 1.0},
        {"fog_atmospheric_light", 0.9},
        {"fog_depth_near", 0.2},
        {"fog_depth_far", 2.5},
        {"rain_streaks", 120},
        {"rain_length", 9},
        {"rain_angle_deg", 75.0},
        {"rain_opacity", 0.35},
        {"low_gamma", 1.8},
        {"low_gain", 0.45},
        {"low_noise_sigma", 0.02}}},
      {"split", {{"train", 0.8}, {"val", 0.1}, {"test", 0.1}}},
  };
}

void merge_patch(json& base, const json& patch) {
  if (!patch.is_object()) {
    base = patch;
    return;
  }
  if (!base.is_object()) base = json::object();
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    if (it->is_object() && base.contains(it.key()))
      merge_patch(base[it.key()], *it);
    else
      base[it.key()] = *it;
  }
}

const json* find_path(const json& tree, const std::string& dotted) {
  const json* cur = &tree;
  size_t start = 0;
  while (start <= dotted.size()) {
    size_t dot = dotted.find('.', start);
    std::string key = dotted.substr(start, dot == std::string::npos ? dot : dot - start);
    if (!cur->is_object() || !cur->contains(key)) return nullptr;
    cur = &(*cur)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return cur;
}

void set_path(json& tree, const std::string& dotted, const json& value) {
  json* cur = &tree;
  size_t start = 0;
  while (true) {
    size_t dot = dotted.find('.', start);
    std::string key = dotted.substr(start, dot == std::string::npos ? dot : dot - start);
    if (key.empty()) throw ConfigError("invalid config path '" + dotted + "'");
    if (dot == std::string::npos) {
      (*cur)[key] = value;
      return;
    }
    cur = &(*cur)[key];
    start = dot + 1;
  }
}

struct RunConfig {
  json tree;

  template <typename T>
  T get(const std::string& path) const {
    const json* j = find_path(tree, path);
    if (!j) throw ConfigError("missing config field '" + path + "'");
    try {
      return j->get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config field '" + path + "' has the wrong type");
    }
  }

  template <typename T>
  T get_or(const std::string& path, T fallback) const {
    const json* j = find_path(tree, path);
    if (!j || j->is_null()) return fallback;
    try {
      return j->get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config field '" + path + "' has the wrong type");
    }
  }

  uint64_t seed() const {
    const json* j = find_path(tree, "seed");
    if (!j || j->is_null()) throw ConfigError("missing config field 'seed'");
    return j->get<uint64_t>();
  }

  std::string hash_of(const std::string& subtree) const {
    const json* j = find_path(tree, subtree);
    return fingerprint(j ? j->dump() : "{}");
  }
};

DetectorConfig detector_config_from(const RunConfig& cfg) {
  DetectorConfig dc;
  dc.num_classes = cfg.get_or<int64_t>("detector.num_classes", dc.num_classes);
  dc.input_size = cfg.get_or<int64_t>("detector.input_size", dc.input_size);
  dc.widths = cfg.get_or<std::vector<int64_t>>("detector.widths", dc.widths);
  dc.strides = cfg.get_or<std::vector<int64_t>>("detector.strides", dc.strides);
  dc.neck_channels = cfg.get_or<int64_t>("detector.neck_channels", dc.neck_channels);
  dc.use_sgie = cfg.get_or<bool>("detector.use_sgie", dc.use_sgie);
  dc.use_pld = cfg.get_or<bool>("detector.use_pld", dc.use_pld);
  dc.use_msdrf = cfg.get_or<bool>("detector.use_msdrf", dc.use_msdrf);
  dc.score_threshold = cfg.get_or<double>("detector.score_threshold", dc.score_threshold);
  dc.nms_iou_threshold = cfg.get_or<double>("detector.nms_iou_threshold", dc.nms_iou_threshold);
  dc.cls_loss_weight = cfg.get_or<double>("detector.cls_loss_weight", dc.cls_loss_weight);
  dc.box_loss_weight = cfg.get_or<double>("detector.box_loss_weight", dc.box_loss_weight);
  dc.level_size_thresholds =
      cfg.get_or<std::vector<double>>("detector.level_size_thresholds", dc.level_size_thresholds);
  dc.pld.kernel_x = cfg.get_or<int64_t>("detector.pld.kernel_x", 3);
  dc.pld.kernel_y = cfg.get_or<int64_t>("detector.pld.kernel_y", 3);
  dc.pld.dilation_x = cfg.get_or<int64_t>("detector.pld.dilation_x", 2);
  dc.pld.limits.r_x = cfg.get_or<double>("detector.pld.limits.r_x", 4.0);
  dc.pld.limits.r_y = cfg.get_or<double>("detector.pld.limits.r_y", 1.0);
  dc.pld.limits.r = cfg.get_or<double>("detector.pld.limits.r", 4.0);
  dc.msdrf.dilation_rates =
      cfg.get_or<std::vector<int64_t>>("detector.msdrf.dilation_rates", {1, 3, 5});
  dc.msdrf.compressed_channels = cfg.get_or<int64_t>("detector.msdrf.compressed_channels", 0);
  try {
    dc.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid detector config: ") + e.what());
  }
  return dc;
}

DegradationSpec degradation_from(const RunConfig& cfg, uint64_t seed) {
  DegradationSpec spec;
  std::string kind = cfg.get_or<std::string>("degrade.kind", "fog");
  auto k = degradation_kind_from_string(kind);
  if (!k) throw ConfigError("config field 'degrade.kind' has unknown value '" + kind + "'");
  spec.kind = *k;
  spec.fog_beta = cfg.get_or<double>("degrade.fog_beta", spec.fog_beta);
  spec.fog_atmospheric_light =
      cfg.get_or<double>("degrade.fog_atmospheric_light", spec.fog_atmospheric_light);
  spec.fog_depth_near = cfg.get_or<double>("degrade.fog_depth_near", spec.fog_depth_near);
  spec.fog_depth_far = cfg.get_or<double>("degrade.fog_depth_far", spec.fog_depth_far);
  spec.rain_streaks = cfg.get_or<int64_t>("degrade.rain_streaks", spec.rain_streaks);
  spec.rain_length = cfg.get_or<int64_t>("degrade.rain_length", spec.rain_length);
  spec.rain_angle_deg = cfg.get_or<double>("degrade.rain_angle_deg", spec.rain_angle_deg);
  spec.rain_opacity = cfg.get_or<double>("degrade.rain_opacity", spec.rain_opacity);
  spec.low_gamma = cfg.get_or<double>("degrade.low_gamma", spec.low_gamma);
  spec.low_gain = cfg.get_or<double>("degrade.low_gain", spec.low_gain);
  spec.low_noise_sigma = cfg.get_or<double>("degrade.low_noise_sigma", spec.low_noise_sigma);
  spec.seed = seed;
  try {
    spec.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid degrade config: ") + e.what());
  }
  return spec;
}

void write_manifest(const fs::path& out_dir, const std::string& command, const RunConfig& cfg) {
  fs::create_directories(out_dir);
  json manifest;
  manifest["command"] = command;
  manifest["seed"] = cfg.seed();
  manifest["config_hash"] = fingerprint(cfg.tree.dump());
  manifest["version"] = kVersion;
  std::ofstream out(out_dir / "manifest.json");
  out << manifest.dump(2) << "\n";
}

std::vector<Image> load_images(const std::vector<ImageRecord>& records, const fs::path& root) {
  std::vector<Image> images;
  images.reserve(records.size());
  for (const auto& rec : records) images.push_back(read_ppm(root / rec.image));
  return images;
}

void write_predictions_jsonl(const PredictionMap& predictions, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write predictions " + path.string());
  for (const auto& [image, dets] : predictions) {
    json detections = json::array();
    for (const auto& det : dets)
      detections.push_back({{"category", to_string(det.category)},
                            {"score", det.score},
                            {"bbox_xywh", {det.x, det.y, det.w, det.h}}});
    out << json{{"image", image}, {"detections", detections}}.dump() << "\n";
  }
}

PredictionMap read_predictions_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open predictions " + path.string());
  PredictionMap map;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error(path.filename().string() + " line " + std::to_string(line_no) +
                               ": malformed JSON: " + e.what());
    }
    std::string image = j.at("image").get<std::string>();
    DetectionSet dets;
    for (const auto& d : j.at("detections")) {
      std::string cat = d.at("category").get<std::string>();
      auto c = category_from_string(cat);
      if (!c)
        throw std::runtime_error(path.filename().string() + " line " + std::to_string(line_no) +
                                 ": unknown category '" + cat + "'");
      Detection det;
      det.category = *c;
      det.score = d.at("score").get<double>();
      const auto& bb = d.at("bbox_xywh");
      det.x = bb[0].get<double>();
      det.y = bb[1].get<double>();
      det.w = bb[2].get<double>();
      det.h = bb[3].get<double>();
      dets.push_back(det);
    }
    map[image] = std::move(dets);
  }
  return map;
}

GroundTruthMap ground_truth_from(const std::vector<ImageRecord>& records) {
  GroundTruthMap gt;
  for (const auto& rec : records) gt[rec.image] = rec.objects;
  return gt;
}

// ---- subcommand implementations ----

int cmd_synth(const RunConfig& cfg, const std::string& out_dir, int64_t count, int64_t size,
              bool mixed) {
  SynthDatasetOptions opts;
  opts.count = count;
  opts.width = opts.height = size;
  opts.seed = cfg.seed();
  opts.mixed_scenes = mixed;
  SynthDataset ds = make_synthetic_dataset(opts);
  write_synthetic_dataset(ds, out_dir);
  write_manifest(out_dir, "synth", cfg);
  std::cout << "wrote " << ds.records.size() << " images to " << out_dir << "\n";
  return 0;
}

int cmd_analyze(const RunConfig& cfg, const std::string& annotations, const std::string& out_dir) {
  ParseResult parsed = parse_annotations(annotations);
  StatsReport report = compute_stats_report(parsed.records);
  write_stats_report(report, out_dir);
  write_manifest(out_dir, "analyze", cfg);
  if (parsed.clipped_boxes > 0)
    std::cerr << "warning: clipped " << parsed.clipped_boxes << " out-of-bounds boxes\n";
  std::cout << "analyzed " << report.total_images << " images / " << report.total_objects
            << " objects -> " << out_dir << "\n";
  return 0;
}

int cmd_degrade(const RunConfig& cfg, const std::string& annotations,
                const std::string& images_root, const std::string& out_dir) {
  ParseResult parsed = parse_annotations(annotations);
  fs::create_directories(fs::path(out_dir) / "images");
  bool per_scene = cfg.get_or<bool>("degrade.per_scene", false);
  std::mt19937_64 rng(cfg.seed());

  std::ofstream pairs(fs::path(out_dir) / "pairs.jsonl");
  for (const auto& rec : parsed.records) {
    Image clean = read_ppm(fs::path(images_root) / rec.image);
    DegradationSpec spec =
        per_scene ? degradation_for_scene(rec.scene, rng) : degradation_from(cfg, rng());
    Image degraded = apply_degradation(clean, spec);
    fs::path rel = fs::path("images") / rec.image;
    write_ppm(degraded, fs::path(out_dir) / rel);
    pairs << json{{"image", rec.image},
                  {"degraded", rel.string()},
                  {"scene", to_string(rec.scene)},
                  {"kind", to_string(spec.kind)}}
                 .dump()
          << "\n";
  }
  write_manifest(out_dir, "degrade", cfg);
  std::cout << "degraded " << parsed.records.size() << " images -> " << out_dir << "\n";
  return 0;
}

int cmd_train_scene(const RunConfig& cfg, const std::string& annotations,
                    const std::string& images_root, const std::string& out_dir) {
  ParseResult parsed = parse_annotations(annotations);
  if (parsed.records.empty()) throw std::runtime_error("train-scene: no records");
  std::vector<Image> images = load_images(parsed.records, images_root);

  std::vector<SceneSample> samples;
  for (size_t i = 0; i < parsed.records.size(); ++i)
    samples.push_back({images[i], parsed.records[i].scene});

  double holdout_fraction = cfg.get_or<double>("scene.holdout_fraction", 0.2);
  std::mt19937_64 rng(cfg.seed());
  std::shuffle(samples.begin(), samples.end(), rng);
  size_t holdout_n = static_cast<size_t>(holdout_fraction * samples.size());
  std::vector<SceneSample> holdout(samples.end() - holdout_n, samples.end());
  samples.resize(samples.size() - holdout_n);

  SceneDiscriminatorConfig sd;
  sd.base_width = cfg.get_or<int64_t>("scene.base_width", 16);
  sd.embed_dim = cfg.get_or<int64_t>("scene.embed_dim", 512);
  SceneDiscriminator disc(sd, rng);

  SceneTrainOptions opts;
  opts.epochs = cfg.get_or<int64_t>("scene.epochs", 12);
  opts.batch_size = cfg.get_or<int64_t>("scene.batch_size", 16);
  opts.lr = cfg.get_or<double>("scene.lr", 1e-3);
  opts.seed = cfg.seed();
  SceneTrainResult result = train_scene_discriminator(disc, samples, holdout, opts);

  fs::create_directories(out_dir);
  save_registry(disc.registry(), "scene", cfg.hash_of("scene"), fs::path(out_dir) / "scene.ckpt");
  json metrics = {{"final_train_loss", result.final_train_loss},
                  {"holdout_accuracy", result.holdout_accuracy},
                  {"train_samples", samples.size()},
                  {"holdout_samples", holdout.size()}};
  std::ofstream(fs::path(out_dir) / "scene_train.json") << metrics.dump(2) << "\n";
  write_manifest(out_dir, "train-scene", cfg);
  std::cout << "scene discriminator holdout accuracy " << result.holdout_accuracy << "\n";
  return 0;
}

int cmd_train_enhancer(const RunConfig& cfg, const std::string& annotations,
                       const std::string& images_root, const std::string& scene_ckpt,
                       const std::string& out_dir) {
  ParseResult parsed = parse_annotations(annotations);
  if (parsed.records.empty()) throw std::runtime_error("train-enhancer: no records");
  std::vector<Image> images = load_images(parsed.records, images_root);

  std::mt19937_64 rng(cfg.seed());
  SceneDiscriminatorConfig sd;
  sd.base_width = cfg.get_or<int64_t>("scene.base_width", 16);
  sd.embed_dim = cfg.get_or<int64_t>("scene.embed_dim", 512);
  SceneDiscriminator disc(sd, rng);
  {
    ParamRegistry reg = disc.registry();
    load_registry(reg, "scene", cfg.hash_of("scene"), scene_ckpt);
  }

  // synthesize (degraded, clean) pairs with the configured degradation family
  std::string kind_name = cfg.get_or<std::string>("enhancer.kind", "fog");
  auto kind = degradation_kind_from_string(kind_name);
  if (!kind) throw ConfigError("config field 'enhancer.kind' has unknown value");
  SceneClass scene_of_kind = *kind == DegradationSpec::Kind::fog         ? SceneClass::foggy
                             : *kind == DegradationSpec::Kind::rain      ? SceneClass::rainy
                             : *kind == DegradationSpec::Kind::lowlight  ? SceneClass::light
                                                                         : SceneClass::hybrid;
  std::vector<EnhancerPair> pairs;
  for (const auto& img : images) {
    DegradationSpec spec = degradation_for_scene(scene_of_kind, rng);
    pairs.push_back({apply_degradation(img, spec), img, scene_of_kind});
  }
  std::shuffle(pairs.begin(), pairs.end(), rng);
  double val_fraction = cfg.get_or<double>("enhancer.val_fraction", 0.2);
  size_t val_n = std::max<size_t>(1, static_cast<size_t>(val_fraction * pairs.size()));
  std::vector<EnhancerPair> validation(pairs.end() - val_n, pairs.end());
  pairs.resize(pairs.size() - val_n);

  EnhancerConfig ec;
  ec.base_width = cfg.get_or<int64_t>("enhancer.base_width", 12);
  ec.prompt_count = cfg.get_or<int64_t>("enhancer.prompts", 5);
  ec.embed_dim = sd.embed_dim;
  EnhancerParams params(ec, rng);
  PromptBank bank(ec, rng);

  EnhancerTrainOptions opts;
  opts.steps = cfg.get_or<int64_t>("enhancer.steps", 400);
  opts.batch_size = cfg.get_or<int64_t>("enhancer.batch_size", 4);
  opts.lr = cfg.get_or<double>("enhancer.lr", 2e-3);
  opts.seed = cfg.seed();
  EnhancerTrainResult result = train_enhancer(params, bank, disc, pairs, validation, opts);

  fs::create_directories(out_dir);
  ParamRegistry reg;
  params.register_into(reg, "enhancer");
  bank.register_into(reg, "bank");
  save_registry(reg, "enhancer", cfg.hash_of("enhancer"), fs::path(out_dir) / "enhancer.ckpt");
  json metrics = {{"final_l1", result.final_l1},
                  {"val_psnr_degraded", result.val_psnr_degraded},
                  {"val_psnr_enhanced", result.val_psnr_enhanced},
                  {"psnr_gain", result.val_psnr_enhanced - result.val_psnr_degraded}};
  std::ofstream(fs::path(out_dir) / "enhancer_train.json") << metrics.dump(2) << "\n";
  write_manifest(out_dir, "train-enhancer", cfg);
  std::cout << "enhancer PSNR gain " << (result.val_psnr_enhanced - result.val_psnr_degraded)
            << " dB\n";
  return 0;
}

int cmd_train_detector(const RunConfig& cfg, const std::string& annotations,
                       const std::string& images_root, const std::string& out_dir,
                       const std::string& scene_ckpt, const std::string& enhancer_ckpt) {
  ParseResult parsed = parse_annotations(annotations);
  if (parsed.records.empty()) throw std::runtime_error("train-detector: no records");
  std::vector<Image> images = load_images(parsed.records, images_root);

  DetectorConfig dc = detector_config_from(cfg);
  std::mt19937_64 rng(cfg.seed());
  MSGNet model = build_msgnet(dc, rng);
  if (dc.use_sgie) {
    if (!scene_ckpt.empty()) {
      ParamRegistry reg;
      model.scene.register_into(reg, "scene");
      load_registry(reg, "scene", cfg.hash_of("scene"), scene_ckpt);
    }
    if (!enhancer_ckpt.empty()) {
      ParamRegistry reg;
      model.enhancer.register_into(reg, "enhancer");
      model.prompt_bank.register_into(reg, "bank");
      load_registry(reg, "enhancer", cfg.hash_of("enhancer"), enhancer_ckpt);
    }
  }

  std::vector<DetectorSample> dataset;
  for (size_t i = 0; i < parsed.records.size(); ++i)
    dataset.push_back({images[i], parsed.records[i].objects});

  DetectorTrainOptions opts;
  opts.optimizer = cfg.get_or<std::string>("train.optimizer", "sgd");
  opts.lr = cfg.get_or<double>("train.lr", 1e-4);
  opts.sgd_momentum = cfg.get_or<double>("train.momentum", 0.9);
  opts.batch_size = cfg.get_or<int64_t>("train.batch_size", 16);
  opts.log_every = cfg.get_or<int64_t>("train.log_every", 50);
  opts.seed = cfg.seed();
  int64_t steps = cfg.get_or<int64_t>("train.steps", 0);
  if (steps <= 0) {
    int64_t epochs = cfg.get_or<int64_t>("train.epochs", 100);
    int64_t per_epoch =
        (static_cast<int64_t>(dataset.size()) + opts.batch_size - 1) / opts.batch_size;
    steps = epochs * std::max<int64_t>(per_epoch, 1);
  }
  opts.steps = steps;

  auto log = train_detector(model, dataset, opts);

  fs::create_directories(out_dir);
  save_registry(model.full_registry(), "detector", cfg.hash_of("detector"),
                fs::path(out_dir) / "detector.ckpt");
  json jlog = json::array();
  for (const auto& entry : log)
    jlog.push_back({{"step", entry.step},
                    {"classification_loss", entry.loss.classification_loss},
                    {"box_loss", entry.loss.box_loss},
                    {"total", entry.loss.total}});
  std::ofstream(fs::path(out_dir) / "train_log.json") << jlog.dump(2) << "\n";
  write_manifest(out_dir, "train-detector", cfg);
  std::cout << "trained " << steps << " steps, final loss " << log.back().loss.total << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& annotations, const std::string& images_root,
             const std::string& checkpoint, const std::string& predictions_path,
             const std::string& out_dir) {
  ParseResult parsed = parse_annotations(annotations);
  GroundTruthMap gt = ground_truth_from(parsed.records);
  fs::create_directories(out_dir);

  PredictionMap predictions;
  if (!predictions_path.empty()) {
    predictions = read_predictions_jsonl(predictions_path);
  } else {
    if (checkpoint.empty())
      throw ConfigError("eval requires either --predictions or --checkpoint");
    DetectorConfig dc = detector_config_from(cfg);
    std::mt19937_64 rng(cfg.seed());
    MSGNet model = build_msgnet(dc, rng);
    ParamRegistry reg = model.full_registry();
    load_registry(reg, "detector", cfg.hash_of("detector"), checkpoint);
    std::vector<Image> images = load_images(parsed.records, images_root);
    for (size_t i = 0; i < parsed.records.size(); ++i)
      predictions[parsed.records[i].image] = detect(model, images[i], dc);
    write_predictions_jsonl(predictions, fs::path(out_dir) / "predictions.jsonl");
  }

  EvalResult result = evaluate_map(predictions, gt);
  std::ofstream(fs::path(out_dir) / "metrics.json") << metrics_json(result) << "\n";
  write_manifest(out_dir, "eval", cfg);
  std::cout << "map_50_95 " << result.map_50_95 << " map_50 " << result.map_50 << "\n";
  return 0;
}

int cmd_ablate(const RunConfig& cfg, const std::string& annotations,
               const std::string& images_root, const std::string& out_dir) {
  ParseResult parsed = parse_annotations(annotations);
  if (parsed.records.empty()) throw std::runtime_error("ablate: no records");
  std::vector<Image> images = load_images(parsed.records, images_root);
  std::vector<DetectorSample> dataset;
  for (size_t i = 0; i < parsed.records.size(); ++i)
    dataset.push_back({images[i], parsed.records[i].objects});

  AblationBudget budget;
  budget.base_config = detector_config_from(cfg);
  budget.train.optimizer = cfg.get_or<std::string>("train.optimizer", "adam");
  budget.train.lr = cfg.get_or<double>("train.lr", 1e-3);
  budget.train.sgd_momentum = cfg.get_or<double>("train.momentum", 0.9);
  budget.train.batch_size = cfg.get_or<int64_t>("train.batch_size", 4);
  budget.train.steps = cfg.get_or<int64_t>("train.steps", 30);
  budget.train.seed = cfg.seed();
  budget.build_seed = cfg.seed();

  auto rows = run_ablation(full_ablation_matrix(), dataset, budget);
  fs::create_directories(out_dir);
  std::ofstream(fs::path(out_dir) / "ablation.csv") << ablation_csv(rows);
  write_manifest(out_dir, "ablate", cfg);
  std::cout << "ablation matrix complete: " << rows.size() << " rows -> " << out_dir
            << "/ablation.csv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MSG-Net water-surface object detection toolkit"};
  app.require_subcommand(1);
  app.allow_extras(false);

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--set", overrides, "Override a config key: dotted.path=value");
  std::optional<uint64_t> seed_flag;
  app.add_option("--seed", seed_flag, "Random seed (mirrors config key 'seed')");

  std::string out_dir = "out", annotations, images_root = ".", scene_ckpt, enhancer_ckpt,
              checkpoint, predictions;
  int64_t synth_count = 8, synth_size = 64;
  bool synth_mixed = false;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic fixture dataset");
  synth->add_option("--out", out_dir, "Output directory");
  synth->add_option("--count", synth_count, "Number of images");
  synth->add_option("--size", synth_size, "Image side length");
  synth->add_flag("--mixed-scenes", synth_mixed, "Cycle all six scene classes");

  auto* analyze = app.add_subcommand("analyze", "Dataset statistics tables");
  analyze->add_option("--annotations", annotations, "Annotations JSONL")->required();
  analyze->add_option("--out", out_dir, "Output directory");

  auto* degrade = app.add_subcommand("degrade", "Apply synthetic degradations");
  degrade->add_option("--annotations", annotations, "Annotations JSONL")->required();
  degrade->add_option("--images-root", images_root, "Image directory");
  degrade->add_option("--out", out_dir, "Output directory");

  auto* train_scene = app.add_subcommand("train-scene", "Train the scene discriminator");
  train_scene->add_option("--annotations", annotations, "Annotations JSONL")->required();
  train_scene->add_option("--images-root", images_root, "Image directory");
  train_scene->add_option("--out", out_dir, "Output directory");

  auto* train_enh = app.add_subcommand("train-enhancer", "Train the SGIE enhancer");
  train_enh->add_option("--annotations", annotations, "Annotations JSONL (clean images)")
      ->required();
  train_enh->add_option("--images-root", images_root, "Image directory");
  train_enh->add_option("--scene-ckpt", scene_ckpt, "Scene discriminator checkpoint")->required();
  train_enh->add_option("--out", out_dir, "Output directory");

  auto* train_det = app.add_subcommand("train-detector", "Train the MSG-Net detector");
  train_det->add_option("--annotations", annotations, "Annotations JSONL")->required();
  train_det->add_option("--images-root", images_root, "Image directory");
  train_det->add_option("--out", out_dir, "Output directory");
  train_det->add_option("--scene-ckpt", scene_ckpt, "Scene checkpoint (with use_sgie)");
  train_det->add_option("--enhancer-ckpt", enhancer_ckpt, "Enhancer checkpoint (with use_sgie)");

  auto* eval = app.add_subcommand("eval", "Evaluate detections (mAP)");
  eval->add_option("--annotations", annotations, "Ground-truth annotations JSONL")->required();
  eval->add_option("--images-root", images_root, "Image directory");
  eval->add_option("--checkpoint", checkpoint, "Detector checkpoint to run");
  eval->add_option("--predictions", predictions, "Pre-computed predictions JSONL to score");
  eval->add_option("--out", out_dir, "Output directory");

  auto* ablate = app.add_subcommand("ablate", "Run the 2^3 module ablation matrix");
  ablate->add_option("--annotations", annotations, "Annotations JSONL")->required();
  ablate->add_option("--images-root", images_root, "Image directory");
  ablate->add_option("--out", out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help() << "\n";
    return 2;
  }

  try {
    RunConfig cfg;
    cfg.tree = default_config();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("cannot open config file '" + config_path + "'");
      json file_cfg;
      try {
        file_cfg = json::parse(in);
      } catch (const json::exception& e) {
        throw ConfigError("config file parse error: " + std::string(e.what()));
      }
      merge_patch(cfg.tree, file_cfg);
    }
    for (const auto& kv : overrides) {
      size_t eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects dotted.path=value");
      std::string key = kv.substr(0, eq);
      std::string raw = kv.substr(eq + 1);
      json value;
      try {
        value = json::parse(raw);
      } catch (const json::exception&) {
        value = raw;  // plain string
      }
      set_path(cfg.tree, key, value);
    }
    if (seed_flag) cfg.tree["seed"] = *seed_flag;

    if (synth->parsed()) return cmd_synth(cfg, out_dir, synth_count, synth_size, synth_mixed);
    if (analyze->parsed()) return cmd_analyze(cfg, annotations, out_dir);
    if (degrade->parsed()) return cmd_degrade(cfg, annotations, images_root, out_dir);
    if (train_scene->parsed()) return cmd_train_scene(cfg, annotations, images_root, out_dir);
    if (train_enh->parsed())
      return cmd_train_enhancer(cfg, annotations, images_root, scene_ckpt, out_dir);
    if (train_det->parsed())
      return cmd_train_detector(cfg, annotations, images_root, out_dir, scene_ckpt,
                                enhancer_ckpt);
    if (eval->parsed())
      return cmd_eval(cfg, annotations, images_root, checkpoint, predictions, out_dir);
    if (ablate->parsed()) return cmd_ablate(cfg, annotations, images_root, out_dir);
    std::cerr << "error: no subcommand\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
