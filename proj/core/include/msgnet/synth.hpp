#pragma once

// Deterministic synthetic water-scene renderer. Provides desk-scale fixture
// data: clean scenes with exact box annotations, scene-conditional
// degradations for the six environment classes, and whole-dataset generation
// for the CLI walkthrough.

#include "msgnet/datakit.hpp"

namespace msgnet {

struct SynthSceneOptions {
  int64_t width = 64;
  int64_t height = 64;
  int min_objects = 1;
  int max_objects = 3;
};

struct SynthScene {
  Image image;  // clean render
  std::vector<BoxAnnotation> objects;
};

// Renders sky, water and vessels. `style` only selects the clean base look
// (sunny vs overcast palette); weather effects are applied separately.
SynthScene render_scene(SceneClass style, uint64_t seed, const SynthSceneOptions& opts);

// Degradation recipe for a scene class, parameters drawn from per-class
// ranges. sunny and cloudy return an identity spec (their look comes from the
// renderer itself).
DegradationSpec degradation_for_scene(SceneClass scene, std::mt19937_64& rng);

// Clean render in the class's base style plus the class's degradation.
// The exact object boxes are returned when requested.
Image synthesize_scene_image(SceneClass scene, uint64_t seed, const SynthSceneOptions& opts,
                             std::vector<BoxAnnotation>* objects = nullptr);

struct SynthDatasetOptions {
  int64_t count = 8;
  int64_t width = 64;
  int64_t height = 64;
  uint64_t seed = 7;
  bool mixed_scenes = false;  // cycle all six classes instead of clean sunny
  int min_objects = 1;
  int max_objects = 3;
};

struct SynthDataset {
  std::vector<Image> images;
  std::vector<ImageRecord> records;
};

SynthDataset make_synthetic_dataset(const SynthDatasetOptions& opts);

// Writes images (binary PPM) plus annotations.jsonl into dir.
void write_synthetic_dataset(const SynthDataset& ds, const std::filesystem::path& dir);

}  // namespace msgnet
