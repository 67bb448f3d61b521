#pragma once

// Dataset ingestion (directory of class folders), per-dataset preprocessing
// recipes, the stratified k-shot sampler, seeded batch iteration, and the
// deterministic synthetic SAR-like generator.

#include <filesystem>
#include <string>
#include <vector>

#include "reskan/image.hpp"
#include "reskan/rng.hpp"
#include "reskan/speckle.hpp"
#include "reskan/tensor.hpp"

namespace reskan {

enum class DatasetKind { mstar, fusar, sar_acd, synthetic };

const char* dataset_kind_name(DatasetKind kind);
DatasetKind dataset_kind_from_string(const std::string& s);

// Preprocessing per dataset family:
//   mstar     -> center_crop(112), scale_to_unit
//   fusar     -> resize(512), scale_to_unit
//   sar_acd   -> resize(128), center_crop(112), scale_to_unit
//   synthetic -> scale_to_unit
PreprocessRecipe recipe_for(DatasetKind kind);

struct Sample {
  std::string id;          // path relative to the dataset root
  Tensor<float> image;     // [1,H,W], preprocessed
  int label = 0;
  uint64_t content_hash = 0;  // FNV-1a over the raw file bytes
};

struct Dataset {
  std::vector<Sample> samples;
  std::vector<std::string> class_names;
  std::string split;  // "train" or "test"

  int num_classes() const { return static_cast<int>(class_names.size()); }
  std::vector<int> per_class_counts() const;
};

// Loads root/<class_name>/<file> with deterministic lexicographic ordering;
// labels come from the sorted class folder names.
Dataset load_image_folder(const std::filesystem::path& root, const PreprocessRecipe& recipe,
                          const std::string& split_tag);

// Warns on content-hash collisions across splits; returns the collision count.
int check_split_hygiene(const Dataset& train, const Dataset& test);

// Exactly k samples per class, without replacement, deterministic by seed.
Dataset kshot_subsample(const Dataset& train, int k, uint64_t seed);

// Seeded epoch permutation cut into batches; the final partial batch is kept
// unless drop_last.
std::vector<std::vector<int>> epoch_batches(int num_samples, int batch_size, uint64_t shuffle_seed, bool drop_last);

struct Batch {
  Tensor<float> images;  // [N,1,H,W]
  std::vector<int> labels;
  std::vector<int> indices;
};

Batch gather_batch(const Dataset& ds, const std::vector<int>& indices);

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

// Oriented sinusoidal gratings (orientation = class * 180deg / num_classes)
// over Gaussian-blob reflectivity maps, multiplied by Gamma speckle and
// quantized to 8 bits. Regeneration from the same spec is bit-identical.
struct SyntheticSpec {
  int num_classes = 4;
  int train_per_class = 200;
  int test_per_class = 100;
  int size = 64;
  GammaNoiseSpec speckle{3.0, 1.0 / 3.0, GammaParametrization::scale, 0};
  uint64_t master_seed = 0;
};

// Writes out_root/{train,test}/class_<i>/img_<j>.pgm plus spec.json.
void generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out_root);

SyntheticSpec read_synthetic_manifest(const std::filesystem::path& json_path);

}  // namespace reskan
