#include "reskan/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <unordered_map>

#include "reskan/errors.hpp"

namespace fs = std::filesystem;

namespace reskan {

const char* dataset_kind_name(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::mstar: return "mstar";
    case DatasetKind::fusar: return "fusar";
    case DatasetKind::sar_acd: return "sar_acd";
    case DatasetKind::synthetic: return "synthetic";
  }
  return "?";
}

DatasetKind dataset_kind_from_string(const std::string& s) {
  if (s == "mstar") return DatasetKind::mstar;
  if (s == "fusar") return DatasetKind::fusar;
  if (s == "sar_acd") return DatasetKind::sar_acd;
  if (s == "synthetic") return DatasetKind::synthetic;
  throw UsageError("unknown dataset kind '" + s + "'; expected mstar, fusar, sar_acd or synthetic");
}

PreprocessRecipe recipe_for(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::mstar:
      return {{{StepKind::center_crop, 112}, {StepKind::scale_to_unit, 0}}};
    case DatasetKind::fusar:
      return {{{StepKind::resize, 512}, {StepKind::scale_to_unit, 0}}};
    case DatasetKind::sar_acd:
      return {{{StepKind::resize, 128}, {StepKind::center_crop, 112}, {StepKind::scale_to_unit, 0}}};
    case DatasetKind::synthetic:
      return {{{StepKind::scale_to_unit, 0}}};
  }
  throw UsageError("unknown dataset kind");
}

std::vector<int> Dataset::per_class_counts() const {
  std::vector<int> counts(static_cast<size_t>(num_classes()), 0);
  for (const auto& s : samples) counts[static_cast<size_t>(s.label)]++;
  return counts;
}

namespace {

uint64_t hash_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("unreadable file: " + path.string());
  uint64_t h = 0xcbf29ce484222325ull;
  char buf[8192];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

}  // namespace

Dataset load_image_folder(const fs::path& root, const PreprocessRecipe& recipe, const std::string& split_tag) {
  if (!fs::is_directory(root)) throw DataError("dataset root is not a directory: " + root.string());
  std::vector<fs::path> class_dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) class_dirs.push_back(e.path());
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty()) throw DataError("no class folders under " + root.string());

  Dataset ds;
  ds.split = split_tag;
  for (size_t label = 0; label < class_dirs.size(); ++label) {
    ds.class_names.push_back(class_dirs[label].filename().string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(class_dirs[label]))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("empty class folder: " + class_dirs[label].string());
    for (const auto& f : files) {
      Sample s;
      s.id = fs::relative(f, root).string();
      s.label = static_cast<int>(label);
      s.content_hash = hash_file(f);
      s.image = apply_recipe(read_image(f), recipe);
      ds.samples.push_back(std::move(s));
    }
  }
  return ds;
}

int check_split_hygiene(const Dataset& train, const Dataset& test) {
  std::unordered_map<uint64_t, const Sample*> train_hashes;
  for (const auto& s : train.samples) train_hashes.emplace(s.content_hash, &s);
  int collisions = 0;
  for (const auto& s : test.samples) {
    auto it = train_hashes.find(s.content_hash);
    if (it != train_hashes.end()) {
      ++collisions;
      std::cerr << "warning: test sample " << s.id << " duplicates train sample " << it->second->id << "\n";
    }
  }
  return collisions;
}

Dataset kshot_subsample(const Dataset& train, int k, uint64_t seed) {
  if (k < 1) throw UsageError("k must be >= 1");
  std::vector<std::vector<int>> by_class(static_cast<size_t>(train.num_classes()));
  for (int i = 0; i < static_cast<int>(train.samples.size()); ++i)
    by_class[static_cast<size_t>(train.samples[static_cast<size_t>(i)].label)].push_back(i);

  Dataset out;
  out.class_names = train.class_names;
  out.split = train.split;
  for (size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    if (static_cast<int>(idx.size()) < k)
      throw DataError("class '" + train.class_names[c] + "' has " + std::to_string(idx.size()) +
                      " samples, fewer than k=" + std::to_string(k));
    RngStream rng = RngStream::labeled(seed, "kshot", static_cast<uint64_t>(c));
    // partial Fisher-Yates: the first k slots are the draw
    for (int i = 0; i < k; ++i) {
      const auto j = i + static_cast<int>(rng.uniform_index(idx.size() - static_cast<size_t>(i)));
      std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    }
    std::vector<int> chosen(idx.begin(), idx.begin() + k);
    std::sort(chosen.begin(), chosen.end());
    for (int i : chosen) out.samples.push_back(train.samples[static_cast<size_t>(i)]);
  }
  return out;
}

std::vector<std::vector<int>> epoch_batches(int num_samples, int batch_size, uint64_t shuffle_seed,
                                            bool drop_last) {
  if (batch_size < 1) throw UsageError("batch size must be >= 1");
  std::vector<int> order(static_cast<size_t>(num_samples));
  for (int i = 0; i < num_samples; ++i) order[static_cast<size_t>(i)] = i;
  RngStream rng = RngStream::labeled(shuffle_seed, "shuffle");
  for (int i = num_samples - 1; i > 0; --i) {
    const auto j = rng.uniform_index(static_cast<uint64_t>(i) + 1);
    std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
  }
  std::vector<std::vector<int>> batches;
  for (int start = 0; start < num_samples; start += batch_size) {
    const int end = std::min(start + batch_size, num_samples);
    if (drop_last && end - start < batch_size) break;
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  return batches;
}

Batch gather_batch(const Dataset& ds, const std::vector<int>& indices) {
  if (indices.empty()) throw UsageError("empty batch");
  const auto& first = ds.samples[static_cast<size_t>(indices[0])].image;
  const int h = first.dim(1), w = first.dim(2);
  Batch b;
  b.images = Tensor<float>({static_cast<int>(indices.size()), 1, h, w});
  b.indices = indices;
  const int64_t per = int64_t(h) * w;
  for (size_t n = 0; n < indices.size(); ++n) {
    const auto& s = ds.samples[static_cast<size_t>(indices[n])];
    if (s.image.dim(1) != h || s.image.dim(2) != w)
      throw DataError("mixed image sizes in one batch: sample " + s.id);
    std::copy(s.image.data(), s.image.data() + per, b.images.data() + static_cast<int64_t>(n) * per);
    b.labels.push_back(s.label);
  }
  return b;
}

}  // namespace reskan
