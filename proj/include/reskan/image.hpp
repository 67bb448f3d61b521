#pragma once

// 8-bit image ingestion (PGM and PNG) and the preprocessing steps. Images are
// held as row-major grayscale floats in [0,255] until scale_to_unit maps them
// to [0,1]; RGB inputs are converted by luminance at load time.

#include <filesystem>
#include <string>
#include <vector>

#include "reskan/errors.hpp"
#include "reskan/tensor.hpp"

namespace reskan {

struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> px;  // height*width, row-major

  float at(int y, int x) const { return px[static_cast<size_t>(y) * width + x]; }
  float& at(int y, int x) { return px[static_cast<size_t>(y) * width + x]; }
};

Image read_image(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Image& img);
void write_png_gray(const std::filesystem::path& path, const Image& img);

// Bilinear resize with half-pixel centers.
Image resize_bilinear(const Image& img, int target);
Image center_crop(const Image& img, int size);

enum class StepKind { resize, center_crop, to_grayscale, scale_to_unit };

struct PreprocessStep {
  StepKind kind;
  int arg = 0;
};

struct PreprocessRecipe {
  std::vector<PreprocessStep> steps;
  std::string describe() const;
};

// Runs the recipe and emits a [1,H,W] tensor. Values are in [0,1] when the
// recipe ends with scale_to_unit, else raw 0..255.
Tensor<float> apply_recipe(const Image& img, const PreprocessRecipe& recipe);

}  // namespace reskan
