#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "splitinfer/tensor.hpp"

namespace splitinfer {

// Seeded natural-statistics image in [0, 1], shape [channels, height, width]:
// smooth sinusoidal gradients, flat-colored discs, mild sensor noise, then
// 8-bit quantization.
Tensor SyntheticFrame(size_t height, size_t width, uint64_t seed, size_t channels = 3);

// Binary PPM (P6, maxval <= 255) as [3, H, W] scaled to [0, 1].
Tensor ReadPpm(const std::filesystem::path& path);
void WritePpm(const Tensor& frame, const std::filesystem::path& path);

// Center crop of a [C, H, W] tensor.
Tensor CenterCrop(const Tensor& frame, size_t height, size_t width);

// `synthetic:N` or a directory of .ppm files (sorted by name, center-cropped
// to height x width).
std::vector<Tensor> LoadFrames(std::string_view source, size_t height, size_t width,
                               uint64_t seed);

}  // namespace splitinfer
