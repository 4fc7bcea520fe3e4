#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cin/tensor.hpp"

namespace cin {

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Interleaved 8-bit RGB image.
struct ImageU8 {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> rgb;  // height * width * 3
};

// Reads PNG (8-bit gray, gray+alpha, RGB, RGBA; no palette / interlace / 16-bit)
// or binary PPM/PGM. Alpha is dropped, gray replicated.
ImageU8 read_image(const std::string& path);

// 8-bit RGB PNG, zlib-compressed, filter type 0 scanlines.
void write_png(const std::string& path, const ImageU8& img);

// [1,3,H,W] float tensor in [0,1] from an 8-bit image.
TensorF image_to_tensor(const ImageU8& img);

// Export-time clamp to [0,1] and 8-bit quantization of one batch item.
ImageU8 tensor_to_image(const TensorF& t, Index batch_index = 0);

}  // namespace cin
