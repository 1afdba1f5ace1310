#pragma once

#include <string>
#include <vector>

#include "taskforge/tensor.hpp"

namespace taskforge {

// Handwritten-digit data loaded from the de-facto IDX files.
struct MnistData {
  Tensor images; // [n, rows*cols] floats in [0,1]
  Tensor labels; // [n, 10] one-hot
  int rows = 0, cols = 0;

  int count() const { return images.rows(); }
};

// IDX image file (magic 0x00000803, big-endian header, u8 pixels).
struct IdxImages {
  int rows = 0, cols = 0;
  Tensor data; // [n, rows*cols] in [0,1]
};

IdxImages load_idx_images(const std::string& path);

// IDX label file (magic 0x00000801); returns raw class bytes.
std::vector<int> load_idx_labels(const std::string& path);

// Loads and pairs both files; label k becomes one-hot index k.
MnistData mnist_load(const std::string& images_path,
                     const std::string& labels_path);

} // namespace taskforge
