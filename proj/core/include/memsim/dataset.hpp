#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace memsim {

struct Dataset {
  int count = 0;
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<float> images;  // count * h * w * c, scaled to [0, 1]
  std::vector<std::uint8_t> labels;
  int num_classes = 10;

  const float* image(int i) const {
    return images.data() + static_cast<std::size_t>(i) * height * width * channels;
  }
  int pixels_per_image() const { return height * width * channels; }
};

// IDX-format loader (big-endian magic 2051 for 3-D image files, 2052 for
// 4-D image tensors, 2049 for label files). Pixels scale to [0, 1].
Dataset load_idx_dataset(const std::string& images_path, const std::string& labels_path);

// First n records (n <= count); n == 0 keeps everything.
Dataset take(const Dataset& d, int n);

}  // namespace memsim
