#include "memsim/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace memsim {

namespace {

std::uint32_t read_be32(std::ifstream& f, const std::string& path) {
  unsigned char b[4];
  if (!f.read(reinterpret_cast<char*>(b), 4)) {
    throw std::runtime_error("truncated idx file: " + path);
  }
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

}  // namespace

Dataset load_idx_dataset(const std::string& images_path, const std::string& labels_path) {
  Dataset d;

  std::ifstream fi(images_path, std::ios::binary);
  if (!fi) throw std::runtime_error("cannot open idx images: " + images_path);
  const std::uint32_t magic = read_be32(fi, images_path);
  if (magic != 2051 && magic != 2052) {
    throw std::runtime_error("bad idx image magic (want 2051/2052): " + images_path);
  }
  d.count = static_cast<int>(read_be32(fi, images_path));
  if (magic == 2051) {
    d.height = static_cast<int>(read_be32(fi, images_path));
    d.width = static_cast<int>(read_be32(fi, images_path));
    d.channels = 1;
  } else {
    d.channels = static_cast<int>(read_be32(fi, images_path));
    d.height = static_cast<int>(read_be32(fi, images_path));
    d.width = static_cast<int>(read_be32(fi, images_path));
  }
  if (d.count < 1 || d.height < 1 || d.width < 1 || d.channels < 1) {
    throw std::runtime_error("bad idx image dimensions: " + images_path);
  }
  const std::size_t n_pix =
      static_cast<std::size_t>(d.count) * d.height * d.width * d.channels;
  std::vector<unsigned char> raw(n_pix);
  if (!fi.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n_pix))) {
    throw std::runtime_error("truncated idx image payload: " + images_path);
  }
  d.images.resize(n_pix);
  for (std::size_t i = 0; i < n_pix; ++i) d.images[i] = static_cast<float>(raw[i]) / 255.0f;

  std::ifstream fl(labels_path, std::ios::binary);
  if (!fl) throw std::runtime_error("cannot open idx labels: " + labels_path);
  if (read_be32(fl, labels_path) != 2049) {
    throw std::runtime_error("bad idx label magic (want 2049): " + labels_path);
  }
  const int n_labels = static_cast<int>(read_be32(fl, labels_path));
  if (n_labels != d.count) {
    throw std::runtime_error("idx image/label count mismatch: " + labels_path);
  }
  d.labels.resize(static_cast<std::size_t>(n_labels));
  if (!fl.read(reinterpret_cast<char*>(d.labels.data()), n_labels)) {
    throw std::runtime_error("truncated idx label payload: " + labels_path);
  }
  for (auto l : d.labels) {
    if (l >= d.num_classes) {
      throw std::runtime_error("label outside [0, " + std::to_string(d.num_classes) +
                               "): " + labels_path);
    }
  }
  return d;
}

Dataset take(const Dataset& d, int n) {
  if (n <= 0 || n >= d.count) return d;
  Dataset out = d;
  out.count = n;
  out.images.assign(d.images.begin(),
                    d.images.begin() + static_cast<std::size_t>(n) * d.pixels_per_image());
  out.labels.assign(d.labels.begin(), d.labels.begin() + n);
  return out;
}

}  // namespace memsim
