#pragma once

#include <string>
#include <vector>

namespace memsim {

struct Shape3 {
  int h = 0, w = 0, c = 0;
  int size() const { return h * w * c; }
};

struct LayerSpec {
  enum class Kind { conv, dense };
  Kind kind = Kind::dense;
  int units = 0;   // filters (conv) or output units (dense)
  int kernel = 3;  // conv kernel side
  bool relu = true;
  bool pool = false;  // 2x2 max pool after activation (conv only)

  static LayerSpec conv(int filters, int kernel = 3, bool pool = true, bool relu = true) {
    return {Kind::conv, filters, kernel, relu, pool};
  }
  static LayerSpec dense(int units, bool relu = false) {
    return {Kind::dense, units, 0, relu, false};
  }
};

struct NetworkSpec {
  std::string name;
  Shape3 input;
  std::vector<LayerSpec> layers;
  bool same_padding = true;  // 'same' zero padding for conv layers

  void validate() const;  // shapes must chain; final layer is the classifier
  int classes() const;
  // Output shape after each layer (post pool).
  std::vector<Shape3> activation_shapes() const;
};

// The desk-scale classifier: three 3x3 conv stages (5/15/25 filters, each
// ReLU + 2x2 max pool) and a dense readout.
NetworkSpec mnist_cnn();

// Small fully-connected baseline for non-ideality studies.
NetworkSpec mnist_mlp(int hidden = 64);

// Eight-layer VGG-style network at CIFAR-10 scale (long-run mode and
// cost-model studies).
NetworkSpec vgg8_network();

}  // namespace memsim
