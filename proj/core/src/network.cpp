#include "memsim/network.hpp"

#include <stdexcept>

namespace memsim {

void NetworkSpec::validate() const {
  if (layers.empty()) throw std::invalid_argument("network: no layers");
  if (input.h < 1 || input.w < 1 || input.c < 1) {
    throw std::invalid_argument("network: bad input shape");
  }
  bool seen_dense = false;
  for (const auto& l : layers) {
    if (l.units < 1) throw std::invalid_argument("network: layer units >= 1");
    if (l.kind == LayerSpec::Kind::conv) {
      if (seen_dense) throw std::invalid_argument("network: conv after dense not supported");
      if (l.kernel < 1 || l.kernel % 2 == 0) {
        throw std::invalid_argument("network: conv kernel must be odd and >= 1");
      }
    } else {
      seen_dense = true;
    }
  }
  activation_shapes();  // throws if a conv collapses the map
}

int NetworkSpec::classes() const { return layers.back().units; }

std::vector<Shape3> NetworkSpec::activation_shapes() const {
  std::vector<Shape3> shapes;
  Shape3 cur = input;
  for (const auto& l : layers) {
    if (l.kind == LayerSpec::Kind::conv) {
      int h = cur.h, w = cur.w;
      if (!same_padding) {
        h -= l.kernel - 1;
        w -= l.kernel - 1;
      }
      if (h < 1 || w < 1) throw std::invalid_argument("network: conv output collapses");
      if (l.pool) {
        h /= 2;
        w /= 2;
        if (h < 1 || w < 1) throw std::invalid_argument("network: pool output collapses");
      }
      cur = {h, w, l.units};
    } else {
      cur = {1, 1, l.units};
    }
    shapes.push_back(cur);
  }
  return shapes;
}

NetworkSpec mnist_cnn() {
  NetworkSpec net;
  net.name = "mnist-cnn";
  net.input = {28, 28, 1};
  net.layers = {
      LayerSpec::conv(5),
      LayerSpec::conv(15),
      LayerSpec::conv(25),
      LayerSpec::dense(10),
  };
  return net;
}

NetworkSpec mnist_mlp(int hidden) {
  NetworkSpec net;
  net.name = "mnist-mlp";
  net.input = {28, 28, 1};
  net.layers = {LayerSpec::dense(hidden, true), LayerSpec::dense(10)};
  return net;
}

NetworkSpec vgg8_network() {
  NetworkSpec net;
  net.name = "vgg8";
  net.input = {32, 32, 3};
  net.layers = {
      LayerSpec::conv(128, 3, false), LayerSpec::conv(128, 3, true),
      LayerSpec::conv(256, 3, false), LayerSpec::conv(256, 3, true),
      LayerSpec::conv(512, 3, false), LayerSpec::conv(512, 3, true),
      LayerSpec::dense(1024, true),   LayerSpec::dense(10),
  };
  return net;
}

}  // namespace memsim
