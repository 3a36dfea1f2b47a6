#pragma once

#include <string>

#include "auecrl/tensor.hpp"

namespace auecrl {

// A learnable tensor with its gradient and SGD momentum buffer.
// Frozen params receive zero updates and keep their buffers untouched.
struct Param {
  std::string name;
  Tensor value;
  Tensor gradient;
  Tensor momentum;
  bool frozen = false;
  bool clamp01 = false;  // clamp value to [0,1] after every update

  Param() = default;
  Param(std::string param_name, Tensor initial)
      : name(std::move(param_name)),
        value(std::move(initial)),
        gradient(Tensor::zeros(value.shape())),
        momentum(Tensor::zeros(value.shape())) {}

  void zero_gradient() { gradient.fill(0.0); }
};

}  // namespace auecrl
