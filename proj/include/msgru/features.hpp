#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "msgru/graph.hpp"
#include "msgru/rng.hpp"

namespace msgru::features {

using num::Graph;
using num::ParamStore;
using num::Tensor;
using num::Var;

inline constexpr std::size_t kConvStages = 5;

/// Patch CNN shape. Stage i maps channels[i-1] -> channels[i] (input has one
/// channel) with a 3x3 same-padded convolution, relu and 2x2 max pooling.
struct CnnConfig {
  std::vector<std::size_t> channels = {8, 16, 32, 32, 64};
  std::size_t feature_dim = 256;
  std::size_t patch_size = 32;

  void validate() const;
};

std::string conv_weight_name(std::size_t stage);  // stage counts from 1
std::string conv_bias_name(std::size_t stage);
inline const std::string kFcWeight = "cnn.fc.weight";
inline const std::string kFcBias = "cnn.fc.bias";

/// He-scaled normal weights, zero biases.
void init_cnn(ParamStore& params, const CnnConfig& config, Rng& rng);

/// [patch_size x patch_size] patch -> [feature_dim]. After five stages the
/// spatial extent is patch_size/32; extents above 1 are globally averaged.
/// The dense layer has no output nonlinearity.
Var cnn_forward(Graph& g, const Tensor& patch, const CnnConfig& config);
Var cnn_forward(Graph& g, Var patch, const CnnConfig& config);

}  // namespace msgru::features
