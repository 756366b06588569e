#include "msgru/features.hpp"

#include <cmath>

#include "msgru/error.hpp"
#include "msgru/ops.hpp"

namespace msgru::features {

void CnnConfig::validate() const {
  if (channels.size() != kConvStages) {
    throw ConfigError("CNN needs exactly " + std::to_string(kConvStages) + " conv stages, got " +
                      std::to_string(channels.size()));
  }
  for (auto c : channels)
    if (c == 0) throw ConfigError("CNN channel counts must be positive");
  if (feature_dim == 0) throw ConfigError("feature_dim must be positive");
  if (patch_size == 0 || patch_size % 32 != 0) throw ConfigError("patch_size must be a positive multiple of 32");
}

std::string conv_weight_name(std::size_t stage) { return "cnn.conv" + std::to_string(stage) + ".weight"; }
std::string conv_bias_name(std::size_t stage) { return "cnn.conv" + std::to_string(stage) + ".bias"; }

void init_cnn(ParamStore& params, const CnnConfig& config, Rng& rng) {
  config.validate();
  std::size_t in = 1;
  for (std::size_t s = 0; s < kConvStages; ++s) {
    const std::size_t out = config.channels[s];
    Tensor k({out, in, 3, 3});
    const double sd = std::sqrt(2.0 / static_cast<double>(in * 9));
    for (auto& v : k.values()) v = normal(rng, 0.0, sd);
    params[conv_weight_name(s + 1)] = std::move(k);
    params[conv_bias_name(s + 1)] = Tensor::zeros({out});
    in = out;
  }
  Tensor w({config.feature_dim, in});
  const double sd = std::sqrt(2.0 / static_cast<double>(in));
  for (auto& v : w.values()) v = normal(rng, 0.0, sd);
  params[kFcWeight] = std::move(w);
  params[kFcBias] = Tensor::zeros({config.feature_dim});
}

Var cnn_forward(Graph& g, const Tensor& patch, const CnnConfig& config) {
  return cnn_forward(g, g.constant(patch), config);
}

Var cnn_forward(Graph& g, Var patch, const CnnConfig& config) {
  const auto& shape = patch.shape();
  if (shape.size() != 2 || shape[0] != config.patch_size || shape[1] != config.patch_size) {
    throw DimensionError("cnn_forward: expected a " + std::to_string(config.patch_size) + "x" +
                         std::to_string(config.patch_size) + " patch, got " + num::to_string(shape));
  }
  Var x = num::reshape(patch, {1, config.patch_size, config.patch_size});
  for (std::size_t s = 1; s <= kConvStages; ++s) {
    x = num::conv2d(x, g.parameter(conv_weight_name(s)), g.parameter(conv_bias_name(s)));
    x = num::relu(x);
    x = num::maxpool2(x);
  }
  const auto& xs = x.shape();
  x = (xs[1] == 1 && xs[2] == 1) ? num::reshape(x, {xs[0]}) : num::global_average(x);
  return num::add(num::matvec(g.parameter(kFcWeight), x), g.parameter(kFcBias));
}

}  // namespace msgru::features
