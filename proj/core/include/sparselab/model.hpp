#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sparselab/mask.hpp"
#include "sparselab/optim.hpp"
#include "sparselab/tape.hpp"

namespace sparselab {

enum class LayerKind { linear, conv };
enum class PoolKind { none, max, avg };

const char* to_string(LayerKind kind);

// Shape of one maskable weight tensor. For linear layers the kernel extent is
// 1x1 and the output spatial size is 1x1.
struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::linear;
  std::size_t fan_in = 0;   // n^{l-1}: input features / channels
  std::size_t fan_out = 0;  // n^l: output features / channels
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t out_h = 1;  // output spatial size (conv only)
  std::size_t out_w = 1;

  std::size_t param_count() const noexcept { return fan_in * fan_out * kernel_h * kernel_w; }
  Shape weight_dims() const;
};

// One maskable layer plus the activation plan that follows it.
struct Block {
  LayerSpec layer;
  bool relu = true;
  PoolKind pool = PoolKind::none;
  std::size_t pool_size = 2;
};

struct ModelSpec {
  std::size_t in_channels = 1;
  std::size_t in_h = 1;
  std::size_t in_w = 1;
  std::size_t classes = 2;
  std::vector<Block> blocks;

  // Checks that adjacent blocks compose and the head emits `classes` logits.
  void validate() const;
  std::size_t input_numel() const noexcept { return in_channels * in_h * in_w; }
};

// Feed-forward stack of conv / linear blocks. Parameters are plain tensors
// owned by the model; masks are supplied per forward call.
class Model {
 public:
  explicit Model(ModelSpec spec);

  const ModelSpec& spec() const noexcept { return spec_; }
  std::size_t layer_count() const noexcept { return weights_.size(); }

  std::vector<Tensor>& weights() noexcept { return weights_; }
  const std::vector<Tensor>& weights() const noexcept { return weights_; }
  std::vector<Tensor>& biases() noexcept { return biases_; }
  const std::vector<Tensor>& biases() const noexcept { return biases_; }

  // x is [B, C, H, W] (or [B, features] for models whose first block is
  // linear). Returns logits [B, classes]. With param_grads = false the
  // weights enter the tape as constants and receive no gradient.
  Var forward(Tape& tape, Var x, const MaskSet* masks = nullptr, bool param_grads = true);
  // Forward pass without gradient tracking.
  Tensor predict(const Tensor& x, const MaskSet* masks = nullptr);

  // Weights then bias of each layer, in network order; weight slots carry
  // their mask.
  std::vector<ParamSlot> parameters(const MaskSet* masks = nullptr);
  // "<layer>.weight" / "<layer>.bias" names paired with their tensors.
  std::vector<std::pair<std::string, Tensor*>> named_parameters();

  void zero_grad();
  // Zeroes every masked-out weight.
  void apply_masks(const MaskSet& masks);

  std::size_t maskable_param_count() const noexcept;
  std::size_t total_param_count() const noexcept;

 private:
  ModelSpec spec_;
  std::vector<Tensor> weights_;
  std::vector<Tensor> biases_;
};

// Maskable weight tensors in network order.
std::vector<LayerSpec> layer_shapes(const Model& model);
std::vector<LayerSpec> layer_shapes(const ModelSpec& spec);

// Normal(0, sqrt(2 / fan_in)) weights, zero biases, deterministic in `seed`.
void he_initialize(Model& model, std::uint64_t seed);

ModelSpec mlp_spec(std::size_t input_dim, const std::vector<std::size_t>& hidden_dims, std::size_t classes);
Model build_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden_dims, std::size_t classes,
                std::uint64_t seed);

// conv(kernel, stride 1, same padding) + ReLU + 2x2 max pool per entry of
// `channels` (pooling is skipped once the feature map is smaller than 2x2),
// then flatten + linear head.
ModelSpec miniconvnet_spec(std::size_t in_channels, std::size_t in_h, std::size_t in_w,
                           const std::vector<std::size_t>& channels, std::size_t kernel, std::size_t classes);
Model build_miniconvnet(std::size_t in_channels, std::size_t in_h, std::size_t in_w,
                        const std::vector<std::size_t>& channels, std::size_t kernel, std::size_t classes,
                        std::uint64_t seed);

}  // namespace sparselab
