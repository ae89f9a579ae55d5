#include "sparselab/model.hpp"

#include <cmath>
#include <random>

#include "sparselab/error.hpp"
#include "sparselab/ops.hpp"
#include "sparselab/rng.hpp"

namespace sparselab {

const char* to_string(LayerKind kind) { return kind == LayerKind::conv ? "conv" : "linear"; }

Shape LayerSpec::weight_dims() const {
  if (kind == LayerKind::conv) return {fan_out, fan_in, kernel_h, kernel_w};
  return {fan_out, fan_in};
}

void ModelSpec::validate() const {
  if (blocks.empty()) throw InputError("model has no layers");
  if (classes < 2) throw InputError("model needs at least two classes");
  std::size_t c = in_channels, h = in_h, w = in_w;
  bool spatial = true;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const Block& blk = blocks[i];
    const LayerSpec& l = blk.layer;
    const std::string where = "layer '" + l.name + "'";
    if (l.fan_in == 0 || l.fan_out == 0) throw DimensionError(where + " has an empty shape");
    if (l.kind == LayerKind::conv) {
      if (!spatial) throw DimensionError(where + ": conv after a linear layer");
      if (l.fan_in != c) throw DimensionError(where + ": expects " + std::to_string(l.fan_in) + " channels, got " + std::to_string(c));
      if (l.stride == 0 || h + 2 * l.padding < l.kernel_h || w + 2 * l.padding < l.kernel_w ||
          (h + 2 * l.padding - l.kernel_h) % l.stride != 0 || (w + 2 * l.padding - l.kernel_w) % l.stride != 0) {
        throw DimensionError(where + ": non-integral output size");
      }
      h = (h + 2 * l.padding - l.kernel_h) / l.stride + 1;
      w = (w + 2 * l.padding - l.kernel_w) / l.stride + 1;
      if (l.out_h != h || l.out_w != w) throw DimensionError(where + ": recorded output size disagrees with geometry");
      c = l.fan_out;
      if (blk.pool != PoolKind::none) {
        if (blk.pool_size == 0 || h < blk.pool_size || w < blk.pool_size) throw DimensionError(where + ": pool window larger than map");
        h = (h - blk.pool_size) / blk.pool_size + 1;
        w = (w - blk.pool_size) / blk.pool_size + 1;
      }
    } else {
      if (l.kernel_h != 1 || l.kernel_w != 1) throw DimensionError(where + ": linear layers have 1x1 extent");
      if (blk.pool != PoolKind::none) throw DimensionError(where + ": pooling after a linear layer");
      const std::size_t features = c * h * w;
      if (l.fan_in != features) throw DimensionError(where + ": expects " + std::to_string(l.fan_in) + " features, got " + std::to_string(features));
      c = l.fan_out;
      h = w = 1;
      spatial = false;
    }
  }
  if (c * h * w != classes) throw DimensionError("final layer emits " + std::to_string(c * h * w) + " values for " + std::to_string(classes) + " classes");
}

Model::Model(ModelSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  for (const auto& blk : spec_.blocks) {
    weights_.emplace_back(blk.layer.weight_dims());
    biases_.emplace_back(Shape{blk.layer.fan_out});
  }
}

Var Model::forward(Tape& tape, Var x, const MaskSet* masks, bool param_grads) {
  if (masks && masks->size() != weights_.size()) throw DimensionError("mask count != layer count");
  Var h = x;
  for (std::size_t i = 0; i < spec_.blocks.size(); ++i) {
    const Block& blk = spec_.blocks[i];
    const LayerMask* m = masks ? &(*masks)[i] : nullptr;
    Var w = param_grads ? tape.parameter(weights_[i]) : tape.constant(weights_[i]);
    Var b = param_grads ? tape.parameter(biases_[i]) : tape.constant(biases_[i]);
    if (blk.layer.kind == LayerKind::conv) {
      h = conv2d(h, w, b, blk.layer.stride, blk.layer.padding, m);
    } else {
      if (h.value().rank() != 2) h = flatten(h);
      h = linear(h, w, b, m);
    }
    if (blk.relu) h = relu(h);
    if (blk.pool == PoolKind::max) h = max_pool2d(h, blk.pool_size, blk.pool_size);
    if (blk.pool == PoolKind::avg) h = avg_pool2d(h, blk.pool_size, blk.pool_size);
  }
  return h;
}

Tensor Model::predict(const Tensor& x, const MaskSet* masks) {
  Tape tape;
  return forward(tape, tape.constant(x), masks, false).value();
}

std::vector<ParamSlot> Model::parameters(const MaskSet* masks) {
  if (masks && masks->size() != weights_.size()) throw DimensionError("mask count != layer count");
  std::vector<ParamSlot> out;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    out.push_back({&weights_[i], masks ? &(*masks)[i] : nullptr});
    out.push_back({&biases_[i], nullptr});
  }
  return out;
}

std::vector<std::pair<std::string, Tensor*>> Model::named_parameters() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    out.emplace_back(spec_.blocks[i].layer.name + ".weight", &weights_[i]);
    out.emplace_back(spec_.blocks[i].layer.name + ".bias", &biases_[i]);
  }
  return out;
}

void Model::zero_grad() {
  for (auto& w : weights_) w.zero_grad();
  for (auto& b : biases_) b.zero_grad();
}

void Model::apply_masks(const MaskSet& masks) {
  if (masks.size() != weights_.size()) throw DimensionError("mask count != layer count");
  for (std::size_t i = 0; i < weights_.size(); ++i) masks[i].apply(weights_[i].values());
}

std::size_t Model::maskable_param_count() const noexcept {
  std::size_t n = 0;
  for (const auto& w : weights_) n += w.numel();
  return n;
}

std::size_t Model::total_param_count() const noexcept {
  std::size_t n = maskable_param_count();
  for (const auto& b : biases_) n += b.numel();
  return n;
}

std::vector<LayerSpec> layer_shapes(const ModelSpec& spec) {
  std::vector<LayerSpec> out;
  out.reserve(spec.blocks.size());
  for (const auto& blk : spec.blocks) out.push_back(blk.layer);
  return out;
}

std::vector<LayerSpec> layer_shapes(const Model& model) { return layer_shapes(model.spec()); }

void he_initialize(Model& model, std::uint64_t seed) {
  Rng rng = make_rng(seed, "he-init");
  const auto& blocks = model.spec().blocks;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& l = blocks[i].layer;
    const double fan_in = static_cast<double>(l.fan_in * l.kernel_h * l.kernel_w);
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    for (auto& v : model.weights()[i].values()) v = static_cast<Scalar>(dist(rng));
    model.biases()[i].fill(Scalar{0});
  }
}

ModelSpec mlp_spec(std::size_t input_dim, const std::vector<std::size_t>& hidden_dims, std::size_t classes) {
  ModelSpec spec;
  spec.in_channels = input_dim;
  spec.classes = classes;
  std::size_t prev = input_dim;
  for (std::size_t i = 0; i <= hidden_dims.size(); ++i) {
    const bool head = i == hidden_dims.size();
    Block blk;
    blk.layer.name = head ? "fc_out" : "fc" + std::to_string(i + 1);
    blk.layer.kind = LayerKind::linear;
    blk.layer.fan_in = prev;
    blk.layer.fan_out = head ? classes : hidden_dims[i];
    blk.relu = !head;
    spec.blocks.push_back(blk);
    prev = blk.layer.fan_out;
  }
  spec.validate();
  return spec;
}

Model build_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden_dims, std::size_t classes,
                std::uint64_t seed) {
  Model model(mlp_spec(input_dim, hidden_dims, classes));
  he_initialize(model, seed);
  return model;
}

ModelSpec miniconvnet_spec(std::size_t in_channels, std::size_t in_h, std::size_t in_w,
                           const std::vector<std::size_t>& channels, std::size_t kernel, std::size_t classes) {
  if (kernel == 0 || kernel % 2 == 0) throw InputError("miniconvnet kernel must be odd");
  ModelSpec spec;
  spec.in_channels = in_channels;
  spec.in_h = in_h;
  spec.in_w = in_w;
  spec.classes = classes;
  std::size_t c = in_channels, h = in_h, w = in_w;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    Block blk;
    blk.layer.name = "conv" + std::to_string(i + 1);
    blk.layer.kind = LayerKind::conv;
    blk.layer.fan_in = c;
    blk.layer.fan_out = channels[i];
    blk.layer.kernel_h = blk.layer.kernel_w = kernel;
    blk.layer.stride = 1;
    blk.layer.padding = kernel / 2;
    blk.layer.out_h = h;
    blk.layer.out_w = w;
    if (h >= 2 && w >= 2) {
      blk.pool = PoolKind::max;
      blk.pool_size = 2;
      h = (h - 2) / 2 + 1;
      w = (w - 2) / 2 + 1;
    }
    c = channels[i];
    spec.blocks.push_back(blk);
  }
  Block head;
  head.layer.name = "fc_out";
  head.layer.kind = LayerKind::linear;
  head.layer.fan_in = c * h * w;
  head.layer.fan_out = classes;
  head.relu = false;
  spec.blocks.push_back(head);
  spec.validate();
  return spec;
}

Model build_miniconvnet(std::size_t in_channels, std::size_t in_h, std::size_t in_w,
                        const std::vector<std::size_t>& channels, std::size_t kernel, std::size_t classes,
                        std::uint64_t seed) {
  Model model(miniconvnet_spec(in_channels, in_h, in_w, channels, kernel, classes));
  he_initialize(model, seed);
  return model;
}

}  // namespace sparselab
