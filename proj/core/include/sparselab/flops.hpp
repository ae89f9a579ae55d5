#pragma once

#include <array>
#include <cstddef>
#include <string>

#include "sparselab/mask.hpp"
#include "sparselab/model.hpp"

namespace sparselab {

// Forward FLOPs for `batch` samples under the given masks (null = dense):
//   linear: 2 * n_in * n_out * density_l
//   conv:   2 * Cin * Cout * kh * kw * H' * W' * density_l
//   ReLU and pooling: 1 per output element.
double flops_forward(const ModelSpec& spec, const MaskSet* masks, std::size_t batch = 1);

// Forward + backward-to-inputs + backward-to-weights: 3 x forward.
double flops_training_step(const ModelSpec& spec, const MaskSet* masks, std::size_t batch = 1);

enum class FlopsPhase : std::size_t { dense_pretrain = 0, sparse_train = 1, retrain = 2 };
inline constexpr std::size_t kFlopsPhaseCount = 3;

const char* to_string(FlopsPhase phase);

// Cumulative training FLOPs per phase. Entries only grow.
class FlopsLedger {
 public:
  void add(FlopsPhase phase, double flops);
  double phase(FlopsPhase phase) const noexcept { return phases_[static_cast<std::size_t>(phase)]; }
  double total() const noexcept;

  // Parameter count at final sparsity: surviving weights plus biases.
  void set_final_params(std::size_t count) noexcept { final_params_ = count; }
  std::size_t final_params() const noexcept { return final_params_; }

  // Flat JSON object: dense_pretrain_flops, sparse_train_flops, retrain_flops,
  // total_flops, final_params.
  std::string to_json() const;
  static FlopsLedger from_json(const std::string& text);

 private:
  std::array<double, kFlopsPhaseCount> phases_{};
  std::size_t final_params_ = 0;
};

}  // namespace sparselab
