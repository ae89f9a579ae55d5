#include "sparselab/flops.hpp"

#include <json.hpp>

#include "sparselab/error.hpp"

namespace sparselab {

double flops_forward(const ModelSpec& spec, const MaskSet* masks, std::size_t batch) {
  if (masks && masks->size() != spec.blocks.size()) throw DimensionError("mask count != layer count");
  double total = 0.0;
  for (std::size_t i = 0; i < spec.blocks.size(); ++i) {
    const Block& blk = spec.blocks[i];
    const LayerSpec& l = blk.layer;
    const double density = masks ? (*masks)[i].density() : 1.0;
    double outputs = 0.0;
    if (l.kind == LayerKind::conv) {
      const double spatial = static_cast<double>(l.out_h * l.out_w);
      total += 2.0 * static_cast<double>(l.fan_in * l.fan_out * l.kernel_h * l.kernel_w) * spatial * density;
      outputs = static_cast<double>(l.fan_out) * spatial;
    } else {
      total += 2.0 * static_cast<double>(l.fan_in * l.fan_out) * density;
      outputs = static_cast<double>(l.fan_out);
    }
    if (blk.relu) total += outputs;
    if (blk.pool != PoolKind::none) {
      const std::size_t ph = (l.out_h - blk.pool_size) / blk.pool_size + 1;
      const std::size_t pw = (l.out_w - blk.pool_size) / blk.pool_size + 1;
      total += static_cast<double>(l.fan_out * ph * pw);
    }
  }
  return total * static_cast<double>(batch);
}

double flops_training_step(const ModelSpec& spec, const MaskSet* masks, std::size_t batch) {
  return 3.0 * flops_forward(spec, masks, batch);
}

const char* to_string(FlopsPhase phase) {
  switch (phase) {
    case FlopsPhase::dense_pretrain: return "dense_pretrain";
    case FlopsPhase::sparse_train: return "sparse_train";
    case FlopsPhase::retrain: return "retrain";
  }
  return "?";
}

void FlopsLedger::add(FlopsPhase phase, double flops) {
  if (!(flops >= 0.0)) throw InputError("FLOPs increments must be nonnegative");
  phases_[static_cast<std::size_t>(phase)] += flops;
}

double FlopsLedger::total() const noexcept {
  double t = 0.0;
  for (double p : phases_) t += p;
  return t;
}

std::string FlopsLedger::to_json() const {
  nlohmann::ordered_json j;
  j["dense_pretrain_flops"] = phase(FlopsPhase::dense_pretrain);
  j["sparse_train_flops"] = phase(FlopsPhase::sparse_train);
  j["retrain_flops"] = phase(FlopsPhase::retrain);
  j["total_flops"] = total();
  j["final_params"] = final_params_;
  return j.dump(2) + "\n";
}

FlopsLedger FlopsLedger::from_json(const std::string& text) {
  FlopsLedger ledger;
  try {
    const auto j = nlohmann::json::parse(text);
    ledger.phases_[0] = j.at("dense_pretrain_flops").get<double>();
    ledger.phases_[1] = j.at("sparse_train_flops").get<double>();
    ledger.phases_[2] = j.at("retrain_flops").get<double>();
    ledger.final_params_ = j.at("final_params").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("flops.json: ") + e.what());
  }
  return ledger;
}

}  // namespace sparselab
