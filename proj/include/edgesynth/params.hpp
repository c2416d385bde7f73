#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "edgesynth/autodiff.hpp"
#include "edgesynth/rng.hpp"
#include "edgesynth/tensor.hpp"

namespace edgesynth {

struct Param {
  Tensor value;
  bool trainable = true;
  Tensor adam_m;  // allocated on first optimizer step
  Tensor adam_v;
};

// Named trainable tensors plus optimizer state. Name order is insertion
// order and fixes the deterministic update / serialization order.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor init, bool trainable = true);
  bool has(const std::string& name) const { return map_.count(name) != 0; }
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  const std::vector<std::string>& names() const { return order_; }
  size_t size() const { return order_.size(); }

  void set_trainable(const std::string& name, bool trainable) {
    at(name).trainable = trainable;
  }

 private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, Param> map_;
};

// Deterministic initializers; draws are rounded through f32 so a freshly
// initialized store survives the f32 checkpoint format bit-exactly.
Tensor init_uniform(Rng& rng, std::vector<int> shape, double bound);
Tensor init_linear_weight(Rng& rng, int fan_in, int fan_out);

// Checkpoint directory: one NTF1 file per tensor plus
//   checkpoint.tsv: name<TAB>file<TAB>shape<TAB>trainable{0|1}
void save_checkpoint(const ParamStore& store, const std::filesystem::path& dir);
ParamStore load_checkpoint(const std::filesystem::path& dir);

// Fatal (IoError naming the first offending tensor) if `loaded` does not
// carry exactly the tensors and shapes of `expected`.
void check_compatible(const ParamStore& loaded, const ParamStore& expected);

// u64 metadata (config hashes) embedded as an 8-element byte tensor so it
// travels inside the ordinary checkpoint format.
void store_meta_u64(ParamStore& store, const std::string& name, uint64_t v);
std::optional<uint64_t> read_meta_u64(const ParamStore& store,
                                      const std::string& name);

// Per-forward cache of autodiff leaves over a store. Reusing the leaf for a
// given name within one graph makes shared weights accumulate gradients.
class GraphParams {
 public:
  explicit GraphParams(const ParamStore& store, bool freeze_all = false)
      : store_(&store), freeze_all_(freeze_all) {}

  ag::VPtr operator[](const std::string& name);

  // Adds leaf gradients of trainable params into `grads` (name-keyed).
  void accumulate_grads(std::map<std::string, Tensor>& grads) const;

 private:
  const ParamStore* store_;
  bool freeze_all_;
  std::map<std::string, ag::VPtr> leaves_;
};

using GradMap = std::map<std::string, Tensor>;

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One Adam update over the trainable tensors present in `grads`, applied in
// store insertion order. `t` is the 1-based step count.
void adam_step(ParamStore& store, const GradMap& grads, double lr, int64_t t,
               const AdamConfig& cfg = {});

}  // namespace edgesynth
