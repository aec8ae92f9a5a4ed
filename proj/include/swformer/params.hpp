#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "swformer/rng.hpp"
#include "swformer/tensor.hpp"

namespace swformer {

// Named trainable tensors in registration order.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor tensor;
  };

  Tensor add(const std::string& name, Tensor tensor);
  // Normal(0, 1/sqrt(fan_in)) weights, the usual choice for GELU/LN stacks.
  Tensor add_weight(const std::string& name, std::size_t fan_in, std::size_t fan_out, Rng& rng);
  Tensor add_constant(const std::string& name, Shape shape, double value);

  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t total_elements() const;

  void zero_grad();

 private:
  std::vector<Entry> entries_;
};

// Binary checkpoint: magic "SWFCKPT", version byte, u32 record count, then per
// record u32 name length, name bytes, u32 rank, u64 dims, f64 values. All
// integers and floats little-endian.
void save_checkpoint(const ParamStore& params, const std::filesystem::path& path);
// Overwrites values of `params` by name; names and shapes must match exactly.
void load_checkpoint(ParamStore& params, const std::filesystem::path& path);

}  // namespace swformer
