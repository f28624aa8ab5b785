#pragma once

// Checkpoint container, little-endian:
//   "RVCK" u32 version=1
//   section "META": u32 count, count x {string key, string value}
//   section "PARM": u32 count, count x record
//   section "OPTM": u32 count, count x record
// where string = u32 byte length + UTF-8 bytes and
//   record = string name, u32 rank, rank x u64 dims, prod(dims) x f64.
// Parameters and batch-norm running statistics share the PARM section.

#include <map>
#include <string>
#include <vector>

#include "revrir/nn/layers.hpp"
#include "revrir/nn/tensor.hpp"

namespace revrir::nn {

struct ArrayRecord {
  std::string name;
  Shape shape;
  std::vector<double> values;

  friend bool operator==(const ArrayRecord&, const ArrayRecord&) = default;
};

struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<ArrayRecord> params;
  std::vector<ArrayRecord> optimizer;

  const ArrayRecord* find(const std::string& name) const;
  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Appends every parameter and buffer of `module` under `prefix`.
void export_module(const Module& module, const std::string& prefix, Checkpoint& ckpt);

/// Copies values for every parameter and buffer of `module` from `ckpt`.
/// Missing names or shape mismatches are format errors.
void import_module(Module& module, const std::string& prefix, const Checkpoint& ckpt);

/// FNV-1a of the parameter section, used to key caches and to verify that
/// frozen weights are untouched.
std::string parameter_hash(const Checkpoint& ckpt);

}  // namespace revrir::nn
