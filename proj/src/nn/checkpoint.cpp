#include "revrir/nn/checkpoint.hpp"

#include <algorithm>
#include <sstream>

#include "revrir/binary_io.hpp"
#include "revrir/error.hpp"

namespace revrir::nn {
namespace {

constexpr char kMagic[4] = {'R', 'V', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;
constexpr char kMeta[4] = {'M', 'E', 'T', 'A'};
constexpr char kParams[4] = {'P', 'A', 'R', 'M'};
constexpr char kOptim[4] = {'O', 'P', 'T', 'M'};

void write_records(std::ostream& out, const std::vector<ArrayRecord>& records) {
  io::write_u32(out, static_cast<std::uint32_t>(records.size()));
  for (const auto& r : records) {
    io::write_string(out, r.name);
    io::write_u32(out, static_cast<std::uint32_t>(r.shape.size()));
    for (auto d : r.shape) io::write_u64(out, d);
    io::write_f64s(out, r.values);
  }
}

std::vector<ArrayRecord> read_records(std::istream& in) {
  const std::uint32_t count = io::read_u32(in);
  std::vector<ArrayRecord> records;
  for (std::uint32_t i = 0; i < count; ++i) {
    ArrayRecord r;
    r.name = io::read_string(in);
    const std::uint32_t rank = io::read_u32(in);
    require(rank <= 8, ErrorKind::Format, "implausible tensor rank in checkpoint");
    for (std::uint32_t k = 0; k < rank; ++k) r.shape.push_back(io::read_u64(in));
    const std::size_t n = numel(r.shape);
    require(n < (1ull << 31), ErrorKind::Format, "implausible tensor size in checkpoint");
    r.values = io::read_f64s(in, n);
    records.push_back(std::move(r));
  }
  return records;
}

void expect_tag(std::istream& in, const char (&tag)[4]) {
  char got[4] = {};
  in.read(got, 4);
  require(in.gcount() == 4 && std::equal(got, got + 4, tag), ErrorKind::Format,
          "checkpoint section '" + std::string(tag, 4) + "' missing");
}

}  // namespace

const ArrayRecord* Checkpoint::find(const std::string& name) const {
  for (const auto& r : params) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::ostringstream out(std::ios::binary);
  out.write(kMagic, 4);
  io::write_u32(out, kVersion);
  out.write(kMeta, 4);
  io::write_u32(out, static_cast<std::uint32_t>(ckpt.meta.size()));
  for (const auto& [k, v] : ckpt.meta) {
    io::write_string(out, k);
    io::write_string(out, v);
  }
  out.write(kParams, 4);
  write_records(out, ckpt.params);
  out.write(kOptim, 4);
  write_records(out, ckpt.optimizer);
  return out.str();
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  expect_tag(in, kMagic);
  require(io::read_u32(in) == kVersion, ErrorKind::Format, "unsupported checkpoint version");
  Checkpoint ckpt;
  expect_tag(in, kMeta);
  const std::uint32_t n = io::read_u32(in);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string k = io::read_string(in);
    ckpt.meta[k] = io::read_string(in);
  }
  expect_tag(in, kParams);
  ckpt.params = read_records(in);
  expect_tag(in, kOptim);
  ckpt.optimizer = read_records(in);
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  io::write_file(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) {
  return deserialize_checkpoint(io::read_file(path));
}

void export_module(const Module& module, const std::string& prefix, Checkpoint& ckpt) {
  std::vector<NamedTensor> params, buffers;
  module.collect(prefix, params, buffers);
  for (const auto* list : {&params, &buffers}) {
    for (const auto& p : *list) {
      ckpt.params.push_back(
          {p.name, p.tensor.shape(), {p.tensor.values().begin(), p.tensor.values().end()}});
    }
  }
}

void import_module(Module& module, const std::string& prefix, const Checkpoint& ckpt) {
  std::vector<NamedTensor> params, buffers;
  module.collect(prefix, params, buffers);
  for (auto* list : {&params, &buffers}) {
    for (auto& p : *list) {
      const ArrayRecord* r = ckpt.find(p.name);
      require(r != nullptr, ErrorKind::Format, "checkpoint lacks parameter '" + p.name + "'");
      require(r->shape == p.tensor.shape(), ErrorKind::Format,
              "checkpoint parameter '" + p.name + "' has shape " + shape_string(r->shape) +
                  ", expected " + shape_string(p.tensor.shape()));
      std::copy(r->values.begin(), r->values.end(), p.tensor.mutable_values().begin());
    }
  }
}

std::string parameter_hash(const Checkpoint& ckpt) {
  std::ostringstream out(std::ios::binary);
  write_records(out, ckpt.params);
  return io::fnv1a_hex(out.str());
}

}  // namespace revrir::nn
