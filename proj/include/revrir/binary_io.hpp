#pragma once

// Little-endian primitives shared by the RIR bank, checkpoint and embedding
// cache containers.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace revrir::io {

void write_u32(std::ostream& out, std::uint32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
void write_i32(std::ostream& out, std::int32_t v);
void write_f32(std::ostream& out, float v);
void write_f64(std::ostream& out, double v);
void write_f64s(std::ostream& out, std::span<const double> v);
void write_string(std::ostream& out, const std::string& s);

std::uint32_t read_u32(std::istream& in);
std::uint64_t read_u64(std::istream& in);
std::int32_t read_i32(std::istream& in);
float read_f32(std::istream& in);
double read_f64(std::istream& in);
std::vector<double> read_f64s(std::istream& in, std::size_t count);
std::string read_string(std::istream& in);

void write_file(const std::string& path, const std::string& bytes);
std::string read_file(const std::string& path);

/// FNV-1a 64-bit, rendered as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace revrir::io
