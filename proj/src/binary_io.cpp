#include "revrir/binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "revrir/error.hpp"

namespace revrir {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Validation: return "VALIDATION";
    case ErrorKind::Geometry: return "GEOMETRY";
    case ErrorKind::Sampling: return "SAMPLING";
    case ErrorKind::Lookup: return "LOOKUP";
    case ErrorKind::Format: return "FORMAT";
    case ErrorKind::Config: return "CONFIG";
    case ErrorKind::State: return "STATE";
    case ErrorKind::Data: return "DATA";
    case ErrorKind::Feature: return "FEATURE";
    case ErrorKind::Io: return "IO";
    case ErrorKind::Numeric: return "NUMERIC";
  }
  return "UNKNOWN";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Data:
    case ErrorKind::Feature:
    case ErrorKind::Sampling:
    case ErrorKind::Io:
      return 3;
    case ErrorKind::Numeric:
      return 4;
    default:
      return 2;
  }
}

namespace io {
namespace {

static_assert(std::endian::native == std::endian::little,
              "containers are written in native little-endian order");

template <typename T>
void put(std::ostream& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.write(buf, sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  char buf[sizeof(T)];
  in.read(buf, sizeof(T));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(T))) {
    fail(ErrorKind::Format, "unexpected end of file");
  }
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace

void write_u32(std::ostream& out, std::uint32_t v) { put(out, v); }
void write_u64(std::ostream& out, std::uint64_t v) { put(out, v); }
void write_i32(std::ostream& out, std::int32_t v) { put(out, v); }
void write_f32(std::ostream& out, float v) { put(out, v); }
void write_f64(std::ostream& out, double v) { put(out, v); }

void write_f64s(std::ostream& out, std::span<const double> v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t read_u32(std::istream& in) { return get<std::uint32_t>(in); }
std::uint64_t read_u64(std::istream& in) { return get<std::uint64_t>(in); }
std::int32_t read_i32(std::istream& in) { return get<std::int32_t>(in); }
float read_f32(std::istream& in) { return get<float>(in); }
double read_f64(std::istream& in) { return get<double>(in); }

std::vector<double> read_f64s(std::istream& in, std::size_t count) {
  std::vector<double> v(count);
  const auto bytes = static_cast<std::streamsize>(count * sizeof(double));
  in.read(reinterpret_cast<char*>(v.data()), bytes);
  if (in.gcount() != bytes) fail(ErrorKind::Format, "unexpected end of file");
  return v;
}

std::string read_string(std::istream& in) {
  const std::uint32_t n = read_u32(in);
  if (n > (1u << 20)) fail(ErrorKind::Format, "string record too long");
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (in.gcount() != static_cast<std::streamsize>(n)) {
    fail(ErrorKind::Format, "unexpected end of file");
  }
  return s;
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open for writing: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::Io, "write failed: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Data, "missing input file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace io
}  // namespace revrir
