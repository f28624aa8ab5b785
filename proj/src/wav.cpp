#include "revrir/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "revrir/binary_io.hpp"
#include "revrir/error.hpp"

namespace revrir::corpus {
namespace {

std::uint16_t read_u16(const std::string& b, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) |
                                    (static_cast<unsigned char>(b[at + 1]) << 8));
}

std::uint32_t read_u32(const std::string& b, std::size_t at) {
  return static_cast<std::uint32_t>(read_u16(b, at)) |
         (static_cast<std::uint32_t>(read_u16(b, at + 2)) << 16);
}

void put_u16(std::string& b, std::uint16_t v) {
  b.push_back(static_cast<char>(v & 0xff));
  b.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& b, std::uint32_t v) {
  put_u16(b, static_cast<std::uint16_t>(v & 0xffff));
  put_u16(b, static_cast<std::uint16_t>(v >> 16));
}

}  // namespace

std::string encode_wav(const dsp::Signal& signal) {
  const auto n = static_cast<std::uint32_t>(signal.samples.size());
  const auto rate = static_cast<std::uint32_t>(std::lround(signal.sample_rate));
  std::string b;
  b.reserve(44 + 2 * n);
  b += "RIFF";
  put_u32(b, 36 + 2 * n);
  b += "WAVEfmt ";
  put_u32(b, 16);
  put_u16(b, 1);  // PCM
  put_u16(b, 1);  // mono
  put_u32(b, rate);
  put_u32(b, rate * 2);
  put_u16(b, 2);
  put_u16(b, 16);
  b += "data";
  put_u32(b, 2 * n);
  for (double x : signal.samples) {
    const double q = std::clamp(std::round(x * 32768.0), -32768.0, 32767.0);
    put_u16(b, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  return b;
}

dsp::Signal decode_wav(const std::string& b, double expected_rate) {
  require(b.size() >= 12 && b.compare(0, 4, "RIFF") == 0 && b.compare(8, 4, "WAVE") == 0,
          ErrorKind::Format, "wav: not a RIFF/WAVE file");
  std::size_t pos = 12;
  bool have_fmt = false;
  std::uint16_t channels = 0, bits = 0;
  std::uint32_t rate = 0;
  while (pos + 8 <= b.size()) {
    const std::string id = b.substr(pos, 4);
    const std::uint32_t size = read_u32(b, pos + 4);
    const std::size_t body = pos + 8;
    require(body + size <= b.size(), ErrorKind::Format, "wav: chunk '" + id + "' truncated");
    if (id == "fmt ") {
      require(size >= 16, ErrorKind::Format, "wav: fmt chunk too short");
      const std::uint16_t format = read_u16(b, body);
      channels = read_u16(b, body + 2);
      rate = read_u32(b, body + 4);
      bits = read_u16(b, body + 14);
      require(format == 1, ErrorKind::Format,
              "wav: audio_format " + std::to_string(format) + " is not PCM (1)");
      require(channels == 1, ErrorKind::Format,
              "wav: channels " + std::to_string(channels) + ", expected mono (1)");
      require(bits == 16, ErrorKind::Format,
              "wav: bits_per_sample " + std::to_string(bits) + ", expected 16");
      require(static_cast<double>(rate) == expected_rate, ErrorKind::Format,
              "wav: sample_rate " + std::to_string(rate) + ", expected " +
                  std::to_string(static_cast<long>(expected_rate)));
      have_fmt = true;
    } else if (id == "data") {
      require(have_fmt, ErrorKind::Format, "wav: data chunk before fmt chunk");
      dsp::Signal s;
      s.sample_rate = rate;
      s.samples.resize(size / 2);
      for (std::size_t i = 0; i < s.samples.size(); ++i) {
        const auto v = static_cast<std::int16_t>(read_u16(b, body + 2 * i));
        s.samples[i] = static_cast<double>(v) / 32768.0;
      }
      return s;
    }
    pos = body + size + (size & 1);
  }
  fail(ErrorKind::Format, "wav: no data chunk");
}

dsp::Signal load_wav(const std::string& path, double expected_rate) {
  return decode_wav(io::read_file(path), expected_rate);
}

void save_wav(const dsp::Signal& signal, const std::string& path) {
  io::write_file(path, encode_wav(signal));
}

}  // namespace revrir::corpus
