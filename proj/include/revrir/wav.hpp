#pragma once

#include <string>

#include "revrir/dsp.hpp"

namespace revrir::corpus {

/// Required on load: RIFF/WAVE, PCM, 16-bit, mono, 8000 Hz. No resampling or
/// downmixing is attempted; any deviation is a format error naming the field.
dsp::Signal load_wav(const std::string& path, double expected_rate = 8000.0);

/// Writes 16-bit PCM mono. Samples are scaled by 32768 and clipped to the
/// int16 range.
void save_wav(const dsp::Signal& signal, const std::string& path);

std::string encode_wav(const dsp::Signal& signal);
dsp::Signal decode_wav(const std::string& bytes, double expected_rate = 8000.0);

}  // namespace revrir::corpus
