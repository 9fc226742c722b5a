#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>

#include "fibersense/sim/waterfall.hpp"

namespace fibersense::sim {

// POTD v1, little-endian:
//   offset  0  "POTD"
//   offset  4  u16 version (1)
//   offset  6  u16 reserved (0)
//   offset  8  u32 n_bins
//   offset 12  f32 bin_size_m
//   offset 16  f32 pulse_rate_hz
//   offset 20  u64 n_traces (0 = unknown / streamed)
//   offset 28  rows of n_bins f32 values
inline constexpr std::size_t kPotdHeaderBytes = 28;
inline constexpr std::uint16_t kPotdVersion = 1;

struct PotdHeader {
  std::uint32_t n_bins = 0;
  float bin_size_m = 1.0F;
  float pulse_rate_hz = 1000.0F;
  std::uint64_t n_traces = 0;

  bool operator==(const PotdHeader&) const = default;
};

class PotdWriter {
 public:
  /// Writes the header immediately with n_traces = 0; close() patches in the
  /// final count when the file is seekable.
  PotdWriter(const std::filesystem::path& path, const PotdHeader& header);
  ~PotdWriter();

  PotdWriter(const PotdWriter&) = delete;
  PotdWriter& operator=(const PotdWriter&) = delete;

  /// Samples are narrowed to f32. Throws ArgumentError on a bin-count mismatch.
  void write(const WaterfallBlock& block);
  void close();

  std::uint64_t traces_written() const { return traces_; }

 private:
  std::ofstream out_;
  PotdHeader header_;
  std::uint64_t traces_ = 0;
};

class PotdReader {
 public:
  /// Throws FormatError for a short, foreign or unsupported header.
  explicit PotdReader(const std::filesystem::path& path);

  const PotdHeader& header() const { return header_; }

  /// Next block of at most `max_traces` rows, or nullopt at the end of data.
  /// Throws FormatError naming the offset of a partial row.
  std::optional<WaterfallBlock> read_block(std::size_t max_traces);

  std::uint64_t traces_read() const { return traces_; }

 private:
  std::ifstream in_;
  PotdHeader header_;
  std::uint64_t file_size_ = 0;
  std::uint64_t traces_ = 0;
};

}  // namespace fibersense::sim
