#include "fibersense/sim/recording.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "fibersense/errors.hpp"

namespace fibersense::sim {

namespace {

constexpr std::array<char, 4> kMagic{'P', 'O', 'T', 'D'};

template <class T>
void put_le(unsigned char* dst, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    dst[i] = static_cast<unsigned char>(u & 0xffU);
    u = static_cast<U>(u >> 8);
  }
}

template <class T>
T get_le(const unsigned char* src) {
  T value = 0;
  for (std::size_t i = sizeof(T); i-- > 0;) value = static_cast<T>((value << 8) | src[i]);
  return value;
}

std::array<unsigned char, kPotdHeaderBytes> encode_header(const PotdHeader& h) {
  std::array<unsigned char, kPotdHeaderBytes> buf{};
  std::memcpy(buf.data(), kMagic.data(), kMagic.size());
  put_le<std::uint16_t>(buf.data() + 4, kPotdVersion);
  put_le<std::uint16_t>(buf.data() + 6, 0);
  put_le<std::uint32_t>(buf.data() + 8, h.n_bins);
  put_le<std::uint32_t>(buf.data() + 12, std::bit_cast<std::uint32_t>(h.bin_size_m));
  put_le<std::uint32_t>(buf.data() + 16, std::bit_cast<std::uint32_t>(h.pulse_rate_hz));
  put_le<std::uint64_t>(buf.data() + 20, h.n_traces);
  return buf;
}

}  // namespace

PotdWriter::PotdWriter(const std::filesystem::path& path, const PotdHeader& header)
    : out_(path, std::ios::binary | std::ios::trunc), header_(header) {
  if (!out_) throw StreamError("cannot open recording '" + path.string() + "' for writing");
  if (header.n_bins == 0) throw ArgumentError("recording needs n_bins > 0");
  header_.n_traces = 0;
  const auto buf = encode_header(header_);
  out_.write(reinterpret_cast<const char*>(buf.data()), buf.size());
}

PotdWriter::~PotdWriter() {
  try {
    close();
  } catch (...) {
  }
}

void PotdWriter::write(const WaterfallBlock& block) {
  if (!out_.is_open()) throw StreamError("recording already closed");
  if (block.n_bins != header_.n_bins) {
    throw ArgumentError("block has " + std::to_string(block.n_bins) + " bins, recording has " +
                        std::to_string(header_.n_bins));
  }
  std::vector<unsigned char> buf(block.samples.size() * 4);
  for (std::size_t i = 0; i < block.samples.size(); ++i) {
    put_le<std::uint32_t>(buf.data() + 4 * i,
                          std::bit_cast<std::uint32_t>(static_cast<float>(block.samples[i])));
  }
  out_.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out_) throw StreamError("write to recording failed");
  traces_ += block.n_traces;
}

void PotdWriter::close() {
  if (!out_.is_open()) return;
  std::array<unsigned char, 8> count{};
  put_le<std::uint64_t>(count.data(), traces_);
  out_.seekp(20);
  if (out_) out_.write(reinterpret_cast<const char*>(count.data()), count.size());
  out_.clear();
  out_.close();
}

PotdReader::PotdReader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
  if (!in_) throw StreamError("cannot open recording '" + path.string() + "'");
  in_.seekg(0, std::ios::end);
  file_size_ = static_cast<std::uint64_t>(in_.tellg());
  in_.seekg(0);

  std::array<unsigned char, kPotdHeaderBytes> buf{};
  in_.read(reinterpret_cast<char*>(buf.data()), buf.size());
  const auto got = static_cast<std::uint64_t>(in_.gcount());
  if (got < 4 || std::memcmp(buf.data(), kMagic.data(), 4) != 0) {
    throw FormatError("bad magic, not a POTD recording", 0);
  }
  if (got < kPotdHeaderBytes) throw FormatError("truncated POTD header", got);

  const auto version = get_le<std::uint16_t>(buf.data() + 4);
  if (version != kPotdVersion) {
    throw FormatError("unsupported POTD version " + std::to_string(version), 4);
  }
  if (get_le<std::uint16_t>(buf.data() + 6) != 0) throw FormatError("reserved field not zero", 6);
  header_.n_bins = get_le<std::uint32_t>(buf.data() + 8);
  header_.bin_size_m = std::bit_cast<float>(get_le<std::uint32_t>(buf.data() + 12));
  header_.pulse_rate_hz = std::bit_cast<float>(get_le<std::uint32_t>(buf.data() + 16));
  header_.n_traces = get_le<std::uint64_t>(buf.data() + 20);
  if (header_.n_bins == 0) throw FormatError("n_bins is zero", 8);
  if (!std::isfinite(header_.bin_size_m) || !(header_.bin_size_m > 0.0F)) {
    throw FormatError("bin_size_m must be positive", 12);
  }
  if (!std::isfinite(header_.pulse_rate_hz) || !(header_.pulse_rate_hz > 0.0F)) {
    throw FormatError("pulse_rate_hz must be positive", 16);
  }
}

std::optional<WaterfallBlock> PotdReader::read_block(std::size_t max_traces) {
  if (max_traces == 0) throw ArgumentError("read_block needs max_traces > 0");
  const std::uint64_t row_bytes = 4ULL * header_.n_bins;
  const std::uint64_t offset = kPotdHeaderBytes + traces_ * row_bytes;

  std::uint64_t available = (file_size_ - std::min(file_size_, offset)) / row_bytes;
  const bool partial_tail = (file_size_ - std::min(file_size_, offset)) % row_bytes != 0;
  if (header_.n_traces != 0) {
    const std::uint64_t remaining = header_.n_traces - std::min(header_.n_traces, traces_);
    if (available < remaining && available < max_traces) {
      throw FormatError("recording declares " + std::to_string(header_.n_traces) +
                            " traces but data ends early",
                        offset + available * row_bytes);
    }
    available = std::min(available, remaining);
  } else if (available < max_traces && partial_tail) {
    throw FormatError("partial trace row at end of recording", offset + available * row_bytes);
  }
  const std::uint64_t n = std::min<std::uint64_t>(available, max_traces);
  if (n == 0) return std::nullopt;

  std::vector<unsigned char> buf(n * row_bytes);
  in_.seekg(static_cast<std::streamoff>(offset));
  in_.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::uint64_t>(in_.gcount()) != buf.size()) {
    throw FormatError("short read", offset + static_cast<std::uint64_t>(in_.gcount()));
  }

  WaterfallBlock block;
  block.t0_s = static_cast<double>(traces_) / static_cast<double>(header_.pulse_rate_hz);
  block.n_traces = n;
  block.n_bins = header_.n_bins;
  block.samples.resize(n * header_.n_bins);
  for (std::size_t i = 0; i < block.samples.size(); ++i) {
    block.samples[i] = std::bit_cast<float>(get_le<std::uint32_t>(buf.data() + 4 * i));
  }
  traces_ += n;
  return block;
}

}  // namespace fibersense::sim
