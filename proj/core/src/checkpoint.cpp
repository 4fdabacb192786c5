// SPDX-License-Identifier: Apache-2.0
#include "hiba/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <zlib.h>

#include "hiba/errors.hpp"

namespace hiba {

namespace fs = std::filesystem;

namespace {

template <typename U>
U to_little(U v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<std::uint8_t, sizeof(U)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<U>(bytes);
  }
  return v;
}

class Writer {
 public:
  template <typename U>
  void put(U v) {
    v = to_little(v);
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes.insert(bytes.end(), p, p + sizeof(U));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes.insert(bytes.end(), p, p + n);
  }
  void put_string32(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    put_bytes(s.data(), s.size());
  }
  template <typename T>
  void put_values(std::span<const T> values) {
    for (const T v : values) put(v);
  }

  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

  template <typename U>
  U get() {
    U v;
    std::memcpy(&v, take(sizeof(U)), sizeof(U));
    return to_little(v);
  }
  std::string get_string(std::size_t n) {
    const auto* p = take(n);
    return std::string(reinterpret_cast<const char*>(p), n);
  }
  template <typename T>
  std::vector<T> get_values(std::size_t n) {
    require_available(n, sizeof(T));
    std::vector<T> out(n);
    for (auto& v : out) v = get<T>();
    return out;
  }
  [[nodiscard]] bool done() const { return pos_ == size_; }

 private:
  void require_available(std::size_t n, std::size_t width) const {
    if (width != 0 && n > (size_ - pos_) / width) throw FormatError("checkpoint: truncated data");
  }
  const std::uint8_t* take(std::size_t n) {
    require_available(n, 1);
    const auto* p = data_ + pos_;
    pos_ += n;
    return p;
  }

  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(const std::uint8_t* data, std::size_t n) {
  return static_cast<std::uint32_t>(::crc32(0L, data, static_cast<uInt>(n)));
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint '" + path.string() + "'");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

// Checks magic, version, crc; returns the value width.
std::uint32_t check_header(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < sizeof(kCheckpointMagic) + 12) throw FormatError("checkpoint: file too short");
  if (std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw FormatError("checkpoint: bad magic");
  }
  Reader r(bytes.data() + sizeof(kCheckpointMagic), 8);
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto width = r.get<std::uint32_t>();
  if (width != 4 && width != 8) throw FormatError("checkpoint: bad value width");
  const std::size_t body = bytes.size() - 4;
  Reader tail(bytes.data() + body, 4);
  if (tail.get<std::uint32_t>() != crc_of(bytes.data(), body)) {
    throw FormatError("checkpoint: checksum mismatch");
  }
  return width;
}

}  // namespace

template <typename T>
std::vector<std::uint8_t> encode_checkpoint(const TrainState<T>& state) {
  Writer w;
  w.put_bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint32_t>(sizeof(T));
  const std::string config = state.config.serialize();
  w.put<std::uint64_t>(config.size());
  w.put_bytes(config.data(), config.size());
  w.put<std::uint64_t>(state.step);
  w.put<std::uint64_t>(state.rng.key());
  w.put<std::uint64_t>(state.rng.counter());
  const auto params = state.model.parameters();
  w.put<std::uint64_t>(params.size());
  for (const auto& [name, p] : params) {
    w.put_string32(name);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p.shape().size()));
    for (auto d : p.shape()) w.put<std::uint64_t>(d);
    w.put_values<T>(p.data());
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    w.put_values<T>(state.moments.m[i]);
    w.put_values<T>(state.moments.v[i]);
  }
  w.put<std::uint32_t>(crc_of(w.bytes.data(), w.bytes.size()));
  return std::move(w.bytes);
}

template <typename T>
TrainState<T> decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  const std::uint32_t width = check_header(bytes);
  if (width != sizeof(T)) {
    throw FormatError("checkpoint: stores " + std::to_string(width * 8) + "-bit values, expected " +
                      std::to_string(sizeof(T) * 8) + "-bit");
  }
  const std::size_t header = sizeof(kCheckpointMagic) + 8;
  Reader r(bytes.data() + header, bytes.size() - header - 4);

  const auto config_len = r.get<std::uint64_t>();
  TrainConfig config;
  try {
    config = TrainConfig::from_kv(KeyValues::parse(r.get_string(config_len), "checkpoint"));
  } catch (const ContractViolation& e) {
    throw FormatError(std::string("checkpoint: bad config: ") + e.what());
  }
  const auto step = r.get<std::uint64_t>();
  const auto key = r.get<std::uint64_t>();
  const auto counter = r.get<std::uint64_t>();

  TrainState<T> state(config);
  auto params = state.model.parameters();
  const auto count = r.get<std::uint64_t>();
  if (count != params.size()) throw FormatError("checkpoint: tensor count does not match the config");
  std::vector<std::vector<T>> values(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto name = r.get_string(r.get<std::uint32_t>());
    if (name != params[i].first) throw FormatError("checkpoint: unexpected tensor '" + name + "'");
    const auto ndim = r.get<std::uint32_t>();
    ad::Shape shape;
    for (std::uint32_t d = 0; d < ndim; ++d) shape.push_back(r.get<std::uint64_t>());
    if (shape != params[i].second.shape()) {
      throw FormatError("checkpoint: tensor '" + name + "' has shape " + ad::to_string(shape));
    }
    values[i] = r.get_values<T>(params[i].second.numel());
  }
  AdamMoments<T> moments;
  for (const auto& [name, p] : params) {
    moments.m.push_back(r.get_values<T>(p.numel()));
    moments.v.push_back(r.get_values<T>(p.numel()));
  }
  if (!r.done()) throw FormatError("checkpoint: trailing bytes");

  for (std::size_t i = 0; i < params.size(); ++i) {
    std::ranges::copy(values[i], params[i].second.mutable_data().begin());
  }
  state.moments = std::move(moments);
  state.step = step;
  state.rng = CounterRng(key, counter);
  return state;
}

template <typename T>
void save_checkpoint(const fs::path& path, const TrainState<T>& state) {
  const auto bytes = encode_checkpoint(state);
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open checkpoint '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out.flush()) throw FormatError("write to '" + path.string() + "' failed");
}

template <typename T>
TrainState<T> load_checkpoint(const fs::path& path) {
  try {
    return decode_checkpoint<T>(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::uint32_t checkpoint_value_bytes(const fs::path& path) { return check_header(read_file(path)); }

template std::vector<std::uint8_t> encode_checkpoint(const TrainState<float>&);
template std::vector<std::uint8_t> encode_checkpoint(const TrainState<double>&);
template TrainState<float> decode_checkpoint(const std::vector<std::uint8_t>&);
template TrainState<double> decode_checkpoint(const std::vector<std::uint8_t>&);
template void save_checkpoint(const fs::path&, const TrainState<float>&);
template void save_checkpoint(const fs::path&, const TrainState<double>&);
template TrainState<float> load_checkpoint(const fs::path&);
template TrainState<double> load_checkpoint(const fs::path&);

}  // namespace hiba
