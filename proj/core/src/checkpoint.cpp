#include "auecrl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "auecrl/errors.hpp"

namespace auecrl {

namespace {

constexpr char kMagic[8] = {'A', 'U', 'E', 'C', 'R', 'L', '1', '\n'};

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

void put_f64(std::ostream& out, double v) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(b, 8);
}

std::uint32_t get_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw FormatError(path + ": truncated checkpoint");
  }
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

double get_f64(std::istream& in, const std::string& path) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) {
    throw FormatError(path + ": truncated checkpoint");
  }
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | b[i];
  return std::bit_cast<double>(bits);
}

void put_tensor(std::ostream& out, const std::string& name, const Tensor& t) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (std::int64_t d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
  for (double v : t.values()) put_f64(out, v);
}

struct RawTensor {
  std::string name;
  Tensor value;
};

RawTensor get_tensor(std::istream& in, const std::string& path) {
  RawTensor rt;
  const std::uint32_t name_len = get_u32(in, path);
  if (name_len > 4096) throw FormatError(path + ": implausible tensor name length");
  rt.name.resize(name_len);
  if (!in.read(rt.name.data(), name_len)) throw FormatError(path + ": truncated checkpoint");
  const std::uint32_t rank = get_u32(in, path);
  if (rank > 2) throw FormatError(path + ": unsupported tensor rank");
  std::vector<std::int64_t> shape;
  std::int64_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    const std::uint32_t d = get_u32(in, path);
    if (d == 0) throw FormatError(path + ": zero dimension in tensor '" + rt.name + "'");
    shape.push_back(static_cast<std::int64_t>(d));
    count *= d;
  }
  std::vector<double> data(static_cast<size_t>(count));
  for (double& v : data) v = get_f64(in, path);
  rt.value = Tensor::with_shape(std::move(shape), std::move(data));
  return rt;
}

}  // namespace

std::uint64_t config_hash(const ModelConfig& config) {
  std::ostringstream os;
  os << config.input_dim << '|' << config.d_e << '|' << config.d_a << '|' << config.d
     << '|' << config.num_expressions << '|' << config.num_aus << '|'
     << (config.use_biases ? 1 : 0) << '|'
     << (config.attention_norm == AttentionNorm::kSoftmax ? "softmax" : "ratio");
  const std::string s = os.str();
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

void save_checkpoint(const ModelState& state, const CheckpointMeta& meta,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IOError("cannot open '" + path + "' for writing");
  out.write(kMagic, sizeof kMagic);
  put_u32(out, static_cast<std::uint32_t>(state.param_count() + 3));
  put_tensor(out, "meta.version", Tensor::vector({static_cast<double>(meta.version)}));
  put_tensor(out, "meta.stage", Tensor::vector({static_cast<double>(meta.stage)}));
  put_tensor(out, "meta.config_hash",
             Tensor::vector({static_cast<double>(meta.config_hash >> 32),
                             static_cast<double>(meta.config_hash & 0xffffffffULL)}));
  for (size_t i = 0; i < state.param_count(); ++i) {
    put_tensor(out, state.param(i).name, state.param(i).value);
  }
  if (!out) throw IOError("write failed for '" + path + "'");
}

CheckpointMeta load_checkpoint(ModelState& state, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOError("cannot open checkpoint '" + path + "'");
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw FormatError(path + ": bad magic, not an AUECRL1 checkpoint");
  }
  const std::uint32_t count = get_u32(in, path);

  CheckpointMeta meta;
  bool seen_version = false;
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    RawTensor rt = get_tensor(in, path);
    if (!seen.insert(rt.name).second) {
      throw FormatError(path + ": duplicate tensor '" + rt.name + "'");
    }
    if (rt.name == "meta.version") {
      meta.version = static_cast<std::uint32_t>(rt.value[0]);
      if (meta.version != 1) {
        throw FormatError(path + ": unsupported checkpoint version " +
                          std::to_string(meta.version));
      }
      seen_version = true;
    } else if (rt.name == "meta.stage") {
      meta.stage = static_cast<int>(rt.value[0]);
    } else if (rt.name == "meta.config_hash") {
      if (rt.value.size() != 2) throw FormatError(path + ": bad meta.config_hash");
      meta.config_hash = (static_cast<std::uint64_t>(rt.value[0]) << 32) |
                         static_cast<std::uint64_t>(rt.value[1]);
    } else {
      Param* p = state.find(rt.name);
      if (p == nullptr) throw FormatError(path + ": unexpected tensor '" + rt.name + "'");
      if (!p->value.same_shape(rt.value)) {
        throw ShapeError(path + ": tensor '" + rt.name + "' has shape " +
                         rt.value.shape_str() + ", expected " + p->value.shape_str());
      }
      p->value = std::move(rt.value);
    }
  }
  if (!seen_version) throw FormatError(path + ": missing meta.version");
  for (size_t i = 0; i < state.param_count(); ++i) {
    if (!seen.count(state.param(i).name)) {
      throw FormatError(path + ": missing tensor '" + state.param(i).name + "'");
    }
  }
  char extra;
  if (in.read(&extra, 1)) throw FormatError(path + ": trailing bytes after tensor records");
  return meta;
}

}  // namespace auecrl
