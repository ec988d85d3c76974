#include "thc/buffers.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <fstream>

#include "json.hpp"
#include "thc/benchgen.hpp"
#include "thc/error.hpp"

namespace thc {

namespace {

using Json = nlohmann::ordered_json;

constexpr char kMagic[8] = {'T', 'H', 'C', 'B', 'U', 'F', '0', '1'};

}  // namespace

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  for (;;) {
    const std::uint64_t r = rng();
    if (r < limit) return r % n;
  }
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

const char* to_string(FillKind kind) {
  switch (kind) {
    case FillKind::Zeros: return "zeros";
    case FillKind::UniformFloat: return "uniform-float";
    case FillKind::UniformInt: return "uniform-int";
    case FillKind::Indices: return "indices";
  }
  return "?";
}

const char* type_name(ScalarType type) {
  switch (type) {
    case ScalarType::Int: return "int";
    case ScalarType::Uint: return "uint";
    case ScalarType::Float: return "float";
  }
  return "?";
}

ScalarType parse_type_name(const std::string& name) {
  if (name == "int") return ScalarType::Int;
  if (name == "uint") return ScalarType::Uint;
  if (name == "float") return ScalarType::Float;
  throw Error(ErrorKind::Io, "unknown element type '" + name + "'");
}

Buffer generate(ScalarType type, std::size_t length, const FillSpec& fill) {
  Buffer b = Buffer::zeros(type, length);
  std::mt19937_64 rng(fill.seed);
  switch (fill.kind) {
    case FillKind::Zeros: break;
    case FillKind::UniformFloat: {
      const double span = static_cast<double>(fill.high) - fill.low;
      for (auto& w : b.words) {
        const double u = static_cast<double>(rng() >> 40) / 16777216.0;  // 24 random bits
        float v = static_cast<float>(fill.low + span * u);
        if (v >= fill.high) v = std::nextafter(fill.high, fill.low);
        w = type == ScalarType::Float ? std::bit_cast<std::uint32_t>(v) : static_cast<std::uint32_t>(static_cast<std::int32_t>(v));
      }
      break;
    }
    case FillKind::UniformInt:
      if (fill.bound < 1) throw Error(ErrorKind::InvalidSpec, "uniform-int bound must be positive");
      for (auto& w : b.words) {
        const auto v = static_cast<std::int32_t>(uniform_below(rng, static_cast<std::uint64_t>(fill.bound)));
        w = type == ScalarType::Float ? std::bit_cast<std::uint32_t>(static_cast<float>(v)) : static_cast<std::uint32_t>(v);
      }
      break;
    case FillKind::Indices: {
      const IndexArray idx = generate_indices(length, fill.degree, fill.seed);
      for (std::size_t i = 0; i < length; ++i) b.words[i] = static_cast<std::uint32_t>(idx.values[i]);
      break;
    }
  }
  return b;
}

InputPlan random_plan(const Kernel& kernel, std::size_t length, std::int32_t int_scalar, std::uint64_t seed,
                      std::size_t local_length) {
  InputPlan plan;
  plan.length = length;
  for (std::size_t i = 0; i < kernel.params.size(); ++i) {
    const Param& p = kernel.params[i];
    if (!p.type.pointer) {
      plan.scalars[p.name] = p.type.scalar == ScalarType::Float ? ScalarValue::of_float(1.0f)
                             : p.type.scalar == ScalarType::Uint
                                 ? ScalarValue::of_uint(static_cast<std::uint32_t>(int_scalar))
                                 : ScalarValue::of_int(int_scalar);
      continue;
    }
    if (p.type.space == AddressSpace::Local) {
      plan.local_lengths[p.name] = local_length;
      continue;
    }
    FillSpec fill;
    fill.seed = derive_seed(seed, i);
    if (p.type.scalar == ScalarType::Float) {
      fill.kind = FillKind::UniformFloat;
    } else {
      fill.kind = FillKind::UniformInt;
      fill.bound = static_cast<std::int64_t>(length);
    }
    plan.types[p.name] = p.type.scalar;
    plan.fills[p.name] = fill;
  }
  return plan;
}

BufferSet materialize(const InputPlan& plan) {
  BufferSet set;
  for (const auto& [name, fill] : plan.fills) set.buffers[name] = generate(plan.types.at(name), plan.length, fill);
  set.scalars = plan.scalars;
  set.local_lengths = plan.local_lengths;
  return set;
}

namespace {

Json fill_json(const FillSpec& f) {
  Json j;
  j["kind"] = to_string(f.kind);
  j["seed"] = f.seed;
  if (f.kind == FillKind::UniformFloat) {
    j["low"] = f.low;
    j["high"] = f.high;
  } else if (f.kind == FillKind::UniformInt) {
    j["bound"] = f.bound;
  } else if (f.kind == FillKind::Indices) {
    j["degree"] = f.degree;
  }
  return j;
}

FillSpec fill_from_json(const Json& j) {
  FillSpec f;
  const std::string kind = j.at("kind");
  if (kind == "zeros") f.kind = FillKind::Zeros;
  else if (kind == "uniform-float") f.kind = FillKind::UniformFloat;
  else if (kind == "uniform-int") f.kind = FillKind::UniformInt;
  else if (kind == "indices") f.kind = FillKind::Indices;
  else throw Error(ErrorKind::Io, "unknown fill kind '" + kind + "'");
  f.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("low")) f.low = j["low"].get<float>();
  if (j.contains("high")) f.high = j["high"].get<float>();
  if (j.contains("bound")) f.bound = j["bound"].get<std::int64_t>();
  if (j.contains("degree")) f.degree = j["degree"].get<std::int64_t>();
  return f;
}

void put_word(std::ostream& out, std::uint32_t w) {
  const char bytes[4] = {static_cast<char>(w & 0xFF), static_cast<char>((w >> 8) & 0xFF),
                         static_cast<char>((w >> 16) & 0xFF), static_cast<char>((w >> 24) & 0xFF)};
  out.write(bytes, 4);
}

}  // namespace

void save_buffers(const BufferSet& buffers, const std::filesystem::path& manifest, const std::filesystem::path& data,
                  const std::map<std::string, FillSpec>& fills) {
  std::ofstream bin(data, std::ios::binary);
  if (!bin) throw Error(ErrorKind::Io, "cannot write " + data.string());
  bin.write(kMagic, sizeof kMagic);
  std::uint64_t offset = sizeof kMagic;

  Json j;
  j["format"] = "thc-buffers";
  j["version"] = 1;
  j["data_file"] = std::filesystem::relative(std::filesystem::absolute(data),
                                             std::filesystem::absolute(manifest).parent_path())
                       .generic_string();
  Json list = Json::array();
  for (const auto& [name, buf] : buffers.buffers) {
    Json e;
    e["name"] = name;
    e["type"] = type_name(buf.type);
    e["length"] = buf.size();
    if (auto it = fills.find(name); it != fills.end()) {
      e["fill"] = fill_json(it->second);
    } else {
      e["offset"] = offset;
      for (std::uint32_t w : buf.words) put_word(bin, w);
      offset += 4 * buf.size();
    }
    list.push_back(std::move(e));
  }
  j["buffers"] = std::move(list);
  Json scalars = Json::array();
  for (const auto& [name, v] : buffers.scalars) {
    Json e;
    e["name"] = name;
    e["type"] = type_name(v.type);
    e["bits"] = v.bits;
    scalars.push_back(std::move(e));
  }
  j["scalars"] = std::move(scalars);
  Json locals = Json::object();
  for (const auto& [name, len] : buffers.local_lengths) locals[name] = len;
  j["local_lengths"] = std::move(locals);
  if (!bin) throw Error(ErrorKind::Io, "failed writing " + data.string());

  std::ofstream out(manifest);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + manifest.string());
  out << j.dump(2) << "\n";
}

BufferSet load_buffers(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + manifest.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Io, manifest.string() + ": " + e.what());
  }
  if (j.value("format", "") != "thc-buffers" || j.value("version", 0) != 1) {
    throw Error(ErrorKind::Io, manifest.string() + ": not a version 1 buffer manifest");
  }
  const std::filesystem::path data = manifest.parent_path() / j.at("data_file").get<std::string>();
  std::ifstream bin(data, std::ios::binary);
  if (!bin) throw Error(ErrorKind::Io, "cannot read " + data.string());
  char magic[8];
  if (!bin.read(magic, 8) || !std::equal(magic, magic + 8, kMagic)) {
    throw Error(ErrorKind::Io, data.string() + ": bad magic");
  }

  BufferSet set;
  for (const Json& e : j.at("buffers")) {
    const std::string name = e.at("name");
    const ScalarType type = parse_type_name(e.at("type"));
    const std::size_t length = e.at("length");
    if (e.contains("fill")) {
      set.buffers[name] = generate(type, length, fill_from_json(e["fill"]));
      continue;
    }
    Buffer b = Buffer::zeros(type, length);
    bin.seekg(static_cast<std::streamoff>(e.at("offset").get<std::uint64_t>()));
    std::vector<unsigned char> bytes(4 * length);
    if (!bin.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()))) {
      throw Error(ErrorKind::Io, data.string() + ": truncated buffer '" + name + "'");
    }
    for (std::size_t i = 0; i < length; ++i) {
      b.words[i] = bytes[4 * i] | (bytes[4 * i + 1] << 8) | (bytes[4 * i + 2] << 16) |
                   (static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24);
    }
    set.buffers[name] = std::move(b);
  }
  for (const Json& e : j.at("scalars")) {
    set.scalars[e.at("name")] = ScalarValue{parse_type_name(e.at("type")), e.at("bits").get<std::uint32_t>()};
  }
  for (const auto& [name, len] : j.at("local_lengths").items()) set.local_lengths[name] = len.get<std::size_t>();
  return set;
}

}  // namespace thc
