#include "diga/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>

#include "diga/error.hpp"

namespace diga::tk {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) {
    throw InputError("checkpoint truncated");
  }
  return v;
}

}  // namespace

void write_tensors(std::ostream& os, const NamedTensors& tensors) {
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) {
      put<std::uint64_t>(os, d);
    }
    os.write(reinterpret_cast<const char*>(t.ptr()),
             static_cast<std::streamsize>(t.numel() * sizeof(double)));
  }
}

NamedTensors read_tensors(std::istream& is) {
  char magic[sizeof(kCheckpointMagic)];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw InputError("not a DIGA1 checkpoint (bad magic)");
  }
  const auto version = get<std::uint32_t>(is);
  if (version != kCheckpointVersion) {
    throw InputError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = get<std::uint32_t>(is);
  NamedTensors out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = get<std::uint32_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const auto rank = get<std::uint32_t>(is);
    if (rank == 0 || rank > 8) {
      throw InputError("checkpoint tensor '" + name + "' has invalid rank");
    }
    Shape shape(rank);
    for (auto& d : shape) {
      d = static_cast<std::size_t>(get<std::uint64_t>(is));
    }
    std::vector<double> data(shape_numel(shape));
    is.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!is) {
      throw InputError("checkpoint truncated in tensor '" + name + "'");
    }
    out.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return out;
}

void save_tensors(const std::filesystem::path& path, const NamedTensors& tensors) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) {
    throw InputError("cannot open " + path.string() + " for writing");
  }
  write_tensors(os, tensors);
}

NamedTensors load_tensors(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw InputError("cannot open checkpoint " + path.string());
  }
  return read_tensors(is);
}

NamedTensors snapshot(const ParameterSet& params) {
  NamedTensors out;
  for (const Parameter* p : params.all()) {
    out.emplace_back(p->name, p->value);
  }
  return out;
}

void restore(ParameterSet& params, const NamedTensors& tensors) {
  std::unordered_map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : tensors) {
    by_name[name] = &t;
  }
  for (Parameter* p : params.all()) {
    auto it = by_name.find(p->name);
    if (it == by_name.end()) {
      throw ConfigError("checkpoint is missing parameter " + p->name);
    }
    if (it->second->shape() != p->value.shape()) {
      throw ConfigError("checkpoint shape mismatch for " + p->name + ": " +
                        shape_str(it->second->shape()) + " vs " + shape_str(p->value.shape()));
    }
    p->value = *it->second;
  }
}

}  // namespace diga::tk
