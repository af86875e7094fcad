#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "diga/autodiff.hpp"
#include "diga/tensor.hpp"

namespace diga::tk {

// Flat tensor container:
//   "DIGA1" | u32 version | u32 count |
//   count x ( u32 name_len | name | u32 rank | rank x u64 dim | f64 data... )
// All integers and floats little-endian.
inline constexpr char kCheckpointMagic[5] = {'D', 'I', 'G', 'A', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

void write_tensors(std::ostream& os, const NamedTensors& tensors);
NamedTensors read_tensors(std::istream& is);

void save_tensors(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors load_tensors(const std::filesystem::path& path);

NamedTensors snapshot(const ParameterSet& params);
// Copies values into matching parameters; throws if a name is missing or a
// shape differs.
void restore(ParameterSet& params, const NamedTensors& tensors);

}  // namespace diga::tk
