#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "plansel/tensor.hpp"

namespace plansel {

struct NamedParam {
    std::string name;
    ad::Tensor tensor;
};

// Parameter checkpoint, binary: magic "PSNN", u32 version, u32 count, then per
// parameter u32 name length, name bytes, u32 rank, u64 dims, row-major
// little-endian fp32 payload. Values are narrowed to fp32 on save and widened
// back on load.
void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedParam>& params);
std::vector<NamedParam> load_checkpoint(const std::filesystem::path& path);

}  // namespace plansel
