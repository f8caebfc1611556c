#pragma once
// Checkpoint binary layout (all integers little-endian u32):
//   "TRCE" | version=1 | json_length | UTF-8 JSON {config, train_step, seed}
//   | param_count | per parameter: name_length, name bytes, rank, extents...
//   | every parameter's values as contiguous little-endian float32, in
//     manifest order.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "xview/dit.hpp"

namespace xview {

nlohmann::json to_json(const DitConfig& cfg);
DitConfig dit_config_from_json(const nlohmann::json& j);

struct ModelCheckpoint {
  Dit<float> model;
  std::int64_t train_step = 0;
  std::uint64_t seed = 0;
};

std::vector<std::uint8_t> serialize_checkpoint(const ModelCheckpoint& ckpt);
ModelCheckpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const ModelCheckpoint& ckpt);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace xview
