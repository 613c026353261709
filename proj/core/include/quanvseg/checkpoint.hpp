#pragma once

#include <string>

#include "quanvseg/attention_unet.hpp"

namespace quanvseg::unet {

// Writes every trainable tensor and running statistic as consecutive QVT1
// records to `path`, and a text manifest to `path + ".manifest"` holding the
// model config and one `tensor <name> <shape> <offset>` line per record.
void save_checkpoint(const std::string& path, const AttentionUNet<float>& model);

AttentionUNet<float> load_checkpoint(const std::string& path);

std::string manifest_path(const std::string& path);

}  // namespace quanvseg::unet
