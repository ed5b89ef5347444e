#pragma once

// Binary checkpoint shared by every stage:
//
//   "VRECCKPT1" | u32 little-endian header length | UTF-8 JSON header | blobs
//
// The header lists {name, shape, offset} for every parameter (offset in
// bytes from the start of the blob section), the model configuration, and a
// "verifiers" section when a bank is stored. Blobs are little-endian float64.

#include <filesystem>
#include <optional>
#include <string>

#include "vrec/backbone.hpp"
#include "vrec/verifiers.hpp"

namespace vrec {

inline constexpr char kCheckpointMagic[] = "VRECCKPT1";

struct Checkpoint {
  std::optional<Backbone> backbone;
  std::optional<VerifierBank> bank;
};

void save_checkpoint(const std::filesystem::path& path, const Backbone* backbone,
                     const VerifierBank* bank);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace vrec
