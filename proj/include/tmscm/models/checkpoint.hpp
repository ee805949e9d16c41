#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "tmscm/models/model.hpp"

namespace tmscm::models {

/// File layout: the 8-byte magic "TMSCMCK1", a little-endian uint64 header
/// length, a JSON header (family, graph, order, hyperparameters, ε,
/// standardization, seed), then θ as little-endian float64.
void save_checkpoint(const TmScmModel& model, std::uint64_t seed, const std::filesystem::path& path);

struct LoadedCheckpoint {
  std::unique_ptr<TmScmModel> model;
  std::uint64_t seed = 0;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

/// The JSON header alone (for manifests).
std::string checkpoint_header(const TmScmModel& model, std::uint64_t seed);

}  // namespace tmscm::models
