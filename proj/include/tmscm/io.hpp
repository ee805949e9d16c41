#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "tmscm/ad/matrix.hpp"
#include "tmscm/graph.hpp"

namespace tmscm::io {

std::string read_file(const std::filesystem::path& path);
/// Writes through a temporary sibling and renames it into place.
void write_file(const std::filesystem::path& path, const std::string& bytes);

/// 64-bit FNV-1a, as 16 lowercase hex digits.
std::string fnv1a64(const std::string& bytes);

/// {"nodes": [{"id", "dim", "parents"}], "order": [...]}
nlohmann::ordered_json graph_to_json(const CausalGraph& graph);
/// InvalidConfig on malformed input.
CausalGraph graph_from_json(const nlohmann::json& j);

/// Row-major little-endian float64.
std::string matrix_bytes(const ad::Matrix& m);
ad::Matrix matrix_from_bytes(const std::string& bytes, std::size_t rows, std::size_t cols);

}  // namespace tmscm::io
