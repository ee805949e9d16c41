#include "tmscm/io.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "tmscm/error.hpp"

namespace tmscm::io {

static_assert(std::endian::native == std::endian::little, "binary I/O assumes a little-endian host");

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  require(!in.bad(), ErrorCode::Io, "failed reading " + path.string());
  return os.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(out), ErrorCode::Io, "failed writing " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  require(!ec, ErrorCode::Io, "cannot move " + tmp.string() + " into place: " + ec.message());
}

std::string fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::ordered_json graph_to_json(const CausalGraph& graph) {
  nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
  for (const auto& spec : graph.specs()) {
    std::vector<int> parents;
    for (NodeId p : spec.parents) parents.push_back(p.value);
    nodes.push_back({{"id", spec.id.value}, {"dim", spec.dim}, {"parents", parents}});
  }
  std::vector<int> order;
  for (NodeId id : graph.order()) order.push_back(id.value);
  return {{"nodes", nodes}, {"order", order}};
}

CausalGraph graph_from_json(const nlohmann::json& j) {
  std::vector<CausalGraph::NodeSpec> specs;
  std::vector<NodeId> order;
  try {
    for (const auto& n : j.at("nodes")) {
      CausalGraph::NodeSpec s;
      s.id = NodeId{n.at("id").get<int>()};
      s.dim = n.at("dim").get<std::size_t>();
      for (int p : n.at("parents").get<std::vector<int>>()) s.parents.push_back(NodeId{p});
      specs.push_back(std::move(s));
    }
    for (int id : j.at("order").get<std::vector<int>>()) order.push_back(NodeId{id});
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("graph: ") + e.what());
  }
  return CausalGraph(std::move(specs), std::move(order));
}

std::string matrix_bytes(const ad::Matrix& m) {
  std::string out(m.size() * sizeof(double), '\0');
  if (!out.empty()) std::memcpy(out.data(), m.storage().data(), out.size());
  return out;
}

ad::Matrix matrix_from_bytes(const std::string& bytes, std::size_t rows, std::size_t cols) {
  require(bytes.size() == rows * cols * sizeof(double), ErrorCode::Io, "matrix file has the wrong size");
  std::vector<double> data(rows * cols);
  if (!data.empty()) std::memcpy(data.data(), bytes.data(), bytes.size());
  return ad::Matrix(rows, cols, std::move(data));
}

}  // namespace tmscm::io
