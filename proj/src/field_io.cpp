#include "gconv/field_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace gconv {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, mode);
  if (!os) throw Error("cannot open '" + path.string() + "' for writing");
  return os;
}

json grid_json(const Grid& grid) {
  json box = json::array();
  json spacing = json::array();
  for (int d = 0; d < grid.dim(); ++d) {
    box.push_back({grid.box().lower(d), grid.box().upper(d)});
    spacing.push_back(grid.spacing(d));
  }
  return {{"box", box}, {"shape", grid.nodes_per_axis()}, {"spacing", spacing}};
}

Grid grid_from_json(const json& j) {
  std::vector<std::pair<double, double>> axes;
  for (const auto& a : j.at("box")) axes.emplace_back(a.at(0).get<double>(), a.at(1).get<double>());
  return Grid(Box(std::move(axes)), j.at("shape").get<std::vector<int>>());
}

}  // namespace

void write_csv(const DiscreteFunction& u, const fs::path& path) {
  auto os = open_out(path);
  const auto& grid = u.grid();
  for (int d = 0; d < grid.dim(); ++d) os << 'x' << d << ',';
  os << "value\n" << std::setprecision(17);
  for (std::size_t i = 0; i < grid.node_count(); ++i) {
    const auto x = grid.node_point(i);
    for (int d = 0; d < grid.dim(); ++d) os << x[d] << ',';
    os << u[i] << '\n';
  }
}

DiscreteFunction read_csv(const Grid& grid, const fs::path& path, bool zero_boundary) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open '" + path.string() + "'");
  std::string line;
  std::getline(is, line);
  Eigen::VectorXd v(static_cast<Eigen::Index>(grid.node_count()));
  std::size_t i = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (i >= grid.node_count()) throw Error("'" + path.string() + "' has more rows than grid nodes");
    v[static_cast<Eigen::Index>(i++)] = std::stod(line.substr(line.rfind(',') + 1));
  }
  if (i != grid.node_count()) throw Error("'" + path.string() + "' has fewer rows than grid nodes");
  return DiscreteFunction(grid, std::move(v), zero_boundary);
}

void write_csv(const FluxField& flux, const fs::path& path) {
  auto os = open_out(path);
  const auto& grid = flux.grid();
  for (int d = 0; d < grid.dim(); ++d) os << 'x' << d << ',';
  for (int k = 0; k < flux.m(); ++k) os << 'm' << k << (k + 1 < flux.m() ? "," : "\n");
  os << std::setprecision(17);
  for (std::size_t c = 0; c < grid.cell_count(); ++c) {
    const auto x = grid.cell_center(c);
    const auto v = flux.cell_mean(c);
    for (int d = 0; d < grid.dim(); ++d) os << x[d] << ',';
    for (int k = 0; k < flux.m(); ++k) os << v[k] << (k + 1 < flux.m() ? "," : "\n");
  }
}

void write_binary(const DiscreteFunction& u, const fs::path& stem) {
  static_assert(sizeof(double) == 8);
  fs::path bin = stem;
  bin += ".bin";
  fs::path hdr = stem;
  hdr += ".json";
  {
    auto os = open_out(bin, std::ios::out | std::ios::binary);
    for (Eigen::Index i = 0; i < u.values().size(); ++i) {
      auto bits = std::bit_cast<std::uint64_t>(u.values()[i]);
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
      char bytes[8];
      std::memcpy(bytes, &bits, 8);
      os.write(bytes, 8);
    }
  }
  json header = grid_json(u.grid());
  header["byte_order"] = "little";
  header["dtype"] = "float64";
  header["zero_boundary"] = u.zero_boundary();
  header["data"] = bin.filename().string();
  auto os = open_out(hdr);
  os << header.dump(2) << '\n';
}

DiscreteFunction read_binary(const fs::path& stem) {
  fs::path hdr = stem;
  hdr += ".json";
  std::ifstream hs(hdr);
  if (!hs) throw Error("cannot open '" + hdr.string() + "'");
  const json header = json::parse(hs);
  if (header.at("byte_order") != "little" || header.at("dtype") != "float64") {
    throw Error("unsupported binary layout in '" + hdr.string() + "'");
  }
  const Grid grid = grid_from_json(header);
  fs::path bin = stem;
  bin += ".bin";
  std::ifstream is(bin, std::ios::binary);
  if (!is) throw Error("cannot open '" + bin.string() + "'");
  Eigen::VectorXd v(static_cast<Eigen::Index>(grid.node_count()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    char bytes[8];
    if (!is.read(bytes, 8)) throw Error("'" + bin.string() + "' is truncated");
    std::uint64_t bits;
    std::memcpy(&bits, bytes, 8);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    v[i] = std::bit_cast<double>(bits);
  }
  return DiscreteFunction(grid, std::move(v), header.value("zero_boundary", false));
}

std::vector<std::string> write_trajectory(const Trajectory& traj, const fs::path& dir) {
  if (traj.states.empty()) throw ContractViolation("write_trajectory: empty trajectory");
  fs::create_directories(dir);
  std::vector<std::string> files;
  json steps = json::array();
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    std::ostringstream name;
    name << "step_" << std::setw(5) << std::setfill('0') << k << ".csv";
    write_csv(traj.states[k], dir / name.str());
    files.push_back(name.str());
    steps.push_back({{"k", k}, {"t", traj.times[k]}, {"file", name.str()}});
  }
  json manifest = {{"T", traj.times.back()},
                   {"K", traj.states.size() - 1},
                   {"grid", grid_json(traj.states.front().grid())},
                   {"steps", steps}};
  auto os = open_out(dir / "manifest.json");
  os << manifest.dump(2) << '\n';
  files.push_back("manifest.json");
  return files;
}

}  // namespace gconv
