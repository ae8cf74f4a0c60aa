#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gconv/discretization.hpp"

namespace gconv {

/// Time-indexed sequence of discrete functions; states[0] is the initial datum.
struct Trajectory {
  std::vector<double> times;
  std::vector<DiscreteFunction> states;

  std::size_t size() const { return states.size(); }
  const DiscreteFunction& final_state() const { return states.back(); }
};

/// Header row "x0,...,x{n-1},value", one row per node, 17 significant digits.
void write_csv(const DiscreteFunction& u, const std::filesystem::path& path);
DiscreteFunction read_csv(const Grid& grid, const std::filesystem::path& path, bool zero_boundary);

/// Cell centers and cell-mean flux components "x0,...,m0,...".
void write_csv(const FluxField& flux, const std::filesystem::path& path);

/// Raw little-endian float64 nodal values at `stem`.bin plus a JSON header
/// at `stem`.json (shape, box, spacing, byte order, dtype).
void write_binary(const DiscreteFunction& u, const std::filesystem::path& stem);
DiscreteFunction read_binary(const std::filesystem::path& stem);

/// Directory of step_<k>.csv files plus manifest.json with T, K and the grid.
/// Returns the list of files written, relative to dir.
std::vector<std::string> write_trajectory(const Trajectory& traj, const std::filesystem::path& dir);

}  // namespace gconv
