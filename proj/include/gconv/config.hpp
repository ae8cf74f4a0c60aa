#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gconv/lab.hpp"

namespace gconv {

/// Operator section. For kind p_laplacian, `weight` is one of constant:<c>,
/// sine:<mean>,<amp>, two_phase:<w1>,<w2>, table:<v1>,<v2>,...; two_phase
/// reads w1, w2 and custom_table reads table instead.
struct OperatorConfig {
  std::string kind = "p_laplacian";  // p_laplacian | two_phase | custom_table
  double p = 2.0;
  std::string weight = "constant:1";
  double w1 = 1.0;
  double w2 = 4.0;
  std::vector<double> table;
  int h = 1;
  double shift = 0.0;
  bool time_dependent = false;
};

/// Data expressions: a number, zero, sine:<k> or sine:<k1>,<k2>,... (tensor
/// sine mode on the box), bump (centred C^2 bump). phi also accepts
/// "elliptic".
struct DataConfig {
  std::string g = "1";
  std::string f;
  std::string phi = "elliptic";
  std::string g_perturbation = "none";  // none | scale | sine
  std::string f2;
  std::string phi2;
};

struct SweepConfig {
  std::vector<int> h_list;
  std::string problem = "elliptic";
  std::string reference = "finest_member";  // or homogenized_1d
  int dictionary = 16;
  int bumps = 3;
  std::vector<double> xi;
};

struct VerifyConfig {
  int pairs = 10000;
  double tol = 1e-8;
  double radius = 10.0;
};

/// One experiment, as read from an INI-style file with [section] headers.
struct RunConfig {
  std::string kind;
  std::uint64_t seed = kDefaultSeed;
  int workers = 1;
  std::string family = "euclidean:1";
  Box box;
  std::vector<int> nodes;
  OperatorConfig op;
  DataConfig data;
  double T = 0.1;
  int K = 20;
  SolverOptions solver;
  SweepConfig sweep;
  Thresholds thresholds;
  VerifyConfig verify;
  std::filesystem::path out_dir = "out";
  /// Normalized key = value snapshot, in file order.
  std::vector<std::pair<std::string, std::string>> snapshot;
};

inline const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> kinds{"verify-class", "solve-elliptic", "solve-parabolic",
                                              "sweep",        "divcurl",        "consistency",
                                              "data-convergence"};
  return kinds;
}

/// Parses and validates; every problem is reported as "section.key: reason"
/// in one ConfigError.
RunConfig parse_config(const std::filesystem::path& path);
RunConfig parse_config_text(const std::string& text);

/// constant:<c>, sine:<mean>,<amp>, two_phase:<w1>,<w2> or table:<v1>,...
Weight parse_weight(const std::string& spec);

VectorFieldFamily build_family(const RunConfig& cfg);
Grid build_grid(const RunConfig& cfg);
/// Base (unoscillated) map of the operator section.
MonotoneMap build_base_map(const RunConfig& cfg);
/// Base map oscillated at op.h and shifted by op.shift.
MonotoneMap build_map(const RunConfig& cfg);
ScalarFn build_data(const std::string& expr, const Box& box, const std::string& field);
SequenceSpec build_sequence(const RunConfig& cfg);
/// Member datum for data-convergence runs.
std::function<ScalarFn(int)> build_perturbation(const RunConfig& cfg);

}  // namespace gconv
