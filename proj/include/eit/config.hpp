#pragma once

#include "eit/inverse.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace eit {

/// Everything a CLI run needs; parsed from one JSON document. Missing keys
/// keep the defaults below. Schema (all keys optional):
///
///   domain:    [[x, y], ...] counterclockwise polygon (unit square)
///   phantom:   {background, lambda0, lambda1,
///               disks: [{center: [x, y], radius, value}],
///               polygons: [{vertices: [[x, y], ...], value}]}
///   mesh:      {level, data_levels, max_level}
///   layout:    {m, k, impedance: number | [per electrode], z_min, z_max}
///   noise:     {eps, mode: "absolute" | "relative", eps_list: [...], seeds: [...], slack}
///   schedule:  {enabled, gamma, a1, a2, c, c0, c1, c2, alpha1, beta1}
///   optimizer: {max_iterations, tau0, tau_min, continuation, stagnation,
///               grad_tol, max_backtracks, gauss_newton}
///   inverse_crime, tensor: booleans
///   output:    directory for emitted files ("out")
///   seed:      unsigned 64-bit integer
struct RunConfig {
  InversionConfig inversion;
  std::vector<double> eps_list{0.1, 0.05, 0.025, 0.0125};
  std::vector<std::uint64_t> seeds{1};
  double slack = 0.1;
  std::string output_dir = "out";
  int max_level = 7;

  /// Levels within max_level, layout and schedule sanity; throws ValidationError.
  void validate() const;
};

RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);

}  // namespace eit
