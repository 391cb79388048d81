#pragma once

#include "eit/field.hpp"
#include "eit/inverse.hpp"

#include <Eigen/Core>

#include <iosfwd>
#include <string>

namespace eit {

/// Row-major CSV, one matrix row per line, full precision.
void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& A);
Eigen::MatrixXd read_matrix_csv(std::istream& is);

/// Plain-text field dump:
///   field scalar|tensor <num_nodes> <lambda0> <lambda1>
///   one line of 1 or 3 values per node
void write_field(std::ostream& os, const NodalField& f);
NodalField read_field(std::istream& is);

/// "iteration,objective,tau": one line per accepted iteration (tau empty for the start).
void write_trace_csv(std::ostream& os, const InversionResult& r);

/// Whole-file helpers; throw ValidationError when the file cannot be opened.
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace eit
