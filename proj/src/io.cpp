#include "eit/io.hpp"

#include "eit/errors.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

namespace eit {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw ValidationError("not a number: '" + s + "'");
  }
  while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\r' || s[pos] == '\t')) ++pos;
  if (pos != s.size()) throw ValidationError("not a number: '" + s + "'");
  return v;
}

}  // namespace

void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& A) {
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      if (j) os << ',';
      os << fmt(A(i, j));
    }
    os << '\n';
  }
}

Eigen::MatrixXd read_matrix_csv(std::istream& is) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(parse_double(cell));
    if (!rows.empty() && row.size() != rows.front().size()) throw ValidationError("ragged CSV matrix");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) return Eigen::MatrixXd();
  Eigen::MatrixXd A(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    for (size_t j = 0; j < rows[i].size(); ++j) A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return A;
}

void write_field(std::ostream& os, const NodalField& f) {
  os << "field " << (f.is_scalar() ? "scalar" : "tensor") << ' ' << f.num_nodes() << ' ' << fmt(f.lambda0) << ' '
     << fmt(f.lambda1) << '\n';
  for (int i = 0; i < f.num_nodes(); ++i) {
    for (int c = 0; c < f.components(); ++c) {
      if (c) os << ' ';
      os << fmt(f.values(i, c));
    }
    os << '\n';
  }
}

NodalField read_field(std::istream& is) {
  std::string tag, kind;
  int n = 0;
  NodalField f;
  if (!(is >> tag >> kind >> n >> f.lambda0 >> f.lambda1) || tag != "field" || n < 0) {
    throw ValidationError("malformed field header");
  }
  if (kind == "scalar") {
    f.kind = FieldKind::scalar;
  } else if (kind == "tensor") {
    f.kind = FieldKind::tensor;
  } else {
    throw ValidationError("unknown field kind '" + kind + "'");
  }
  f.values.resize(n, f.components());
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < f.components(); ++c) {
      if (!(is >> f.values(i, c))) throw ValidationError("field dump ends early");
    }
  }
  return f;
}

void write_trace_csv(std::ostream& os, const InversionResult& r) {
  os << "iteration,objective,tau\n";
  for (size_t i = 0; i < r.trace.size(); ++i) {
    os << i << ',' << fmt(r.trace[i]) << ',';
    if (i > 0 && i - 1 < r.tau.size()) os << fmt(r.tau[i - 1]);
    os << '\n';
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << contents;
  if (!out) throw ValidationError("write to '" + path + "' failed");
}

}  // namespace eit
