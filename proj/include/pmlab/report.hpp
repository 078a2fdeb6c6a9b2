#pragma once

#include <string>
#include <vector>

#include "pmlab/grid.hpp"

namespace pmlab {

struct Term {
  std::string name;
  double value = 0.0;
};

/// Record of one verified inequality: left side, itemized right side,
/// realized constant = lhs / sum(rhs), verdict against a tolerance when one
/// applies.
struct CheckReport {
  std::string id;
  Cylinder cylinder;
  double lhs = 0.0;
  std::vector<Term> rhs_terms;
  double realized_constant = 0.0;
  bool pass = true;
  double tolerance = 0.0;
  std::string note;

  double rhs_total() const {
    double s = 0.0;
    for (const auto& t : rhs_terms) s += t.value;
    return s;
  }
  void finalize();  // computes realized_constant and finiteness verdict
  double term(const std::string& name) const;
};

void write_reports_csv(const std::string& path,
                       const std::vector<CheckReport>& reports);
void write_reports_json(const std::string& path,
                        const std::vector<CheckReport>& reports);

}  // namespace pmlab
