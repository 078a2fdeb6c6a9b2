#include "pmlab/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

namespace pmlab {

void CheckReport::finalize() {
  const double total = rhs_total();
  if (total > 0.0) {
    realized_constant = lhs / total;
  } else {
    realized_constant = lhs > 0.0 ? std::numeric_limits<double>::infinity()
                                  : 0.0;
  }
  pass = std::isfinite(realized_constant);
}

double CheckReport::term(const std::string& name) const {
  for (const auto& t : rhs_terms)
    if (t.name == name) return t.value;
  throw ParameterError("no RHS term named " + name);
}

namespace {
std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace

void write_reports_csv(const std::string& path,
                       const std::vector<CheckReport>& reports) {
  std::ofstream os(path);
  if (!os) throw DomainError("cannot open " + path + " for writing");
  os << "id,x,t,radius,half_time,lhs,rhs_total,realized_constant,pass,terms\n";
  for (const auto& r : reports) {
    os << r.id << "," << fmt(r.cylinder.x[0]) << "," << fmt(r.cylinder.t)
       << "," << fmt(r.cylinder.radius) << "," << fmt(r.cylinder.half_time)
       << "," << fmt(r.lhs) << "," << fmt(r.rhs_total()) << ","
       << fmt(r.realized_constant) << "," << (r.pass ? 1 : 0) << ",";
    for (std::size_t i = 0; i < r.rhs_terms.size(); ++i) {
      if (i) os << ";";
      os << r.rhs_terms[i].name << "=" << fmt(r.rhs_terms[i].value);
    }
    os << "\n";
  }
}

void write_reports_json(const std::string& path,
                        const std::vector<CheckReport>& reports) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports) {
    nlohmann::json j;
    j["id"] = r.id;
    j["cylinder"] = {{"x", r.cylinder.x[0]},
                     {"t", r.cylinder.t},
                     {"radius", r.cylinder.radius},
                     {"half_time", r.cylinder.half_time}};
    j["lhs"] = r.lhs;
    j["rhs_total"] = r.rhs_total();
    j["realized_constant"] = r.realized_constant;
    j["pass"] = r.pass;
    if (!r.note.empty()) j["note"] = r.note;
    nlohmann::json terms = nlohmann::json::object();
    for (const auto& t : r.rhs_terms) terms[t.name] = t.value;
    j["terms"] = terms;
    arr.push_back(j);
  }
  std::ofstream os(path);
  if (!os) throw DomainError("cannot open " + path + " for writing");
  os << arr.dump(2) << "\n";
}

}  // namespace pmlab
