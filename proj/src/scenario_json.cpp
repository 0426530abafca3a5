#include "matcpd/scenario_json.hpp"

#include <fstream>

namespace matcpd {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& what) {
  throw Error(errc::schema, "scenario: " + what);
}

const json& need(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) fail(std::string("missing field '") + key + "'");
  return *it;
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  const auto it = j.find(key);
  if (it == j.end()) return fallback;
  return it->get<T>();
}

CovarianceSpec cov_from_json(const json& j) {
  const std::string kind = need(j, "kind").get<std::string>();
  if (kind == "identity") return CovarianceSpec::identity();
  if (kind == "kronecker_random")
    return CovarianceSpec::kronecker_random(get_or<std::uint64_t>(j, "seed", 0));
  if (kind == "banded")
    return CovarianceSpec::banded(get_or<double>(j, "rho_row", 0.5),
                                  get_or<double>(j, "rho_col", 0.3));
  if (kind == "compound_symmetry")
    return CovarianceSpec::compound_symmetry(get_or<double>(j, "offdiag", 0.2));
  fail("unknown covariance kind '" + kind + "'");
}

json cov_to_json(const CovarianceSpec& c) {
  json j;
  switch (c.kind) {
    case CovarianceSpec::Kind::identity:
      j["kind"] = "identity";
      break;
    case CovarianceSpec::Kind::kronecker_random:
      j["kind"] = "kronecker_random";
      j["seed"] = c.seed;
      break;
    case CovarianceSpec::Kind::banded:
      j["kind"] = "banded";
      j["rho_row"] = c.rho_row;
      j["rho_col"] = c.rho_col;
      break;
    case CovarianceSpec::Kind::compound_symmetry:
      j["kind"] = "compound_symmetry";
      j["offdiag"] = c.offdiag;
      break;
  }
  return j;
}

ShiftSpec shift_from_json(const json& j) {
  const std::string kind = need(j, "kind").get<std::string>();
  const double a = need(j, "magnitude").get<double>();
  if (kind == "one_mode")
    return ShiftSpec::one_mode(need(j, "cells").get<Eigen::Index>(), a);
  if (kind == "two_modes")
    return ShiftSpec::two_modes(need(j, "cells").get<Eigen::Index>(), a);
  if (kind == "block")
    return ShiftSpec::block(need(j, "side").get<Eigen::Index>(), a,
                            get_or<Eigen::Index>(j, "row", 1),
                            get_or<Eigen::Index>(j, "col", 1));
  if (kind == "random_cells")
    return ShiftSpec::random_cells(need(j, "cells").get<Eigen::Index>(), a,
                                   get_or<std::uint64_t>(j, "seed", 0));
  fail("unknown shift kind '" + kind + "'");
}

json shift_to_json(const ShiftSpec& s) {
  json j;
  j["magnitude"] = s.magnitude;
  switch (s.kind) {
    case ShiftSpec::Kind::one_mode:
      j["kind"] = "one_mode";
      j["cells"] = s.cells;
      break;
    case ShiftSpec::Kind::two_modes:
      j["kind"] = "two_modes";
      j["cells"] = s.cells;
      break;
    case ShiftSpec::Kind::block:
      j["kind"] = "block";
      j["side"] = s.side;
      j["row"] = s.row;
      j["col"] = s.col;
      break;
    case ShiftSpec::Kind::random_cells:
      j["kind"] = "random_cells";
      j["cells"] = s.cells;
      j["seed"] = s.seed;
      break;
  }
  return j;
}

}  // namespace

ScenarioSpec scenario_from_json(const json& j) {
  if (!j.is_object()) fail("top level must be an object");
  ScenarioSpec spec;
  spec.p1 = need(j, "p1").get<Eigen::Index>();
  spec.p2 = need(j, "p2").get<Eigen::Index>();
  spec.n = need(j, "n").get<Eigen::Index>();
  spec.seed = get_or<std::uint64_t>(j, "seed", 0);
  spec.ar1_rho = get_or<double>(j, "ar1_rho", 0.0);
  spec.cov = cov_from_json(need(j, "covariance"));
  if (const auto it = j.find("changes"); it != j.end()) {
    if (!it->is_array()) fail("'changes' must be an array");
    for (const json& cj : *it) {
      ChangeSpec ch;
      ch.epoch = need(cj, "epoch").get<Eigen::Index>();
      ch.shift = shift_from_json(need(cj, "shift"));
      spec.changes.push_back(ch);
    }
  }
  return spec;
}

json scenario_to_json(const ScenarioSpec& spec) {
  json j;
  j["p1"] = spec.p1;
  j["p2"] = spec.p2;
  j["n"] = spec.n;
  j["seed"] = spec.seed;
  j["ar1_rho"] = spec.ar1_rho;
  j["covariance"] = cov_to_json(spec.cov);
  j["changes"] = json::array();
  for (const ChangeSpec& ch : spec.changes) {
    json cj;
    cj["epoch"] = ch.epoch;
    cj["shift"] = shift_to_json(ch.shift);
    j["changes"].push_back(cj);
  }
  return j;
}

ScenarioSpec load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(errc::invalid_data, path + ": cannot open for reading");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(errc::schema, path + ": " + e.what());
  }
  try {
    return scenario_from_json(j);
  } catch (const json::exception& e) {
    throw Error(errc::schema, path + ": " + e.what());
  }
}

}  // namespace matcpd
