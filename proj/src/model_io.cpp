// Copyright 2026 The qndsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "qnd/model_io.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace qnd {

namespace {

[[noreturn]] void parse_fail(const std::string& what) { throw Error(ErrorCode::ParseError, what); }

const Json& field(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) parse_fail(where + ": missing field '" + key + "'");
  return j.at(key);
}

double as_double(const Json& j, const std::string& what) {
  if (!j.is_number()) parse_fail(what + ": expected a number");
  return j.get<double>();
}

Complex as_complex(const Json& j, const std::string& what) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2) return {as_double(j[0], what), as_double(j[1], what)};
  parse_fail(what + ": expected a number or [re, im]");
}

RealVector real_vector(const Json& j, const std::string& what) {
  if (!j.is_array()) parse_fail(what + ": expected an array");
  RealVector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = as_double(j[i], what);
  return v;
}

}  // namespace

Json number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

Json matrix_to_json(const ComplexMatrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(Json::array({m(i, j).real(), m(i, j).imag()}));
    rows.push_back(std::move(row));
  }
  return rows;
}

ComplexMatrix matrix_from_json(const Json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) parse_fail(what + ": expected a non-empty array of rows");
  const std::size_t rows = j.size();
  if (!j[0].is_array() || j[0].empty()) parse_fail(what + ": rows must be arrays");
  const std::size_t cols = j[0].size();
  ComplexMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) parse_fail(what + ": ragged matrix");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = as_complex(j[r][c], what);
  }
  return m;
}

Json real_matrix_to_json(const RealMatrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(number(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json vector_to_json(const RealVector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number(v[i]));
  return out;
}

// ---------------------------------------------------------------------------
// Model files

ModelFile parse_model(const Json& j) {
  if (!j.is_object()) parse_fail("model: expected a JSON object");
  const std::string name = j.value("name", std::string{});
  const Json& alphabet_json = field(j, "alphabet", "model");
  if (!alphabet_json.is_array()) parse_fail("alphabet: expected an array of strings");
  std::vector<std::string> symbols;
  for (const auto& s : alphabet_json) {
    if (!s.is_string()) parse_fail("alphabet: expected strings");
    symbols.push_back(s.get<std::string>());
  }
  OutcomeAlphabet alphabet(symbols);

  const Json& facts = field(j, "facts", "model");
  if (!facts.is_array() || facts.empty()) parse_fail("facts: expected a non-empty array");
  std::vector<std::string> labels;
  std::vector<ComplexMatrix> projectors;
  for (const auto& f : facts) {
    const Json& label = field(f, "label", "fact");
    if (!label.is_string()) parse_fail("fact label must be a string");
    labels.push_back(label.get<std::string>());
    projectors.push_back(matrix_from_json(field(f, "projector", "fact " + labels.back()), "projector " + labels.back()));
  }
  if (j.contains("dim")) {
    const Json& dim = j.at("dim");
    if (!dim.is_number_integer() || dim.get<long long>() != projectors.front().rows())
      parse_fail("dim does not match the projector size");
  }
  ProjectorFamily family(labels, projectors);

  const Json& amps = field(j, "amplitudes", "model");
  if (!amps.is_object()) parse_fail("amplitudes: expected an object keyed by outcome");
  ComplexMatrix table(static_cast<Eigen::Index>(symbols.size()), static_cast<Eigen::Index>(labels.size()));
  for (std::size_t xi = 0; xi < symbols.size(); ++xi) {
    const Json& row = field(amps, symbols[xi].c_str(), "amplitudes");
    if (!row.is_array() || row.size() != labels.size())
      parse_fail("amplitudes." + symbols[xi] + ": expected one entry per fact");
    for (std::size_t nu = 0; nu < labels.size(); ++nu)
      table(static_cast<Eigen::Index>(xi), static_cast<Eigen::Index>(nu)) =
          as_complex(row[nu], "amplitudes." + symbols[xi]);
  }
  if (amps.size() != symbols.size()) parse_fail("amplitudes: unknown outcome key");
  const bool strict = j.value("strict", false);

  ModelFile file{name, build_nd_model(std::move(family), alphabet, table, strict), {}, {}, {}, {}};

  if (j.contains("initial_state")) file.initial_state = matrix_from_json(j.at("initial_state"), "initial_state");

  if (j.contains("perturbation")) {
    const Json& p = j.at("perturbation");
    const Json& type = field(p, "type", "perturbation");
    if (type == "hamiltonian") {
      HamiltonianSpec spec;
      const Json& hs = field(p, "hamiltonians", "perturbation");
      if (!hs.is_array() || hs.empty()) parse_fail("perturbation.hamiltonians: expected a non-empty array");
      for (const auto& h : hs) spec.hamiltonians.push_back(matrix_from_json(h, "perturbation.hamiltonians"));
      if (p.contains("declared_d1")) spec.declared_d1 = as_double(p.at("declared_d1"), "perturbation.declared_d1");
      file.hamiltonian = std::move(spec);
    } else if (type == "mixture") {
      MixtureSpec spec;
      spec.upsilon = real_vector(field(p, "upsilon", "perturbation"), "perturbation.upsilon");
      const Json& maps = field(p, "maps", "perturbation");
      if (!maps.is_array()) parse_fail("perturbation.maps: expected an array");
      for (const auto& m : maps) spec.maps.push_back(matrix_from_json(m, "perturbation.maps"));
      if (p.contains("norms")) spec.norms = real_vector(p.at("norms"), "perturbation.norms");
      file.mixture = std::move(spec);
    } else {
      parse_fail("perturbation.type must be 'hamiltonian' or 'mixture'");
    }
  }

  if (j.contains("cycle")) {
    const Json& c = j.at("cycle");
    CycleSpec spec;
    spec.lambda1 = as_double(field(c, "lambda1", "cycle"), "cycle.lambda1");
    spec.lambda2 = as_double(field(c, "lambda2", "cycle"), "cycle.lambda2");
    const Json& m = field(c, "M", "cycle");
    if (!m.is_number_unsigned()) parse_fail("cycle.M: expected a positive integer");
    spec.measurements = m.get<std::size_t>();
    spec.hamiltonian = matrix_from_json(field(c, "H_P", "cycle"), "cycle.H_P");
    file.cycle = std::move(spec);
  }
  return file;
}

Json model_to_json(const ModelFile& file) {
  const NonDemolitionModel& m = file.model;
  Json j;
  if (!file.name.empty()) j["name"] = file.name;
  j["dim"] = m.dim();
  j["alphabet"] = m.alphabet().labels();
  Json facts = Json::array();
  for (std::size_t nu = 0; nu < m.num_facts(); ++nu)
    facts.push_back({{"label", m.projectors().labels()[nu]}, {"projector", matrix_to_json(m.projectors()[nu])}});
  j["facts"] = std::move(facts);
  Json amps = Json::object();
  for (std::size_t xi = 0; xi < m.num_outcomes(); ++xi) {
    Json row = Json::array();
    for (std::size_t nu = 0; nu < m.num_facts(); ++nu) {
      const Complex c = m.amplitudes()(static_cast<Eigen::Index>(xi), static_cast<Eigen::Index>(nu));
      row.push_back(Json::array({c.real(), c.imag()}));
    }
    amps[m.alphabet()[xi]] = std::move(row);
  }
  j["amplitudes"] = std::move(amps);
  if (file.initial_state) j["initial_state"] = matrix_to_json(*file.initial_state);
  if (file.hamiltonian) {
    Json p{{"type", "hamiltonian"}};
    p["hamiltonians"] = Json::array();
    for (const auto& h : file.hamiltonian->hamiltonians) p["hamiltonians"].push_back(matrix_to_json(h));
    if (file.hamiltonian->declared_d1) p["declared_d1"] = *file.hamiltonian->declared_d1;
    j["perturbation"] = std::move(p);
  }
  if (file.mixture) {
    Json p{{"type", "mixture"}};
    p["upsilon"] = vector_to_json(file.mixture->upsilon);
    p["maps"] = Json::array();
    for (const auto& s : file.mixture->maps) p["maps"].push_back(matrix_to_json(s));
    if (file.mixture->norms) p["norms"] = vector_to_json(*file.mixture->norms);
    j["perturbation"] = std::move(p);
  }
  if (file.cycle)
    j["cycle"] = {{"lambda1", file.cycle->lambda1},
                  {"lambda2", file.cycle->lambda2},
                  {"M", file.cycle->measurements},
                  {"H_P", matrix_to_json(file.cycle->hamiltonian)}};
  return j;
}

std::string serialize_json(const Json& j) { return j.dump(2) + "\n"; }

ModelFile load_model(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    parse_fail(path.string() + ": " + e.what());
  }
  try {
    return parse_model(j);
  } catch (const Json::exception& e) {
    parse_fail(path.string() + ": " + e.what());
  }
}

DensityMatrix initial_state(const ModelFile& file) {
  if (file.initial_state) {
    if (file.initial_state->rows() != file.model.dim())
      throw Error(ErrorCode::InvalidConfig, "initial state dimension mismatch");
    return validate_density(*file.initial_state);
  }
  return DensityMatrix::maximally_mixed(file.model.dim());
}

StepDynamics model_dynamics(const ModelFile& file) {
  if (file.hamiltonian)
    return build_hamiltonian_perturbation(file.model, file.hamiltonian->hamiltonians, file.hamiltonian->declared_d1);
  if (file.mixture)
    return constant_dynamics(
        build_mixture_channel(file.model.alphabet(), file.mixture->upsilon, file.mixture->maps, file.mixture->norms).maps);
  return nd_dynamics(file.model);
}

CycleConfig cycle_config(const ModelFile& file) {
  if (!file.cycle) throw Error(ErrorCode::InvalidConfig, "model file has no cycle section");
  CycleConfig cfg;
  cfg.lambda1 = file.cycle->lambda1;
  cfg.lambda2 = file.cycle->lambda2;
  cfg.measurements = file.cycle->measurements;
  cfg.hamiltonian = file.cycle->hamiltonian;
  cfg.model = std::make_shared<const NonDemolitionModel>(file.model);
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// Files and digests

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error(ErrorCode::Io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot rename onto " + path.string() + ": " + ec.message());
}

std::string sha256_hex(const std::string& content) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(content.data(), content.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorCode::Io, "sha256 failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

// ---------------------------------------------------------------------------
// Reports

Json to_json(const AssumptionConstants& c) {
  Json j{{"d1", number(c.d1)},
         {"d2", number(c.d2)},
         {"d", number(c.d)},
         {"per_outcome_norm", vector_to_json(c.per_xi_norms)},
         {"per_outcome_d2", vector_to_json(c.per_xi_d2)},
         {"mode", c.mode == ConstantsMode::Analytic ? "analytic" : "sampled"},
         {"d1_is_estimate", c.d1_is_estimate}};
  if (c.d1_upper) j["d1_upper"] = number(*c.d1_upper);
  return j;
}

Json to_json(const ErrorProbabilityReport& r) {
  Json j{{"k", r.k},
         {"r", r.r},
         {"method", r.method == ErrorMethod::Exact ? "exact" : "montecarlo"},
         {"epsilon", vector_to_json(r.epsilon)},
         {"total", number(r.total)},
         {"selection", vector_to_json(r.selection)},
         {"prior", vector_to_json(r.prior)},
         {"tie_mass", number(r.tie_mass)}};
  if (r.epsilon_se) j["epsilon_se"] = vector_to_json(*r.epsilon_se);
  if (r.total_se) j["total_se"] = number(*r.total_se);
  return j;
}

Json to_json(const WindowErrorBounds& b) {
  return {{"nd_term", number(b.nd_term)},       {"perturbation_term", number(b.perturbation_term)},
          {"nd_selection", number(b.nd_selection)}, {"selection", number(b.selection)},
          {"nd_error", number(b.nd_error)},     {"error", number(b.error)}};
}

Json to_json(const SanovCertificate& c) {
  Json ex = Json::array();
  for (double e : c.exceedance) ex.push_back(number(e));
  return {{"fact", c.nu},
          {"radius", number(c.radius)},
          {"kappa_tv", number(c.kappa_tv)},
          {"r", c.r},
          {"hits", c.hits},
          {"exceedance", std::move(ex)},
          {"fitted", c.fitted},
          {"C", number(c.C)},
          {"a", number(c.a)},
          {"rate", number(c.rate)},
          {"rate_se", number(c.rate_se)},
          {"complement_rate", number(c.complement_rate)},
          {"i_min", number(c.i_min)},
          {"passes", c.passes}};
}

Json to_json(const PurificationReport& r) {
  Json pairs = Json::array();
  for (const auto& [a, b] : r.pairs) pairs.push_back(Json::array({a, b}));
  Json dist = Json::array();
  for (double d : r.distance) dist.push_back(number(d));
  Json j{{"steps", r.steps},
         {"pairs", std::move(pairs)},
         {"offdiag", real_matrix_to_json(r.offdiag)},
         {"theta_weight", number(r.theta_weight)},
         {"distance", std::move(dist)},
         {"final_distance", number(r.final_distance)},
         {"delta", real_matrix_to_json(r.delta)}};
  j["theta"] = r.theta ? Json(*r.theta) : Json("unresolved");
  return j;
}

Json to_json(const BornRuleReport& r) {
  return {{"trajectories", r.trajectories}, {"length", r.length},
          {"counts", r.counts},             {"unresolved", r.unresolved},
          {"frequency", vector_to_json(r.frequency)}, {"lower", vector_to_json(r.lower)},
          {"upper", vector_to_json(r.upper)},         {"expected", vector_to_json(r.expected)},
          {"consistent", r.consistent}};
}

Json to_json(const ClosenessReport& r) {
  return {{"cycles", r.cycles},
          {"satisfied", r.satisfied},
          {"fraction", number(r.fraction)},
          {"epsilon", number(r.epsilon)},
          {"passes", r.passes}};
}

Json to_json(const MarkovComparison& m) {
  return {{"counts", real_matrix_to_json(m.counts)},
          {"empirical", real_matrix_to_json(m.empirical)},
          {"theoretical", real_matrix_to_json(m.theoretical)},
          {"max_abs_deviation", number(m.max_abs_deviation)},
          {"resolved_transitions", m.resolved_transitions},
          {"censored_transitions", m.censored_transitions}};
}

Json to_json(const HistoryReport& r, const std::vector<std::string>& fact_labels) {
  Json masses = Json::array();
  for (const auto& [history, mass] : r.masses) {
    Json h = Json::array();
    for (std::size_t a : history) h.push_back(fact_labels.at(a));
    masses.push_back({{"history", std::move(h)}, {"mass", number(mass)}});
  }
  Json j{{"r", r.r},
         {"p", r.p},
         {"epsilon", number(r.epsilon)},
         {"method", r.exact ? "exact" : "montecarlo"},
         {"masses", std::move(masses)},
         {"covered", number(r.covered)},
         {"uncovered", number(r.uncovered)}};
  if (r.uncovered_se) j["uncovered_se"] = number(*r.uncovered_se);
  return j;
}

Json to_json(const CltDiagnostic& d) {
  Json f = Json::array(), se = Json::array();
  for (double x : d.F) f.push_back(number(x));
  for (double x : d.F_se) se.push_back(number(x));
  return {{"h", d.h},
          {"F", std::move(f)},
          {"F_se", std::move(se)},
          {"step", number(d.step)},
          {"d1", number(d.d1)},
          {"d1_se", number(d.d1_se)},
          {"d2", number(d.d2)},
          {"d2_se", number(d.d2_se)},
          {"d3", number(d.d3)},
          {"mean_phi", number(d.mean_phi)},
          {"mean_phi_se", number(d.mean_phi_se)},
          {"var_phi", number(d.var_phi)},
          {"var_phi_se", number(d.var_phi_se)}};
}

Json to_json(const StationaryState& s) {
  return {{"state", matrix_to_json(s.state.matrix())}, {"faithful", s.faithful}, {"fixed_space_dim", s.fixed_space_dim}};
}

}  // namespace qnd
