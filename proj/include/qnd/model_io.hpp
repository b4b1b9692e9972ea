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

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qnd/channels.hpp"
#include "qnd/inference.hpp"
#include "qnd/jumps.hpp"
#include "qnd/trajectories.hpp"

namespace qnd {

using Json = nlohmann::json;

/// Rows of [re, im] pairs. Plain numbers are accepted on input.
Json matrix_to_json(const ComplexMatrix& m);
ComplexMatrix matrix_from_json(const Json& j, const std::string& what);
Json real_matrix_to_json(const RealMatrix& m);
Json vector_to_json(const RealVector& v);
/// Finite numbers as-is; infinities and NaN as the strings "inf", "-inf", "nan".
Json number(double x);

struct HamiltonianSpec {
  std::vector<ComplexMatrix> hamiltonians;
  std::optional<double> declared_d1;
};

struct MixtureSpec {
  RealVector upsilon;
  std::vector<ComplexMatrix> maps;  ///< superoperators on column-major vec
  std::optional<RealVector> norms;
};

struct CycleSpec {
  double lambda1 = 0.0;
  double lambda2 = 1.0;
  std::size_t measurements = 1;
  ComplexMatrix hamiltonian;
};

struct ModelFile {
  std::string name;
  NonDemolitionModel model;
  std::optional<ComplexMatrix> initial_state;
  std::optional<HamiltonianSpec> hamiltonian;
  std::optional<MixtureSpec> mixture;
  std::optional<CycleSpec> cycle;
};

/// Throws ParseError for malformed documents; model validation errors propagate.
ModelFile parse_model(const Json& j);
Json model_to_json(const ModelFile& file);
ModelFile load_model(const std::filesystem::path& path);
std::string serialize_json(const Json& j);

/// Stated initial state, or the maximally mixed state.
DensityMatrix initial_state(const ModelFile& file);
/// Hamiltonian perturbation or mixture when present, else the bare model.
StepDynamics model_dynamics(const ModelFile& file);
CycleConfig cycle_config(const ModelFile& file);

std::string read_file(const std::filesystem::path& path);
/// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string sha256_hex(const std::string& content);

Json to_json(const AssumptionConstants& c);
Json to_json(const ErrorProbabilityReport& r);
Json to_json(const WindowErrorBounds& b);
Json to_json(const SanovCertificate& c);
Json to_json(const PurificationReport& r);
Json to_json(const BornRuleReport& r);
Json to_json(const ClosenessReport& r);
Json to_json(const MarkovComparison& m);
Json to_json(const HistoryReport& r, const std::vector<std::string>& fact_labels);
Json to_json(const CltDiagnostic& d);
Json to_json(const StationaryState& s);

}  // namespace qnd
