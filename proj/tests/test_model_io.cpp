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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "qnd/model_io.hpp"
#include "test_support.hpp"

namespace {

using namespace qnd;
namespace fs = std::filesystem;

const fs::path kModels = QNDSIM_MODELS_DIR;

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::InvariantFailure;
}

Json compact_qd2() {
  return Json::parse(R"({
    "name": "inline",
    "dim": 2,
    "alphabet": ["L", "R"],
    "facts": [
      {"label": "0", "projector": [[1, 0], [0, 0]]},
      {"label": "1", "projector": [[0, 0], [0, 1]]}
    ],
    "amplitudes": {"L": [0.5477225575051661, 0.8366600265340756],
                   "R": [0.8366600265340756, 0.5477225575051661]}
  })");
}

TEST(ModelFiles, AllShippedModelsLoad) {
  for (const char* name : {"qd2", "qd2_perturbed", "qd2_flip", "qd2_nd_cycle", "qd2_mixture"}) {
    const ModelFile f = load_model(kModels / (std::string(name) + ".json"));
    EXPECT_EQ(f.name, name);
    EXPECT_NEAR(f.model.cond_probs()(0, 0), 0.3, 1e-12);
    EXPECT_NEAR(std::real(initial_state(f).matrix()(0, 0)), 0.4, 1e-12);
  }
}

TEST(ModelFiles, BadModelNamesFact) {
  try {
    load_model(kModels / "qd2_bad.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotNormalized);
    EXPECT_NE(std::string(e.what()).find("1"), std::string::npos);
  }
}

TEST(ModelFiles, RoundTripIsStable) {
  for (const auto& entry : fs::directory_iterator(kModels)) {
    if (entry.path().filename() == "qd2_bad.json") continue;
    const ModelFile a = load_model(entry.path());
    const std::string once = serialize_json(model_to_json(a));
    const ModelFile b = parse_model(Json::parse(once));
    const std::string twice = serialize_json(model_to_json(b));
    EXPECT_EQ(sha256_hex(once), sha256_hex(twice)) << entry.path();
    EXPECT_EQ(b.model.cond_probs(), a.model.cond_probs());
    EXPECT_EQ(b.cycle.has_value(), a.cycle.has_value());
    EXPECT_EQ(b.hamiltonian.has_value(), a.hamiltonian.has_value());
    EXPECT_EQ(b.mixture.has_value(), a.mixture.has_value());
  }
}

TEST(ModelFiles, CompactFormAndDefaults) {
  const ModelFile f = parse_model(compact_qd2());
  EXPECT_FALSE(f.initial_state.has_value());
  EXPECT_LT(op_norm(ComplexMatrix(initial_state(f).matrix() - ComplexMatrix::Identity(2, 2) / 2.0)), 1e-15);
  const StepDynamics dyn = model_dynamics(f);
  ASSERT_TRUE(dyn.reference().has_value());
  EXPECT_EQ(code_of([&] { cycle_config(f); }), ErrorCode::InvalidConfig);
}

TEST(ModelFiles, PerturbationAndCycleSections) {
  const ModelFile p = load_model(kModels / "qd2_perturbed.json");
  const StepDynamics dyn = model_dynamics(p);
  ASSERT_TRUE(dyn.hamiltonian_bound().has_value());
  EXPECT_NEAR(*dyn.hamiltonian_bound(), 0.005, 1e-15);
  EXPECT_EQ(p.hamiltonian->declared_d1, 0.01);

  const ModelFile m = load_model(kModels / "qd2_mixture.json");
  EXPECT_FALSE(model_dynamics(m).reference().has_value());

  const CycleConfig cfg = cycle_config(load_model(kModels / "qd2_flip.json"));
  EXPECT_EQ(cfg.measurements, 100u);
  EXPECT_NEAR(cfg.lambda2, std::acos(-1.0) / 2, 1e-15);
  EXPECT_NEAR(cfg.lambda1, cfg.lambda2 / 1000, 1e-15);
}

TEST(ModelFiles, ParseErrors) {
  auto broken = [](auto mutate) {
    Json j = compact_qd2();
    mutate(j);
    return code_of([&] { parse_model(j); });
  };
  EXPECT_EQ(broken([](Json& j) { j.erase("facts"); }), ErrorCode::ParseError);
  EXPECT_EQ(broken([](Json& j) { j["dim"] = "two"; }), ErrorCode::ParseError);
  EXPECT_EQ(broken([](Json& j) { j["facts"][0]["projector"] = Json::array({1, 0}); }), ErrorCode::ParseError);
  EXPECT_EQ(broken([](Json& j) { j["amplitudes"].erase("R"); }), ErrorCode::ParseError);
  EXPECT_EQ(broken([](Json& j) { j["perturbation"] = {{"type", "noise"}}; }), ErrorCode::ParseError);
  EXPECT_EQ(broken([](Json& j) { j["amplitudes"]["L"] = Json::array({0.5}); }), ErrorCode::ParseError);
  EXPECT_EQ(broken([](Json& j) { j["facts"][1]["projector"] = Json::parse("[[0, 0], [0, 0.5]]"); }),
            ErrorCode::NotProjectorFamily);
  const fs::path tmp = fs::temp_directory_path() / "qndsim_garbage.json";
  std::ofstream(tmp) << "{ not json";
  EXPECT_EQ(code_of([&] { load_model(tmp); }), ErrorCode::ParseError);
  fs::remove(tmp);
  EXPECT_EQ(code_of([&] { load_model(kModels / "missing.json"); }), ErrorCode::Io);
}

TEST(Serialization, MatrixAndNumbers) {
  ComplexMatrix m(2, 2);
  m << Complex(1, 2), 3, 0, Complex(0, -1);
  const ComplexMatrix back = matrix_from_json(matrix_to_json(m), "m");
  EXPECT_EQ(back, m);
  EXPECT_EQ(matrix_from_json(Json::parse("[[1, 2], [3, 4]]"), "m")(1, 0), Complex(3, 0));
  EXPECT_EQ(number(INFINITY), "inf");
  EXPECT_EQ(number(-INFINITY), "-inf");
  EXPECT_EQ(number(NAN), "nan");
  EXPECT_EQ(number(0.25), 0.25);
  // Full precision survives a text round trip.
  const double x = 0.1 + 0.2;
  EXPECT_EQ(Json::parse(serialize_json(number(x))).get<double>(), x);
}

TEST(Files, Sha256AndAtomicWrite) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  const fs::path dir = fs::temp_directory_path() / "qndsim_io_test";
  fs::create_directories(dir);
  write_file_atomic(dir / "a.txt", "first");
  write_file_atomic(dir / "a.txt", "second");
  EXPECT_EQ(read_file(dir / "a.txt"), "second");
  std::size_t n = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++n;
  EXPECT_EQ(n, 1u);
  fs::remove_all(dir);
}

TEST(Reports, JsonShapes) {
  WindowErrorBounds b;
  b.error = 0.5;
  EXPECT_EQ(to_json(b)["error"], 0.5);
  SanovCertificate c;
  c.r = {10, 20};
  c.hits = {3, 1};
  c.exceedance = {0.3, 0.1};
  const Json jc = to_json(c);
  EXPECT_EQ(jc["r"].size(), 2u);
  EXPECT_TRUE(jc.contains("passes"));
  HistoryReport h;
  h.masses[{0, 1}] = 0.25;
  const Json jh = to_json(h, {"0", "1"});
  EXPECT_EQ(jh["masses"][0]["history"], Json::array({"0", "1"}));
  EXPECT_EQ(jh["masses"][0]["mass"], 0.25);
  ErrorProbabilityReport e;
  e.epsilon = RealVector::Zero(2);
  e.selection = RealVector::Zero(2);
  e.prior = RealVector::Zero(2);
  EXPECT_EQ(to_json(e)["method"], "exact");
}

}  // namespace
