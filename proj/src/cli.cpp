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

#include "qnd/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "qnd/model_io.hpp"

#ifndef QNDSIM_VERSION
#define QNDSIM_VERSION "0.0.0"
#endif

namespace qnd::cli {

namespace fs = std::filesystem;

namespace {

struct RunConfig {
  std::string command;
  std::string model;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t k = 0;
  std::size_t r = 8;
  std::size_t p = 2;
  std::size_t n_traj = 1000;
  std::size_t n_cycles = 200;
  std::size_t length = 200;
  std::size_t stride = 0;
  std::optional<double> epsilon;
  std::string method;
  std::string sweep;
  std::string sweep_command = "estimate";
  std::vector<double> h_grid;
};

Json snapshot(const RunConfig& c) {
  Json j{{"command", c.command}, {"model", c.model},     {"out", c.out},        {"k", c.k},
         {"r", c.r},             {"p", c.p},             {"n_traj", c.n_traj},  {"n_cycles", c.n_cycles},
         {"length", c.length},   {"stride", c.stride},   {"method", c.method},  {"sweep", c.sweep},
         {"sweep_command", c.sweep_command}, {"h_grid", c.h_grid}};
  j["seed"] = c.seed ? Json(*c.seed) : Json(nullptr);
  j["epsilon"] = c.epsilon ? Json(*c.epsilon) : Json(nullptr);
  return j;
}

[[noreturn]] void usage(const std::string& what) { throw Error(ErrorCode::Usage, what); }

void apply_config_file(RunConfig& c, const fs::path& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::ParseError, path.string() + ": expected a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "model") c.model = value.get<std::string>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "out") c.out = value.get<std::string>();
      else if (key == "k") c.k = value.get<std::size_t>();
      else if (key == "r") c.r = value.get<std::size_t>();
      else if (key == "p") c.p = value.get<std::size_t>();
      else if (key == "n_traj") c.n_traj = value.get<std::size_t>();
      else if (key == "n_cycles") c.n_cycles = value.get<std::size_t>();
      else if (key == "length") c.length = value.get<std::size_t>();
      else if (key == "stride") c.stride = value.get<std::size_t>();
      else if (key == "epsilon") c.epsilon = value.get<double>();
      else if (key == "method") c.method = value.get<std::string>();
      else if (key == "sweep") c.sweep = value.get<std::string>();
      else if (key == "sweep_command") c.sweep_command = value.get<std::string>();
      else if (key == "h_grid") c.h_grid = value.get<std::vector<double>>();
      else usage("unknown config key '" + key + "'");
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Collects outputs of one run and writes the manifest last.
class OutputSet {
 public:
  explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create " + dir_.string() + ": " + ec.message());
  }

  void write(const std::string& name, const std::string& content) {
    write_file_atomic(dir_ / name, content);
    files_.push_back({{"file", name}, {"sha256", sha256_hex(content)}, {"bytes", content.size()}});
  }

  void write_json(const std::string& name, const Json& j) { write(name, serialize_json(j)); }

  void finish(const RunConfig& config, const Json& elapsed) {
    Json manifest{{"version", QNDSIM_VERSION}, {"config", snapshot(config)}, {"outputs", files_}, {"elapsed_seconds", elapsed}};
    write_file_atomic(dir_ / "manifest.json", serialize_json(manifest));
  }

  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  Json files_ = Json::array();
};

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

ModelFile load_checked(const RunConfig& c) {
  if (c.model.empty()) usage("--model is required");
  try {
    return load_model(c.model);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ParseError || e.code() == ErrorCode::Io) throw;
    throw Error(ErrorCode::InvariantFailure, e.what());
  }
}

std::uint64_t require_seed(const RunConfig& c) {
  if (!c.seed) usage("--seed is required for " + c.command);
  return *c.seed;
}

OutputSet require_out(const RunConfig& c) {
  if (c.out.empty()) usage("--out is required for " + c.command);
  return OutputSet(c.out);
}

ErrorMethod error_method(const std::string& m) {
  if (m.empty() || m == "exact") return ErrorMethod::Exact;
  if (m == "mc") return ErrorMethod::MonteCarlo;
  usage("--method must be exact or mc");
}

// ---------------------------------------------------------------------------

int cmd_validate(const RunConfig& c, std::ostream& out) {
  Stopwatch clock;
  const ModelFile file = load_checked(c);
  const NonDemolitionModel& m = file.model;
  Json report{{"name", file.name}, {"dim", m.dim()}, {"facts", m.projectors().labels()}, {"alphabet", m.alphabet().labels()}};
  Json checks = Json::object();
  bool ok = true;
  auto check = [&](const std::string& name, double value, double limit) {
    const bool pass = value <= limit;
    checks[name] = {{"value", number(value)}, {"limit", limit}, {"pass", pass}};
    ok = ok && pass;
  };

  check("completeness", m.channel().completeness_residual(), 1e-10);
  check("map_commutation", check_map_commutation(m.channel()).maxCoeff(), 1e-10);
  check("unital_commutation", check_unital_images_commute(m.channel()), 1e-10);
  const JointSpectrum spectrum = joint_spectral_projectors(m.channel());
  check("joint_spectrum", spectrum_mismatch(spectrum, m.projectors(), m.cond_probs()), 1e-8);
  report["stationary"] = to_json(stationary_state(m.channel()));

  const std::string once = serialize_json(model_to_json(file));
  const std::string twice = serialize_json(model_to_json(parse_model(Json::parse(once))));
  checks["roundtrip"] = {{"sha256", sha256_hex(once)}, {"pass", once == twice}};
  ok = ok && once == twice;

  auto guarded = [&](const std::string& name, const std::function<Json()>& body) {
    try {
      report[name] = body();
    } catch (const Error& e) {
      report[name] = {{"error", e.what()}};
      ok = false;
    }
  };
  guarded("initial_state", [&] { return matrix_to_json(initial_state(file).matrix()); });
  if (file.mixture) {
    guarded("mixture", [&] {
      const MixtureChannel mix =
          build_mixture_channel(m.alphabet(), file.mixture->upsilon, file.mixture->maps, file.mixture->norms);
      return Json{{"d2", number(mix.d2)},
                  {"per_outcome_d2", vector_to_json(mix.per_xi_d2)},
                  {"upsilon_norms", vector_to_json(mix.upsilon_norms)},
                  {"completeness", number(mix.maps.completeness_residual())}};
    });
  } else {
    guarded("constants", [&] { return to_json(assumption_constants(model_dynamics(file), ConstantsMode::Analytic)); });
  }
  if (file.cycle) guarded("cycle", [&] {
      const CycleConfig cfg = cycle_config(file);
      return Json{{"theoretical_transitions",
                   real_matrix_to_json(theoretical_transition_matrix(m.projectors(), cfg.hamiltonian, cfg.lambda2))}};
    });
  report["checks"] = std::move(checks);
  report["pass"] = ok;

  out << serialize_json(report);
  if (!c.out.empty()) {
    OutputSet outputs(c.out);
    outputs.write_json("validate.json", report);
    outputs.finish(c, {{"validate", clock.lap()}});
  }
  return ok ? kSuccess : kCheckFailure;
}

int cmd_simulate(const RunConfig& c, std::ostream& out) {
  const std::uint64_t seed = require_seed(c);
  Stopwatch clock;
  const ModelFile file = load_checked(c);
  OutputSet outputs = require_out(c);
  const StepDynamics dyn = model_dynamics(file);
  const DensityMatrix rho0 = initial_state(file);
  TrajectoryOptions options;
  options.store_states = c.stride > 0;
  options.stride = c.stride;

  std::string lines;
  std::string states;
  std::vector<std::size_t> counts(dyn.alphabet().size(), 0);
  double log_prob_sum = 0.0;
  for (std::size_t s = 0; s < c.n_traj; ++s) {
    const TrajectoryRecord rec = sample_trajectory(dyn, rho0, c.length, seed, s, options);
    lines += format_trajectory_line(rec, dyn.alphabet()) + "\n";
    for (std::size_t xi : rec.protocol) ++counts[xi];
    log_prob_sum += rec.log_prob;
    if (options.store_states) {
      Json mats = Json::array();
      for (const auto& st : rec.states) mats.push_back(matrix_to_json(st.matrix()));
      states += Json{{"stream", s}, {"steps", rec.state_steps}, {"states", std::move(mats)}}.dump() + "\n";
    }
  }
  const double sim_time = clock.lap();
  outputs.write("trajectories.tsv", lines);
  if (options.store_states) outputs.write("states.jsonl", states);
  Json summary{{"trajectories", c.n_traj},
               {"length", c.length},
               {"outcome_counts", counts},
               {"mean_log_prob", number(c.n_traj ? log_prob_sum / static_cast<double>(c.n_traj) : 0.0)}};
  outputs.write_json("simulate.json", summary);
  outputs.finish(c, {{"simulate", sim_time}, {"write", clock.lap()}});
  out << serialize_json(summary);
  return kSuccess;
}

int cmd_estimate(const RunConfig& c, std::ostream& out) {
  const std::uint64_t seed = require_seed(c);
  Stopwatch clock;
  const ModelFile file = load_checked(c);
  OutputSet outputs = require_out(c);
  ErrorProbabilityOptions options;
  options.method = error_method(c.method);
  options.samples = c.n_traj;
  options.seed = seed;
  const ErrorProbabilityReport report = error_probability(model_dynamics(file), initial_state(file), c.k, c.r, options);
  const double t = clock.lap();
  std::string table = "fact\tepsilon\tstderr\n";
  for (std::size_t nu = 0; nu < file.model.num_facts(); ++nu) {
    const auto i = static_cast<Eigen::Index>(nu);
    table += file.model.projectors().labels()[nu] + "\t" + fmt(report.epsilon[i]) + "\t" +
             (report.epsilon_se ? fmt((*report.epsilon_se)[i]) : std::string("0")) + "\n";
  }
  const Json j = to_json(report);
  outputs.write_json("estimate.json", j);
  outputs.write("estimate.tsv", table);
  outputs.finish(c, {{"estimate", t}});
  out << serialize_json(j);
  return kSuccess;
}

int cmd_bounds(const RunConfig& c, std::ostream& out) {
  const std::uint64_t seed = require_seed(c);
  Stopwatch clock;
  const ModelFile file = load_checked(c);
  OutputSet outputs = require_out(c);
  const StepDynamics dyn = model_dynamics(file);
  const DensityMatrix rho0 = initial_state(file);
  const NonDemolitionModel& m = file.model;

  SampledConstantsOptions sampled;
  sampled.seed = seed;
  const AssumptionConstants constants = assumption_constants(
      dyn, dyn.hamiltonian_bound() ? ConstantsMode::Analytic : ConstantsMode::Sampled, sampled);
  Json report{{"constants", to_json(constants)}, {"k", c.k}, {"r", c.r}};

  SanovOptions sanov;
  sanov.samples = c.n_traj;
  sanov.seed = seed;
  std::vector<SanovCertificate> certs;
  Json cert_json = Json::array();
  for (std::size_t nu = 0; nu < m.num_facts(); ++nu) {
    certs.push_back(sanov_certificate(m, nu, sanov));
    cert_json.push_back(to_json(certs.back()));
  }
  report["sanov"] = std::move(cert_json);

  ErrorProbabilityOptions eopt;
  eopt.method = error_method(c.method);
  eopt.samples = std::max<std::size_t>(c.n_traj, 2);
  eopt.seed = seed;
  const ErrorProbabilityReport measured = error_probability(dyn, rho0, c.k, c.r, eopt);
  report["measured"] = to_json(measured);

  bool ok = true;
  try {
    const auto [C, a] = uniform_sanov_constants(certs);
    const WindowErrorBounds b = window_error_bounds(constants, C, a, c.k, c.r);
    report["C"] = number(C);
    report["a"] = number(a);
    report["bound"] = to_json(b);
    ok = measured.epsilon.maxCoeff() <= b.error;
    report["holds"] = ok;
  } catch (const Error& e) {
    report["bound"] = {{"error", e.what()}};
    ok = false;
  }
  const double t = clock.lap();
  outputs.write_json("bounds.json", report);
  outputs.finish(c, {{"bounds", t}});
  out << serialize_json(report);
  return ok ? kSuccess : kCheckFailure;
}

int cmd_purify(const RunConfig& c, std::ostream& out) {
  const std::uint64_t seed = require_seed(c);
  Stopwatch clock;
  const ModelFile file = load_checked(c);
  OutputSet outputs = require_out(c);
  const StepDynamics dyn = model_dynamics(file);
  const DensityMatrix rho0 = initial_state(file);
  const NonDemolitionModel& m = file.model;
  TrajectoryOptions options;
  options.store_states = true;
  options.stride = c.stride;

  BornRuleReport born;
  born.trajectories = c.n_traj;
  born.length = c.length;
  born.counts.assign(m.num_facts(), 0);
  RealMatrix offdiag_sum;
  std::vector<std::size_t> steps;
  std::vector<double> distance_sum;
  std::size_t resolved = 0;
  for (std::size_t s = 0; s < c.n_traj; ++s) {
    const PurificationReport pr = purification_analysis(sample_trajectory(dyn, rho0, c.length, seed, s, options), m);
    if (s == 0) {
      steps = pr.steps;
      offdiag_sum = RealMatrix::Zero(pr.offdiag.rows(), pr.offdiag.cols());
      distance_sum.assign(steps.size(), 0.0);
    }
    offdiag_sum += pr.offdiag;
    if (pr.theta) {
      ++born.counts[*pr.theta];
      ++resolved;
      for (std::size_t i = 0; i < pr.distance.size(); ++i) distance_sum[i] += pr.distance[i];
    } else {
      ++born.unresolved;
    }
  }
  born.expected = m.projectors().weights(rho0.matrix());
  const auto n_facts = static_cast<Eigen::Index>(m.num_facts());
  born.frequency = RealVector::Zero(n_facts);
  born.lower = RealVector::Zero(n_facts);
  born.upper = RealVector::Zero(n_facts);
  for (Eigen::Index nu = 0; nu < n_facts && c.n_traj > 0; ++nu) {
    const std::size_t hits = born.counts[static_cast<std::size_t>(nu)];
    born.frequency[nu] = static_cast<double>(hits) / static_cast<double>(c.n_traj);
    std::tie(born.lower[nu], born.upper[nu]) = wilson_interval(hits, c.n_traj, 3.0);
    born.consistent = born.consistent && born.expected[nu] >= born.lower[nu] && born.expected[nu] <= born.upper[nu];
  }

  std::string table = "k";
  for (Eigen::Index a = 0; a < n_facts; ++a)
    for (Eigen::Index b = a + 1; b < n_facts; ++b)
      table += "\toffdiag_" + m.projectors().labels()[static_cast<std::size_t>(a)] + "_" +
               m.projectors().labels()[static_cast<std::size_t>(b)];
  table += "\tdistance\n";
  Json mean_offdiag = Json::array();
  Json mean_distance = Json::array();
  for (std::size_t i = 0; i < steps.size(); ++i) {
    table += std::to_string(steps[i]);
    Json row = Json::array();
    for (Eigen::Index p = 0; p < offdiag_sum.cols(); ++p) {
      const double v = offdiag_sum(static_cast<Eigen::Index>(i), p) / static_cast<double>(c.n_traj);
      table += "\t" + fmt(v);
      row.push_back(number(v));
    }
    const double d = resolved ? distance_sum[i] / static_cast<double>(resolved) : 0.0;
    table += "\t" + fmt(d) + "\n";
    mean_offdiag.push_back(std::move(row));
    mean_distance.push_back(number(d));
  }
  Json report{{"born", to_json(born)},
              {"steps", steps},
              {"mean_offdiag", std::move(mean_offdiag)},
              {"mean_distance_resolved", std::move(mean_distance)},
              {"delta", real_matrix_to_json(bhattacharyya_coefficients(m))}};
  const double t = clock.lap();
  outputs.write_json("purify.json", report);
  outputs.write("offdiag.tsv", table);
  outputs.finish(c, {{"purify", t}});
  out << serialize_json(to_json(born));
  return kSuccess;
}

int cmd_jumps(const RunConfig& c, std::ostream& out) {
  const std::uint64_t seed = require_seed(c);
  Stopwatch clock;
  const ModelFile file = load_checked(c);
  OutputSet outputs = require_out(c);
  const CycleConfig cfg = cycle_config(file);
  const CycleRun run = run_cycles(cfg, initial_state(file), c.n_cycles, seed);
  const auto& labels = file.model.projectors().labels();
  std::string table = "cycle\tnu_hat\ttie\tmax_weight\tblock_distance\n";
  for (const auto& cy : run.jumps.cycles)
    table += std::to_string(cy.cycle) + "\t" + labels[cy.nu_hat] + "\t" + (cy.tie ? "1" : "0") + "\t" +
             fmt(cy.max_weight) + "\t" + fmt(cy.block_distance) + "\n";
  Json report{{"closeness", to_json(closeness_from_run(run.jumps, c.epsilon.value_or(0.05)))}};
  try {
    report["markov"] = to_json(markov_from_run(run.jumps, cfg));
  } catch (const Error& e) {
    report["markov"] = {{"error", e.what()}};
  }
  const double t = clock.lap();
  outputs.write("jumps.tsv", table);
  outputs.write_json("jumps.json", report);
  outputs.finish(c, {{"jumps", t}});
  out << serialize_json(report);
  return kSuccess;
}

int cmd_histories(const RunConfig& c, std::ostream& out) {
  const std::uint64_t seed = require_seed(c);
  Stopwatch clock;
  const ModelFile file = load_checked(c);
  OutputSet outputs = require_out(c);
  HistoryOptions options;
  options.r = c.r;
  options.p = c.p;
  options.epsilon = c.epsilon;
  options.samples = c.n_traj;
  options.seed = seed;
  if (c.method.empty() || c.method == "auto") options.method = HistoryMethod::Auto;
  else if (c.method == "exact") options.method = HistoryMethod::Exact;
  else if (c.method == "mc") options.method = HistoryMethod::MonteCarlo;
  else usage("--method must be exact, mc or auto");
  const HistoryReport report = history_sets_probability(model_dynamics(file), initial_state(file), options);
  const Json j = to_json(report, file.model.projectors().labels());
  const double t = clock.lap();
  outputs.write_json("histories.json", j);
  outputs.finish(c, {{"histories", t}});
  out << serialize_json(j);
  return kSuccess;
}

int dispatch(const RunConfig& c, std::ostream& out);

int cmd_sweep(const RunConfig& c, std::ostream& out) {
  const auto colon = c.sweep.find(':');
  if (colon == std::string::npos) usage("--sweep expects param:v1,v2,...");
  const std::string param = c.sweep.substr(0, colon);
  std::vector<std::string> values;
  std::stringstream ss(c.sweep.substr(colon + 1));
  for (std::string v; std::getline(ss, v, ',');)
    if (!v.empty()) values.push_back(v);
  if (values.empty()) usage("--sweep has no values");
  if (c.sweep_command == "sweep" || c.sweep_command == "validate") usage("cannot sweep " + c.sweep_command);
  OutputSet outputs = require_out(c);
  Stopwatch clock;
  Json elapsed = Json::object();
  int worst = kSuccess;
  for (const auto& v : values) {
    RunConfig sub = c;
    sub.command = c.sweep_command;
    sub.sweep.clear();
    sub.out = (fs::path(c.out) / (param + "=" + v)).string();
    try {
      const std::size_t n = std::stoull(v);
      if (param == "k") sub.k = n;
      else if (param == "r") sub.r = n;
      else if (param == "p") sub.p = n;
      else if (param == "n_traj") sub.n_traj = n;
      else if (param == "n_cycles") sub.n_cycles = n;
      else if (param == "length") sub.length = n;
      else if (param == "stride") sub.stride = n;
      else if (param == "seed") sub.seed = n;
      else if (param == "epsilon") sub.epsilon = std::stod(v);
      else usage("cannot sweep parameter '" + param + "'");
    } catch (const std::logic_error&) {
      usage("bad sweep value '" + v + "'");
    }
    std::ostringstream sink;
    worst = std::max(worst, dispatch(sub, sink));
    const std::string manifest = read_file(fs::path(sub.out) / "manifest.json");
    outputs.write(param + "=" + v + ".manifest.json", manifest);
    elapsed[v] = clock.lap();
  }
  outputs.finish(c, elapsed);
  out << "sweep over " << param << ": " << values.size() << " points\n";
  return worst;
}

int dispatch(const RunConfig& c, std::ostream& out) {
  if (c.command == "validate") return cmd_validate(c, out);
  if (c.command == "simulate") return cmd_simulate(c, out);
  if (c.command == "estimate") return cmd_estimate(c, out);
  if (c.command == "bounds") return cmd_bounds(c, out);
  if (c.command == "purify") return cmd_purify(c, out);
  if (c.command == "jumps") return cmd_jumps(c, out);
  if (c.command == "histories") return cmd_histories(c, out);
  if (c.command == "sweep") return cmd_sweep(c, out);
  usage("unknown command '" + c.command + "'");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Repeated indirect measurement simulator", "qndsim"};
  app.set_version_flag("--version", std::string(QNDSIM_VERSION));
  app.require_subcommand(1);
  app.fallthrough();

  RunConfig c;
  std::uint64_t seed = 0;
  double epsilon = 0.0;
  std::string config_path;
  app.add_option("--model", c.model, "model file (JSON)");
  auto* seed_opt = app.add_option("--seed", seed, "64-bit RNG seed");
  app.add_option("--out", c.out, "output directory");
  app.add_option("--k", c.k, "window start");
  app.add_option("--r", c.r, "window length");
  app.add_option("--p", c.p, "number of history windows");
  app.add_option("--n-traj", c.n_traj, "trajectories or samples");
  app.add_option("--n-cycles", c.n_cycles, "measurement cycles");
  app.add_option("--length", c.length, "trajectory length");
  auto* eps_opt = app.add_option("--epsilon", epsilon, "closeness or window tolerance");
  app.add_option("--method", c.method, "exact | mc (histories also: auto)");
  app.add_option("--stride", c.stride, "state storage stride");
  app.add_option("--sweep", c.sweep, "param:v1,v2,...");
  app.add_option("--command", c.sweep_command, "command run by sweep");
  app.add_option("--config", config_path, "JSON config overriding flags");

  const std::pair<const char*, const char*> commands[] = {
      {"validate", "check model invariants and print a JSON report"},
      {"simulate", "sample trajectories"},
      {"estimate", "window estimator error probability"},
      {"bounds", "Sanov fits and perturbed window bounds"},
      {"purify", "conditional-state purification"},
      {"jumps", "measurement cycles, closeness and transitions"},
      {"histories", "probability of fact histories"},
      {"sweep", "repeat a command over parameter values"},
  };
  for (const auto& [name, help] : commands)
    app.add_subcommand(name, help)->callback([&c, name = name] { c.command = name; });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsage;
  }

  try {
    if (seed_opt->count() > 0) c.seed = seed;
    if (eps_opt->count() > 0) c.epsilon = epsilon;
    if (!config_path.empty()) apply_config_file(c, config_path);
    return dispatch(c, out);
  } catch (const Error& e) {
    err << "qndsim: " << e.what() << "\n";
    switch (e.code()) {
      case ErrorCode::Usage: return kUsage;
      case ErrorCode::ParseError:
      case ErrorCode::Io: return kIo;
      default: return kCheckFailure;
    }
  } catch (const std::exception& e) {
    err << "qndsim: " << e.what() << "\n";
    return kCheckFailure;
  }
}

}  // namespace qnd::cli
