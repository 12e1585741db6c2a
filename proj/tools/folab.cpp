// folab: batch front end for experiment configs.
//
//   folab run <config.json> [--out DIR] [--threads N] [--allow-unchecked]
//   folab verify <config.json> [--out DIR] [--seed S]
//   folab spectrum|asymptotics|flow --operator NAME|FILE [task flags]
//
// Exit codes: 0 ok, 1 verification or task failure, 2 usage or config error.

#include "folab/experiment.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kUsage = 2;

struct Common {
  std::string out;
  int threads = 0;
  bool allow_unchecked = false;
  bool bit_reproducible = false;
  std::optional<std::uint64_t> seed;
};

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw folab::ConfigError("cannot read " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw folab::ConfigError(path + ": " + e.what());
  }
}

/// A builtin name, or the path of an operator JSON file.
json operator_argument(const std::string& arg) {
  if (fs::exists(arg)) return read_json(arg);
  return arg;
}

void apply_common(json& cfg, const Common& c) {
  if (!c.out.empty()) cfg["output_dir"] = c.out;
  if (c.threads > 0) cfg["threads"] = c.threads;
  if (c.allow_unchecked) cfg["allow_unchecked"] = true;
  if (c.bit_reproducible) cfg["bit_reproducible"] = true;
  if (c.seed) cfg["seed"] = *c.seed;
}

void write_report(const fs::path& dir, const json& report) {
  std::ofstream out(dir / "report.json");
  if (!out) throw folab::Error("cannot write " + (dir / "report.json").string());
  out << report.dump(2) << '\n';
}

/// Validates everything, then creates the output directory and runs.
int run_config(json raw, const Common& common) {
  apply_common(raw, common);
  folab::ExperimentConfig cfg;
  folab::OperatorData op;
  try {
    cfg = folab::parse_config(raw);
    op = folab::resolve_operator(cfg.operator_spec, cfg.seed, cfg.allow_unchecked);
  } catch (const std::exception& e) {
    std::cerr << "folab: invalid config: " << e.what() << '\n';
    return kUsage;
  }
  if (cfg.threads > 0) folab::set_thread_count(cfg.threads);
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  folab::RunOutcome out = folab::run_experiment(cfg, op, dir);
  write_report(dir, out.report);
  for (const auto& t : out.report["tasks"])
    std::cout << t["index"].get<int>() << ' ' << t["task"].get<std::string>() << ": " << t["status"].get<std::string>()
              << (t.contains("error") ? " (" + t["error"].get<std::string>() + ")" : std::string()) << '\n';
  std::cout << "report: " << (dir / "report.json").string() << '\n';
  return out.exit_code();
}

int verify_config(json raw, const Common& common) {
  apply_common(raw, common);
  folab::ExperimentConfig cfg;
  folab::OperatorData op;
  try {
    // The task list is irrelevant here; only the operator, seed and output matter.
    if (raw.is_object()) raw["tasks"] = json::array({"ellipticity"});
    cfg = folab::parse_config(raw);
    op = folab::resolve_operator(cfg.operator_spec, cfg.seed, cfg.allow_unchecked);
  } catch (const std::exception& e) {
    std::cerr << "folab: invalid config: " << e.what() << '\n';
    return kUsage;
  }
  if (cfg.threads > 0) folab::set_thread_count(cfg.threads);
  folab::VerifyOptions vo;
  vo.seed = cfg.seed.value_or(vo.seed);
  const folab::VerifyReport rep = folab::verify_all(op, vo);
  for (const auto& r : rep.results) {
    const char* status = !r.applicable ? "SKIP" : (r.passed ? "PASS" : "FAIL");
    std::printf("%-4s %-16s %-32s", status, r.module.c_str(), r.name.c_str());
    if (r.applicable) std::printf(" value=%.3e tol=%.1e", r.value, r.tolerance);
    if (!r.note.empty()) std::printf("  [%s]", r.note.c_str());
    std::printf("\n");
  }
  if (raw.contains("output_dir")) {
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    json report{{"name", cfg.name}, {"operator", cfg.operator_spec}, {"seed", vo.seed}, {"verify", folab::to_json(rep)}};
    if (cfg.bit_reproducible)
      for (auto& r : report["verify"]["results"]) r.erase("seconds");
    write_report(dir, report);
  }
  std::printf("%zu failure(s)\n", rep.failures());
  return rep.all_passed() ? 0 : 1;
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--out", c.out, "output directory");
  app->add_option("--threads", c.threads, "worker threads (default: FOLAB_THREADS or hardware)");
  app->add_flag("--allow-unchecked", c.allow_unchecked, "skip Hermiticity and ellipticity checks on load");
  app->add_flag("--bit-reproducible", c.bit_reproducible, "omit timings from the report");
  app->add_option("--seed", c.seed, "random seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"folab: first-order matrix operators on tori"};
  app.require_subcommand(1);
  Common common;

  std::string config_path;
  auto* run = app.add_subcommand("run", "run an experiment config");
  run->add_option("config", config_path, "config JSON")->required();
  add_common(run, common);

  auto* verify = app.add_subcommand("verify", "run the invariant suite on a config's operator");
  verify->add_option("config", config_path, "config JSON")->required();
  add_common(verify, common);

  std::string op_arg;
  int K = 8;
  std::string method = "galerkin";
  std::optional<double> radius, margin;
  auto* spec = app.add_subcommand("spectrum", "spectrum of an operator");
  spec->add_option("--operator", op_arg, "builtin name or operator JSON file")->required();
  spec->add_option("--K", K, "Fourier mode cutoff");
  spec->add_option("--method", method, "galerkin, generalized or lattice")
      ->check(CLI::IsMember({"galerkin", "generalized", "lattice"}));
  spec->add_option("--radius", radius, "eigenvalue radius (lattice)");
  spec->add_option("--margin", margin, "trust-radius margin");
  add_common(spec, common);

  bool three_d = false;
  std::optional<int> azimuth, polar, x_nodes;
  auto* asym = app.add_subcommand("asymptotics", "two-term Weyl coefficients");
  asym->add_option("--operator", op_arg, "builtin name or operator JSON file")->required();
  asym->add_flag("--geometric", three_d, "use the three-dimensional geometric route");
  asym->add_option("--sphere-azimuth", azimuth, "sphere rule azimuthal nodes");
  asym->add_option("--sphere-polar", polar, "sphere rule polar nodes");
  asym->add_option("--x-nodes-max", x_nodes, "maximal torus nodes per axis");
  add_common(asym, common);

  int branch = 1;
  double t_final = 1.0;
  std::vector<double> y, q;
  auto* flow = app.add_subcommand("flow", "Hamiltonian trajectory and transport amplitude");
  flow->add_option("--operator", op_arg, "builtin name or operator JSON file")->required();
  flow->add_option("--branch", branch, "eigenvalue branch (1-based)");
  flow->add_option("--t", t_final, "final time");
  flow->add_option("--y", y, "initial position")->delimiter(',');
  flow->add_option("--q", q, "initial momentum")->delimiter(',');
  add_common(flow, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*run || *verify) {
      json raw;
      try {
        raw = read_json(config_path);
      } catch (const std::exception& e) {
        std::cerr << "folab: " << e.what() << '\n';
        return kUsage;
      }
      return *run ? run_config(std::move(raw), common) : verify_config(std::move(raw), common);
    }

    json op;
    try {
      op = operator_argument(op_arg);
    } catch (const std::exception& e) {
      std::cerr << "folab: " << e.what() << '\n';
      return kUsage;
    }
    json task;
    if (*spec) {
      task = {{"task", "spectrum"}, {"K", K}, {"method", method}};
      if (radius) task["radius"] = *radius;
      if (margin) task["margin"] = *margin;
    } else if (*asym) {
      task = {{"task", three_d ? "asymptotics-3d" : "asymptotics"}};
      if (!three_d) {
        if (azimuth) task["sphere_azimuth"] = *azimuth;
        if (polar) task["sphere_polar"] = *polar;
        if (x_nodes) task["x_nodes_max"] = *x_nodes;
      }
    } else {
      task = {{"task", "flow"}, {"branch", branch}, {"t", t_final}};
      if (!y.empty()) task["y"] = y;
      if (!q.empty()) task["q"] = q;
    }
    json cfg{{"operator", op}, {"tasks", json::array({task})}, {"output_dir", "folab-out"}};
    return run_config(std::move(cfg), common);
  } catch (const std::exception& e) {
    std::cerr << "folab: " << e.what() << '\n';
    return 1;
  }
}
