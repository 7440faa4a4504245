// Batch entry point: simulators and diagnostics behind one binary.
//
// Exit codes: 0 success, 1 invalid input, 2 numerical failure, 64 usage error.

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "levylab.hpp"

namespace {

using levylab::Json;

constexpr int kExitValidation = 1;
constexpr int kExitNumeric = 2;
constexpr int kExitUsage = 64;

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << v;
  return out.str();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw levylab::ValidationError("cannot open " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

// Writes through a temporary file in the same directory, then renames.
void write_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw levylab::ValidationError("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw levylab::ValidationError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

levylab::Point parse_point(const std::string& text) {
  std::vector<double> values;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw levylab::ValidationError("malformed coordinate list '" + text + "'");
    }
  }
  if (values.empty()) throw levylab::ValidationError("empty coordinate list");
  return Eigen::Map<levylab::Point>(values.data(), static_cast<Eigen::Index>(values.size()));
}

// Options shared by every subcommand.
struct Common {
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  std::string out;

  void attach(CLI::App* app, bool out_required) {
    app->add_option("--seed", seed, "RNG seed (falls back to LEVYLAB_SEED, then 0)");
    app->add_option("--threads", threads, "Worker threads (0: all cores)");
    auto* opt = app->add_option("--out", out, "Output path");
    if (out_required) opt->required();
  }

  std::uint64_t resolved_seed() const {
    if (seed) return *seed;
    if (const char* env = std::getenv("LEVYLAB_SEED")) {
      try {
        return std::stoull(env);
      } catch (const std::logic_error&) {
        throw levylab::ValidationError(std::string("LEVYLAB_SEED is not an integer: ") + env);
      }
    }
    return 0;
  }
};

// Options shared by the simulators.
struct Sim {
  double horizon = 1.0;
  std::size_t paths = 1000;
  std::size_t points = 101;
  double escape = 1e6;

  void attach(CLI::App* app) {
    app->add_option("--T", horizon, "Time horizon")->required();
    app->add_option("--paths", paths, "Number of paths");
    app->add_option("--points", points, "Output grid points on [0, T]");
    app->add_option("--escape-radius", escape, "Paths beyond this radius explode");
  }

  levylab::SimConfig config(std::uint64_t seed, unsigned threads) const {
    if (points < 2) throw levylab::ValidationError("--points must be >= 2");
    if (!(horizon > 0.0)) throw levylab::ValidationError("--T must be positive");
    levylab::SimConfig c;
    c.paths = paths;
    c.seed = seed;
    c.threads = threads;
    c.escape_radius = escape;
    c.grid = levylab::uniform_grid(horizon, horizon / static_cast<double>(points - 1));
    return c;
  }

  Json describe() const { return {{"T", horizon}, {"paths", paths}, {"points", points}, {"escape_radius", escape}}; }
};

struct Run {
  std::string command;
  Json config;             // every input that affects the outputs
  std::vector<std::string> outputs;
  Json report;             // printed inside the manifest when not written to a file
};

void emit_manifest(const Run& run, std::uint64_t seed, double seconds) {
  Json manifest = {{"command", run.command},
                   {"seed", seed},
                   {"config_hash", hex(fnv1a(run.config.dump()))},
                   {"config", run.config},
                   {"version", levylab::kVersion},
                   {"outputs", run.outputs},
                   {"wall_time_seconds", seconds}};
  if (!run.report.is_null()) manifest["report"] = run.report;
  std::cout << manifest.dump(2) << "\n";
}

void write_report(Run& run, const std::string& out, Json report) {
  if (out.empty()) {
    run.report = std::move(report);
    return;
  }
  write_atomic(out, report.dump(2) + "\n");
  run.outputs.push_back(out);
}

void write_paths(Run& run, const std::string& out, const levylab::PathBatch& batch) {
  write_atomic(out, levylab::paths_csv_string(batch));
  run.outputs.push_back(out);
}

levylab::Potential load_potential(const std::string& spec, std::optional<double> mesh, double lo, double hi,
                                  double spacing, Json& description) {
  if (std::filesystem::is_regular_file(spec)) {
    const std::string text = read_file(spec);
    description = {{"file", spec}, {"content_hash", hex(fnv1a(text))}};
    std::vector<std::pair<double, double>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos) throw levylab::ValidationError("potential file rows must be 'x,value'");
      try {
        rows.emplace_back(std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1)));
      } catch (const std::logic_error&) {
        if (rows.empty()) continue;  // header line
        throw levylab::ValidationError("malformed potential row '" + line + "'");
      }
    }
    if (rows.empty()) throw levylab::ValidationError("potential file has no rows");
    if (mesh) {
      std::vector<double> q;
      const auto k_lo = static_cast<long long>(std::llround(rows.front().first));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (std::llround(rows[i].first) != k_lo + static_cast<long long>(i)) {
          throw levylab::ValidationError("potential file: lattice indices k must be consecutive integers");
        }
        q.push_back(rows[i].second);
      }
      description["mesh"] = *mesh;
      return levylab::potential_from_q(q, k_lo, *mesh);
    }
    std::vector<double> knots;
    std::vector<double> values;
    for (const auto& [x, v] : rows) {
      knots.push_back(x);
      values.push_back(v);
    }
    return levylab::Potential::grid(std::move(knots), std::move(values));
  }
  description = {{"expression", spec}};
  if (spec == "zero") return levylab::Potential::zero();
  const auto expr = levylab::Expression::parse(spec, 1);
  if (spec.find('x') == std::string::npos) return levylab::Potential::constant(expr(0.0));
  // Expressions are sampled onto a fine grid over the window and interpolated.
  description["window"] = {lo, hi};
  description["spacing"] = spacing;
  const auto count = static_cast<std::size_t>(std::ceil((hi - lo) / spacing));
  if (count > 100000000) throw levylab::ValidationError("potential window too large for the grid spacing");
  std::vector<double> knots;
  std::vector<double> values;
  for (std::size_t i = 0; i <= count; ++i) {
    const double x = std::min(hi, lo + spacing * static_cast<double>(i));
    knots.push_back(x);
    values.push_back(expr(x));
  }
  return levylab::Potential::grid(std::move(knots), std::move(values));
}

levylab::EnvironmentSpec parse_environment(const std::string& spec) {
  std::vector<std::string> parts;
  std::stringstream in(spec);
  std::string item;
  while (std::getline(in, item, ':')) parts.push_back(item);
  try {
    if (parts.size() == 2 && parts[0] == "iid") return levylab::IidScaled{std::stod(parts[1]), {}};
    if (parts.size() == 3 && parts[0] == "bernoulli") {
      return levylab::BernoulliPoisson{std::stod(parts[1]), std::stod(parts[2])};
    }
  } catch (const std::logic_error&) {
  }
  throw levylab::ValidationError("--env must be iid:<sigma> or bernoulli:<q>:<lambda>, got '" + spec + "'");
}

levylab::TestFunction bump_from(const std::string& center, double radius) {
  const levylab::Point c = parse_point(center);
  return levylab::TestFunction::bump(c, levylab::Point::Constant(c.size(), radius));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulators and diagnostics for Levy-type processes and diffusions in a potential"};
  app.require_subcommand(1);
  Run run;

  // simulate-stable
  Common stable_common;
  Sim stable_sim;
  std::string c_expr = "1";
  std::string alpha_expr = "1";
  double stable_n = 1000.0;
  std::string stable_start = "0";
  auto* stable_cmd = app.add_subcommand("simulate-stable", "Explicit scheme for stable-like jump operators");
  stable_common.attach(stable_cmd, true);
  stable_sim.attach(stable_cmd);
  stable_cmd->add_option("--c-expr", c_expr, "Scale c(x) as an expression in x1..xd");
  stable_cmd->add_option("--alpha-expr", alpha_expr, "Index alpha(x) in (0, 2) as an expression");
  stable_cmd->add_option("--n", stable_n, "Scale parameter n (time step 1/n)");
  stable_cmd->add_option("--start", stable_start, "Start point, comma separated (sets the dimension)");

  // simulate-euler
  Common euler_common;
  Sim euler_sim;
  std::string triplet_config;
  std::string euler_chi = "chi1";
  double euler_eps = 0.01;
  std::optional<double> euler_tau;
  std::string small_jumps = "drift";
  std::string euler_start;
  auto* euler_cmd = app.add_subcommand("simulate-euler", "Euler scheme with frozen-coefficient Levy increments");
  euler_common.attach(euler_cmd, true);
  euler_sim.attach(euler_cmd);
  euler_cmd->add_option("--triplet-config", triplet_config, "JSON triplet field")->required();
  euler_cmd->add_option("--chi", euler_chi, "Compensation function")->check(CLI::IsMember({"chi1", "chi2"}));
  euler_cmd->add_option("--eps", euler_eps, "Time step");
  euler_cmd->add_option("--tau", euler_tau, "Small-jump truncation radius");
  euler_cmd->add_option("--small-jumps", small_jumps, "Small-jump treatment")
      ->check(CLI::IsMember({"drift", "gaussian"}));
  euler_cmd->add_option("--start", euler_start, "Start point (default: origin)");

  // simulate-potential
  Common pot_common;
  Sim pot_sim;
  std::string potential_spec = "zero";
  std::optional<double> pot_mesh;
  double pot_eps = 0.01;
  double pot_start = 0.0;
  std::optional<double> pot_window;
  auto* pot_cmd = app.add_subcommand("simulate-potential", "Random-walk scheme for a diffusion in a potential");
  pot_common.attach(pot_cmd, true);
  pot_sim.attach(pot_cmd);
  pot_cmd->add_option("--potential", potential_spec,
                      "'zero', an expression in x, or a CSV file of (knot, value) or, with --mesh, (k, q_k)");
  pot_cmd->add_option("--mesh", pot_mesh, "Lattice mesh for (k, q_k) potential files");
  pot_cmd->add_option("--eps", pot_eps, "Scheme parameter (time step eps^2)");
  pot_cmd->add_option("--start", pot_start, "Start point");
  pot_cmd->add_option("--window", pot_window, "Half-width of the sampled window for expression potentials");

  // simulate-rwre
  Common rwre_common;
  Sim rwre_sim;
  std::string env_spec = "iid:1";
  double rwre_eps = 0.05;
  std::size_t envs = 10;
  double rwre_start = 0.0;
  auto* rwre_cmd = app.add_subcommand("simulate-rwre", "Quenched random walks in random environments");
  rwre_common.attach(rwre_cmd, true);
  rwre_sim.attach(rwre_cmd);
  rwre_cmd->add_option("--env", env_spec, "iid:<sigma> or bernoulli:<q>:<lambda>");
  rwre_cmd->add_option("--eps", rwre_eps, "Lattice mesh (time step eps^2)");
  rwre_cmd->add_option("--envs", envs, "Number of environment draws");
  rwre_cmd->add_option("--start", rwre_start, "Start point (a lattice point)");

  // diagnose-operator
  Common op_common;
  std::string op_config;
  auto* op_cmd = app.add_subcommand("diagnose-operator", "Convergence gaps, hypotheses and maximum-principle checks");
  op_common.attach(op_cmd, false);
  op_cmd->add_option("--config", op_config, "JSON file listing the limit field and the sequence")->required();

  // diagnose-clock
  Common clock_common;
  double clock_eps = 0.01;
  double clock_t = 1.0;
  double clock_threshold = 0.5;
  std::size_t clock_trials = 10000;
  auto* clock_cmd = app.add_subcommand("diagnose-clock", "Monte Carlo check of the Poisson clock deviation bound");
  clock_common.attach(clock_cmd, false);
  clock_cmd->add_option("--eps", clock_eps, "Step of the chain");
  clock_cmd->add_option("--t", clock_t, "Time horizon");
  clock_cmd->add_option("--threshold", clock_threshold, "Deviation threshold");
  clock_cmd->add_option("--trials", clock_trials, "Monte Carlo trials");

  // diagnose-paths
  Common paths_common;
  std::string paths_in;
  std::string paths_compare;
  std::vector<double> paths_times;
  std::string residual_config;
  std::string residual_chi = "chi1";
  std::string bump_center;
  double bump_radius = 1.0;
  std::string box_lo;
  std::string box_hi;
  double allowance = 0.0;
  auto* paths_cmd = app.add_subcommand("diagnose-paths", "Marginals, explosions and martingale residuals of path files");
  paths_common.attach(paths_cmd, false);
  paths_cmd->add_option("--in", paths_in, "Path CSV")->required();
  paths_cmd->add_option("--compare", paths_compare, "Second path CSV for KS and Wasserstein comparisons");
  paths_cmd->add_option("--times", paths_times, "Times to examine (default: last grid time)");
  paths_cmd->add_option("--triplet-config", residual_config, "Triplet field whose generator defines the residual");
  paths_cmd->add_option("--chi", residual_chi, "Compensation function")->check(CLI::IsMember({"chi1", "chi2"}));
  paths_cmd->add_option("--bump-center", bump_center, "Residual test function centre (comma separated)");
  paths_cmd->add_option("--bump-radius", bump_radius, "Residual test function radius");
  paths_cmd->add_option("--box-lo", box_lo, "Lower corner of the open box U");
  paths_cmd->add_option("--box-hi", box_hi, "Upper corner of the open box U");
  paths_cmd->add_option("--allowance", allowance, "Discretization constant C in the C * ds allowance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  const auto started = std::chrono::steady_clock::now();
  std::uint64_t seed = 0;
  try {
    if (stable_cmd->parsed()) {
      run.command = "simulate-stable";
      seed = stable_common.resolved_seed();
      const levylab::Point start = parse_point(stable_start);
      const auto dim = static_cast<std::size_t>(start.size());
      const auto c = levylab::Expression::parse(c_expr, dim);
      const auto alpha = levylab::Expression::parse(alpha_expr, dim);
      run.config = stable_sim.describe();
      run.config.update({{"c", c_expr}, {"alpha", alpha_expr}, {"n", stable_n}, {"start", levylab::to_json(start)}});
      const levylab::StableField field{dim, c, alpha};
      const auto batch = levylab::stable_chain_simulate(field, levylab::StartSpec::at(start), stable_n,
                                                        stable_sim.horizon,
                                                        stable_sim.config(seed, stable_common.threads));
      write_paths(run, stable_common.out, batch);
    } else if (euler_cmd->parsed()) {
      run.command = "simulate-euler";
      seed = euler_common.resolved_seed();
      const std::string text = read_file(triplet_config);
      Json parsed;
      try {
        parsed = Json::parse(text);
      } catch (const Json::exception& e) {
        throw levylab::ValidationError(std::string("triplet config: ") + e.what());
      }
      const auto field = levylab::triplet_field_from_json(parsed);
      const levylab::Point start = euler_start.empty()
                                       ? levylab::Point(levylab::Point::Zero(static_cast<Eigen::Index>(field.dim())))
                                       : parse_point(euler_start);
      levylab::IncrementPlan plan;
      plan.tau = euler_tau;
      plan.mode = small_jumps == "gaussian" ? levylab::SmallJumpMode::GaussianSurrogate
                                            : levylab::SmallJumpMode::DriftCompensate;
      run.config = euler_sim.describe();
      run.config.update({{"triplet", parsed},
                         {"chi", euler_chi},
                         {"eps", euler_eps},
                         {"tau", euler_tau ? Json(*euler_tau) : Json(nullptr)},
                         {"small_jumps", small_jumps},
                         {"start", levylab::to_json(start)}});
      const auto batch = levylab::euler_chain_simulate(field, levylab::compensation_from_name(euler_chi),
                                                       levylab::StartSpec::at(start), euler_eps, euler_sim.horizon,
                                                       plan, euler_sim.config(seed, euler_common.threads));
      write_paths(run, euler_common.out, batch);
    } else if (pot_cmd->parsed()) {
      run.command = "simulate-potential";
      seed = pot_common.resolved_seed();
      if (!(pot_eps > 0.0)) throw levylab::ValidationError("--eps must be positive");
      const double half = pot_window.value_or(10.0 * std::sqrt(pot_sim.horizon) + 1.0);
      Json description;
      const auto V = load_potential(potential_spec, pot_mesh, pot_start - half, pot_start + half, pot_eps / 8.0,
                                    description);
      run.config = pot_sim.describe();
      run.config.update({{"potential", description}, {"eps", pot_eps}, {"start", pot_start}});
      const auto batch = levylab::potential_chain_simulate(V, levylab::StartSpec::at(pot_start), pot_eps,
                                                           pot_sim.horizon, pot_sim.config(seed, pot_common.threads));
      write_paths(run, pot_common.out, batch);
    } else if (rwre_cmd->parsed()) {
      run.command = "simulate-rwre";
      seed = rwre_common.resolved_seed();
      const auto spec = parse_environment(env_spec);
      run.config = rwre_sim.describe();
      run.config.update({{"env", env_spec}, {"eps", rwre_eps}, {"envs", envs}, {"start", rwre_start}});
      auto config = rwre_sim.config(seed, rwre_common.threads);
      const auto runs = levylab::rwre_simulate(spec, rwre_eps, rwre_start, rwre_sim.horizon, envs, config.paths,
                                               config);
      const std::filesystem::path dir(rwre_common.out);
      Json per_env = Json::array();
      for (std::size_t e = 0; e < runs.size(); ++e) {
        const auto& r = runs[e];
        const auto file = (dir / ("env_" + std::to_string(e) + ".csv")).string();
        write_paths(run, file, r.paths);
        const auto final_marginal = r.paths.marginal(r.paths.grid->size() - 1);
        const auto mean = levylab::mean_with_error(final_marginal);
        per_env.push_back({{"file", "env_" + std::to_string(e) + ".csv"},
                           {"window", {r.environment.k_lo(), r.environment.k_hi()}},
                           {"alive_at_T", final_marginal.size()},
                           {"mean_at_T", mean.mean},
                           {"variance_at_T", levylab::sample_variance(final_marginal)}});
      }
      const auto summary = levylab::quenched_annealed_summary(runs, rwre_sim.horizon);
      const Json report = {{"environments", per_env},
                           {"quenched_mean", summary.quenched_mean},
                           {"quenched_variance", summary.quenched_variance},
                           {"annealed_mean", summary.annealed_mean},
                           {"annealed_variance", summary.annealed_variance}};
      write_report(run, (dir / "summary.json").string(), report);
    } else if (op_cmd->parsed()) {
      run.command = "diagnose-operator";
      seed = op_common.resolved_seed();
      Json cfg;
      try {
        cfg = Json::parse(read_file(op_config));
      } catch (const Json::exception& e) {
        throw levylab::ValidationError(std::string("operator config: ") + e.what());
      }
      run.config = cfg;
      try {
        const auto limit = levylab::triplet_field_from_json(cfg.at("limit"));
        std::vector<levylab::TripletField> fields;
        for (const auto& f : cfg.value("fields", Json::array())) fields.push_back(levylab::triplet_field_from_json(f));
        const auto chi = levylab::compensation_from_name(cfg.value("chi", std::string("chi1")));
        const auto K = levylab::box_from_json(cfg.at("box"), limit.dim());
        levylab::GapOptions options;
        options.per_axis = cfg.value("grid_per_axis", std::size_t{16});
        options.threads = op_common.threads;
        const auto probes = levylab::default_jump_probes(K, cfg.value("probe_margin", 0.25));
        Json gaps = Json::array();
        for (const auto& r : levylab::convergence_gaps(fields, limit, chi, K, probes, options)) {
          gaps.push_back(levylab::to_json(r));
        }
        const auto hypotheses = levylab::validate_hypotheses(
            limit, chi, K, cfg.value("hypothesis_samples", std::size_t{2000}), seed);
        const auto pmp = levylab::pmp_spot_check(limit, chi, levylab::default_test_functions(0.5 * (K.lo + K.hi)));
        Json probe_names = Json::array();
        for (const auto& p : probes) probe_names.push_back(p.name());
        write_report(run, op_common.out,
                     {{"convergence", gaps},
                      {"probes", probe_names},
                      {"hypotheses", levylab::to_json(hypotheses)},
                      {"pmp", levylab::to_json(pmp)}});
      } catch (const Json::exception& e) {
        throw levylab::ValidationError(std::string("operator config: ") + e.what());
      }
    } else if (clock_cmd->parsed()) {
      run.command = "diagnose-clock";
      seed = clock_common.resolved_seed();
      run.config = {{"eps", clock_eps}, {"t", clock_t}, {"threshold", clock_threshold}, {"trials", clock_trials}};
      const auto report =
          levylab::doob_bound_check(clock_eps, clock_t, clock_threshold, clock_trials, seed, clock_common.threads);
      write_report(run, clock_common.out, levylab::to_json(report));
    } else if (paths_cmd->parsed()) {
      run.command = "diagnose-paths";
      seed = paths_common.resolved_seed();
      const std::string text = read_file(paths_in);
      std::istringstream stream(text);
      const auto batch = levylab::read_paths_csv(stream);
      run.config = {{"in", paths_in}, {"content_hash", hex(fnv1a(text))}};
      std::vector<double> times = paths_times;
      if (times.empty()) times.push_back(batch.grid->back());
      Json report = {{"paths", batch.size()}, {"dim", batch.dim}, {"explosions", levylab::to_json(levylab::explosion_stats(batch))}};
      std::optional<levylab::PathBatch> other;
      if (!paths_compare.empty()) {
        const std::string other_text = read_file(paths_compare);
        std::istringstream other_stream(other_text);
        other = levylab::read_paths_csv(other_stream);
        if (other->dim != batch.dim) throw levylab::ValidationError("compared path files differ in dimension");
        run.config["compare"] = paths_compare;
        run.config["compare_hash"] = hex(fnv1a(other_text));
      }
      Json marginals = Json::array();
      for (double t : times) {
        const std::size_t i = batch.time_index(t);
        for (std::size_t coord = 0; coord < batch.dim; ++coord) {
          const auto m = batch.marginal(i, coord);
          const auto est = levylab::mean_with_error(m);
          Json entry = {{"t", t},
                        {"coordinate", coord + 1},
                        {"alive", m.size()},
                        {"mean", est.mean},
                        {"standard_error", est.standard_error},
                        {"variance", levylab::sample_variance(m)}};
          if (other) {
            const auto o = other->marginal(other->time_index(t), coord);
            if (!m.empty() && !o.empty()) {
              entry["ks"] = levylab::to_json(levylab::ks_distance(m, o));
              entry["ks_critical_1pct"] = levylab::ks_critical_value(m.size(), o.size());
              entry["wasserstein1"] = levylab::wasserstein1(m, o);
            }
          }
          marginals.push_back(std::move(entry));
        }
      }
      report["marginals"] = std::move(marginals);
      if (!residual_config.empty()) {
        if (bump_center.empty()) throw levylab::ValidationError("--bump-center is required for residuals");
        const Json parsed = Json::parse(read_file(residual_config));
        const auto field = levylab::triplet_field_from_json(parsed);
        const auto chi = levylab::compensation_from_name(residual_chi);
        const auto f = bump_from(bump_center, bump_radius);
        if (f.dim() != batch.dim || field.dim() != batch.dim) {
          throw levylab::ValidationError("residual inputs do not match the path dimension");
        }
        const levylab::Box U{box_lo.empty() ? levylab::Point(levylab::Point::Constant(f.support().lo.size(), -levylab::kInfinity)) : parse_point(box_lo),
                             box_hi.empty() ? levylab::Point(levylab::Point::Constant(f.support().lo.size(), levylab::kInfinity)) : parse_point(box_hi)};
        auto g = [&](const levylab::Point& x) { return levylab::apply_operator(field(x), chi, f, x).value; };
        run.config["residual"] = {{"triplet", parsed},
                                  {"chi", residual_chi},
                                  {"bump_center", bump_center},
                                  {"bump_radius", bump_radius},
                                  {"box_lo", box_lo},
                                  {"box_hi", box_hi},
                                  {"allowance", allowance}};
        report["residual"] = levylab::to_json(levylab::martingale_residual(batch, f, g, U, times, allowance));
      }
      write_report(run, paths_common.out, std::move(report));
    }
  } catch (const levylab::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const Json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const levylab::NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << " (estimate " << e.estimate() << ", error estimate "
              << e.error_estimate() << ")\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return kExitNumeric;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  emit_manifest(run, seed, seconds);
  return 0;
}
