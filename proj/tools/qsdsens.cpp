// Command-line front end: simulate | qsd | fte | contraction | bound | table.
// Every run can emit a JSON summary with the full configuration echo so an
// artifact can be reproduced from its own metadata.

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>

#include "qsd/coupling.hpp"
#include "qsd/errors.hpp"
#include "qsd/network.hpp"
#include "qsd/qsd_estimate.hpp"
#include "qsd/sensitivity.hpp"
#include "qsd/simulate.hpp"

namespace {

using nlohmann::json;

constexpr int kExitUsage = 2;
constexpr int kExitHorizon = 3;
constexpr int kExitTailFit = 4;
constexpr int kExitInternal = 5;

std::uint64_t fnv1a64(const std::string& data, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (const unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct CommonOptions {
  std::string preset_name = "sir";
  std::string network_path;
  double volume = 1000.0;
  double step = 1e-3;
  double horizon = 0.5;
  std::uint64_t seed = 1;
  std::string out_path;
  std::string json_path;
};

struct RunContext {
  CommonOptions common;
  json summary;
  std::vector<std::string> outputs;
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();
};

qsd::ReactionNetwork resolve_network(const CommonOptions& opt, std::string* config_text) {
  if (!opt.network_path.empty()) {
    std::ifstream in(opt.network_path);
    if (!in) throw qsd::ConfigError("cannot open network file '" + opt.network_path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    if (config_text) *config_text = ss.str();
    return qsd::load_network(ss.str());
  }
  qsd::ReactionNetwork net = qsd::preset(opt.preset_name);
  if (config_text) *config_text = qsd::serialize_network(net);
  return net;
}

qsd::StateVector resolve_initial(const CommonOptions& opt, const qsd::ReactionNetwork& net) {
  if (!opt.network_path.empty()) {
    // user networks start at the unit point; presets start on the attractor
    return qsd::StateVector::Ones(net.dimension());
  }
  return qsd::preset_initial_state(opt.preset_name);
}

std::ofstream open_out(const std::string& path, RunContext& ctx) {
  std::ofstream out(path);
  if (!out) throw qsd::ConfigError("cannot open output file '" + path + "'");
  ctx.outputs.push_back(path);
  return out;
}

void finish(RunContext& ctx, int exit_code) {
  if (!ctx.common.json_path.empty()) {
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - ctx.started).count();
    ctx.summary["wall_clock_seconds"] = wall;
    ctx.summary["seed"] = ctx.common.seed;
    ctx.summary["outputs"] = ctx.outputs;
    ctx.summary["exit_code"] = exit_code;
    std::ofstream out(ctx.common.json_path);
    out << ctx.summary.dump(2) << "\n";
  }
}

void echo_common(RunContext& ctx, const std::string& subcommand, const std::string& net_text) {
  json cfg;
  cfg["preset"] = ctx.common.preset_name;
  cfg["network_file"] = ctx.common.network_path;
  cfg["volume"] = ctx.common.volume;
  cfg["step"] = ctx.common.step;
  cfg["horizon"] = ctx.common.horizon;
  ctx.summary["subcommand"] = subcommand;
  ctx.summary["config"] = cfg;
  ctx.summary["content_hash"] = hex64(fnv1a64(net_text, fnv1a64(subcommand)));
}

void add_common_flags(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("--preset", opt.preset_name, "built-in network: sir, oregonator, lv4");
  cmd->add_option("--network", opt.network_path, "network config file (overrides --preset)");
  cmd->add_option("--volume", opt.volume, "system volume V");
  cmd->add_option("--step", opt.step, "time step h");
  cmd->add_option("--horizon", opt.horizon, "segment horizon T");
  cmd->add_option("--seed", opt.seed, "master seed");
  cmd->add_option("--out", opt.out_path, "primary CSV output path (default: stdout)");
  cmd->add_option("--json-summary", opt.json_path, "write a JSON run summary here");
}

qsd::SimConfig make_sim_config(const CommonOptions& opt) {
  qsd::SimConfig cfg;
  cfg.volume = opt.volume;
  cfg.step = opt.step;
  cfg.t_steps = std::max<std::int64_t>(1, std::llround(opt.horizon / opt.step));
  cfg.seed = opt.seed;
  cfg.validate();
  return cfg;
}

void write_csv(std::ostream& out, const std::string& text) { out << text; }

std::string histogram_csv(const qsd::HistogramMeasure& h) {
  std::ostringstream out;
  const int d = h.mesh.dimension();
  for (int i = 0; i < d; ++i) out << "center_" << i << ",";
  out << "probability\n";
  for (std::int64_t flat = 0; flat < h.probabilities.size(); ++flat) {
    if (h.probabilities[flat] == 0.0) continue;
    const qsd::StateVector c = h.mesh.bin_center(flat);
    for (int i = 0; i < d; ++i) out << fmt(c[i]) << ",";
    out << fmt(h.probabilities[flat]) << "\n";
  }
  return out.str();
}

int cmd_simulate(RunContext& ctx, const std::string& process, std::int64_t steps, int thinning) {
  std::string net_text;
  const qsd::ReactionNetwork net = resolve_network(ctx.common, &net_text);
  echo_common(ctx, "simulate", net_text);
  ctx.summary["config"]["process"] = process;
  ctx.summary["config"]["steps"] = steps;

  qsd::SimConfig cfg = make_sim_config(ctx.common);
  cfg.reservoir_thinning = thinning;
  const qsd::StateVector x0 = resolve_initial(ctx.common, net);
  const qsd::ProcessKind kind =
      process == "poisson" ? qsd::ProcessKind::poisson : qsd::ProcessKind::diffusion;

  std::ostringstream csv;
  csv << "step,time";
  for (const auto& s : net.species()) csv << "," << s;
  csv << ",regenerated\n";
  qsd::OccupationReservoir reservoir(cfg.reservoir_thinning);
  qsd::RngStream rng(cfg.seed);
  const auto sink = [&](std::int64_t n, double t, const qsd::StateVector& x, bool regen) {
    csv << n << "," << fmt(t);
    for (int i = 0; i < x.size(); ++i) csv << "," << fmt(x[i]);
    csv << "," << (regen ? 1 : 0) << "\n";
  };
  const qsd::RunResult result = qsd::simulate_with_regeneration(
      net, cfg, kind, steps, x0, reservoir, nullptr, rng, nullptr,
      qsd::NoiseForm::rectangular, sink);
  ctx.summary["regenerations"] = result.regen_count;

  if (ctx.common.out_path.empty()) {
    write_csv(std::cout, csv.str());
  } else {
    auto out = open_out(ctx.common.out_path, ctx);
    write_csv(out, csv.str());
  }
  return 0;
}

int cmd_qsd(RunContext& ctx, std::int64_t steps, std::int64_t bins, int thinning,
            std::vector<double> lo, std::vector<double> hi, std::int64_t w1_samples) {
  std::string net_text;
  const qsd::ReactionNetwork net = resolve_network(ctx.common, &net_text);
  echo_common(ctx, "qsd", net_text);
  ctx.summary["config"]["steps"] = steps;
  ctx.summary["config"]["bins"] = bins;

  qsd::SimConfig cfg = make_sim_config(ctx.common);
  cfg.reservoir_thinning = thinning;
  const qsd::StateVector x0 = resolve_initial(ctx.common, net);
  const int d = net.dimension();

  qsd::StateVector mesh_lo = qsd::StateVector::Zero(d);
  qsd::StateVector mesh_hi = qsd::StateVector::Zero(d);
  if (!lo.empty() || !hi.empty()) {
    if (static_cast<int>(lo.size()) != d || static_cast<int>(hi.size()) != d)
      throw qsd::ConfigError("--lo/--hi need one value per species");
    for (int i = 0; i < d; ++i) {
      mesh_lo[i] = lo[static_cast<std::size_t>(i)];
      mesh_hi[i] = hi[static_cast<std::size_t>(i)];
    }
  } else {
    // default window: [0, 3x] around the attractor point
    for (int i = 0; i < d; ++i) {
      mesh_lo[i] = 0.0;
      mesh_hi[i] = 3.0 * std::max(x0[i], 1e-6);
    }
  }
  const qsd::Mesh mesh =
      qsd::Mesh::uniform(mesh_lo, mesh_hi, std::vector<std::int64_t>(static_cast<std::size_t>(d), bins));

  qsd::HistogramAccumulator acc_x(mesh), acc_y(mesh);
  qsd::OccupationReservoir res_x(cfg.reservoir_thinning), res_y(cfg.reservoir_thinning);
  qsd::RngStream rng_x(cfg.seed, 0), rng_y(cfg.seed, 1);
  const std::int64_t burn = steps / 10;  // discarded transient
  const auto sink_for = [burn](qsd::HistogramAccumulator& acc) {
    return [&acc, burn](std::int64_t n, double, const qsd::StateVector& x, bool) {
      if (n >= burn) acc.add(x);
    };
  };
  qsd::RunResult rx = qsd::simulate_with_regeneration(net, cfg, qsd::ProcessKind::poisson, steps,
                                                      x0, res_x, nullptr, rng_x, nullptr,
                                                      qsd::NoiseForm::rectangular, sink_for(acc_x));
  qsd::RunResult ry = qsd::simulate_with_regeneration(net, cfg, qsd::ProcessKind::diffusion, steps,
                                                      x0, res_y, nullptr, rng_y, nullptr,
                                                      qsd::NoiseForm::rectangular, sink_for(acc_y));

  const qsd::HistogramMeasure hx = acc_x.to_measure();
  const qsd::HistogramMeasure hy = acc_y.to_measure();
  const double tv = qsd::tv_distance(hx, hy);
  ctx.summary["tv_distance"] = tv;
  ctx.summary["clip_fraction_poisson"] = hx.clip_fraction;
  ctx.summary["clip_fraction_diffusion"] = hy.clip_fraction;
  ctx.summary["regenerations_poisson"] = rx.regen_count;
  ctx.summary["regenerations_diffusion"] = ry.regen_count;

  if (w1_samples > 0) {
    std::vector<qsd::StateVector> sa, sb;
    qsd::RngStream wrng(cfg.seed, 2);
    for (std::int64_t i = 0; i < w1_samples; ++i) {
      sa.push_back(res_x.sample(wrng.uniform()));
      sb.push_back(res_y.sample(wrng.uniform()));
    }
    ctx.summary["empirical_w1"] = qsd::empirical_w1(sa, sb);
  }

  const std::string base = ctx.common.out_path.empty() ? "qsd" : ctx.common.out_path;
  {
    auto out = open_out(base + ".poisson.csv", ctx);
    write_csv(out, histogram_csv(hx));
  }
  {
    auto out = open_out(base + ".diffusion.csv", ctx);
    write_csv(out, histogram_csv(hy));
  }
  std::cout << "tv_distance," << fmt(tv) << "\n";
  return 0;
}

int cmd_fte(RunContext& ctx, std::int64_t segments, double delta, bool reuse) {
  std::string net_text;
  const qsd::ReactionNetwork net = resolve_network(ctx.common, &net_text);
  echo_common(ctx, "fte", net_text);
  ctx.summary["config"]["segments"] = segments;

  qsd::SimConfig cfg = make_sim_config(ctx.common);
  const qsd::StateVector x0 = resolve_initial(ctx.common, net);
  qsd::FteOptions opt;
  opt.delta = delta > 0.0 ? delta
              : ctx.common.network_path.empty() ? qsd::preset_skeleton_delta(ctx.common.preset_name)
                                                : 0.01;
  opt.reuse_skeletons = reuse;
  ctx.summary["config"]["skeleton_delta"] = opt.delta;

  const qsd::FiniteTimeErrorEstimate est = qsd::finite_time_error(net, cfg, segments, x0, opt);
  ctx.summary["finite_time_error"] = est.mean;
  ctx.summary["std_error"] = est.std_error;

  std::ostringstream csv;
  csv << "volume,horizon,segments,finite_time_error,std_error\n";
  csv << fmt(est.volume) << "," << fmt(est.t_horizon) << "," << est.segments << ","
      << fmt(est.mean) << "," << fmt(est.std_error) << "\n";
  if (ctx.common.out_path.empty()) {
    write_csv(std::cout, csv.str());
  } else {
    auto out = open_out(ctx.common.out_path, ctx);
    write_csv(out, csv.str());
  }
  return 0;
}

int cmd_contraction(RunContext& ctx, std::int64_t runs, double threshold,
                    std::int64_t max_steps, std::int64_t burn_in, bool compat_ac) {
  std::string net_text;
  const qsd::ReactionNetwork net = resolve_network(ctx.common, &net_text);
  echo_common(ctx, "contraction", net_text);
  ctx.summary["config"]["runs"] = runs;
  ctx.summary["config"]["compat_ac"] = compat_ac;

  qsd::SimConfig cfg = make_sim_config(ctx.common);
  const qsd::StateVector x0 = resolve_initial(ctx.common, net);
  qsd::TailFitOptions tail;
  tail.paper_compat_intervals = compat_ac;
  if (max_steps <= 0) max_steps = 40 * cfg.t_steps;
  const qsd::ContractionEstimate est = qsd::estimate_contraction(
      net, cfg, runs, threshold, max_steps, burn_in, x0, ctx.common.seed, tail);

  ctx.summary["distance_threshold"] = est.distance_threshold;
  ctx.summary["gamma"] = est.fit.gamma;
  ctx.summary["tail_start_index"] = est.fit.tail_start;
  ctx.summary["accepted"] = est.fit.accepted;
  ctx.summary["diagnostic"] = est.fit.diagnostic;
  std::int64_t coupled = 0, extinct = 0, censored = 0;
  for (const auto& o : est.outcomes) {
    coupled += o.status == qsd::CouplingStatus::coupled;
    extinct += o.status == qsd::CouplingStatus::extinct;
    censored += o.status == qsd::CouplingStatus::censored;
  }
  ctx.summary["coupled"] = coupled;
  ctx.summary["extinct"] = extinct;
  ctx.summary["censored"] = censored;

  std::ostringstream csv;
  csv << "run,status,tau_steps,tau_time\n";
  for (std::size_t m = 0; m < est.outcomes.size(); ++m) {
    const auto& o = est.outcomes[m];
    const char* status = o.status == qsd::CouplingStatus::coupled    ? "coupled"
                         : o.status == qsd::CouplingStatus::extinct ? "extinct"
                                                                    : "censored";
    csv << m << "," << status << ",";
    if (o.status == qsd::CouplingStatus::coupled)
      csv << o.tau_steps << "," << fmt(static_cast<double>(o.tau_steps) * cfg.step);
    else
      csv << ",";
    csv << "\n";
  }
  if (ctx.common.out_path.empty()) {
    write_csv(std::cout, csv.str());
  } else {
    auto out = open_out(ctx.common.out_path, ctx);
    write_csv(out, csv.str());
    std::ostringstream surv;
    surv << "t,survivors,p,p_lower,p_upper\n";
    for (const auto& pt : est.curve.points)
      surv << fmt(pt.t) << "," << pt.n_survivors << "," << fmt(pt.p) << "," << fmt(pt.p_lower)
           << "," << fmt(pt.p_upper) << "\n";
    auto sout = open_out(ctx.common.out_path + ".survival.csv", ctx);
    write_csv(sout, surv.str());
  }
  std::cout << "gamma," << fmt(est.fit.gamma) << "\n";
  return est.fit.accepted ? 0 : kExitTailFit;
}

qsd::TableRowConfig row_config(const CommonOptions& common, std::int64_t segments,
                               std::int64_t runs, double threshold, std::int64_t max_steps,
                               std::int64_t burn_in, double delta, bool compat_ac) {
  qsd::TableRowConfig rc;
  rc.preset_name = common.preset_name;
  rc.volume = common.volume;
  rc.step = common.step;
  rc.t_horizon = common.horizon;
  rc.fte_segments = segments;
  rc.coupling_runs = runs;
  rc.coupling_max_steps = max_steps;
  rc.burn_in_steps = burn_in;
  rc.distance_threshold = threshold;
  rc.skeleton_delta = delta;
  rc.seed = common.seed;
  rc.tail_options.paper_compat_intervals = compat_ac;
  return rc;
}

json report_json(const qsd::BoundReport& r) {
  json j;
  j["preset"] = r.preset;
  j["volume"] = r.volume;
  j["step"] = r.step;
  j["horizon"] = r.t_horizon;
  j["finite_time_error"] = r.fte.mean;
  j["fte_std_error"] = r.fte.std_error;
  j["gamma"] = r.gamma;
  j["alpha"] = r.alpha;
  j["bound"] = r.bound;
  j["footnote"] = r.footnote;
  return j;
}

int cmd_bound(RunContext& ctx, std::int64_t segments, std::int64_t runs, double threshold,
              std::int64_t max_steps, std::int64_t burn_in, double delta, bool compat_ac) {
  if (!ctx.common.network_path.empty())
    throw qsd::ConfigError("bound/table run on presets; use fte/contraction for custom networks");
  std::string net_text;
  resolve_network(ctx.common, &net_text);
  echo_common(ctx, "bound", net_text);
  const qsd::BoundReport report = qsd::table_row(
      row_config(ctx.common, segments, runs, threshold, max_steps, burn_in, delta, compat_ac));
  ctx.summary["report"] = report_json(report);

  std::ostringstream csv;
  csv << "volume,finite_time_error,gamma,bound\n";
  csv << fmt(report.volume) << "," << fmt(report.fte.mean) << "," << fmt(report.gamma) << ","
      << fmt(report.bound) << "\n";
  if (ctx.common.out_path.empty()) {
    write_csv(std::cout, csv.str());
  } else {
    auto out = open_out(ctx.common.out_path, ctx);
    write_csv(out, csv.str());
  }
  return 0;
}

int cmd_table(RunContext& ctx, const std::vector<double>& volumes, std::int64_t segments,
              std::int64_t runs, double threshold, std::int64_t max_steps, std::int64_t burn_in,
              double delta, bool compat_ac) {
  if (!ctx.common.network_path.empty())
    throw qsd::ConfigError("bound/table run on presets; use fte/contraction for custom networks");
  std::string net_text;
  resolve_network(ctx.common, &net_text);
  echo_common(ctx, "table", net_text);
  ctx.summary["config"]["volumes"] = volumes;

  std::ostringstream csv;
  csv << "volume,finite_time_error,gamma,bound\n";
  json rows = json::array();
  for (const double v : volumes) {
    CommonOptions per = ctx.common;
    per.volume = v;
    const qsd::BoundReport report = qsd::table_row(
        row_config(per, segments, runs, threshold, max_steps, burn_in, delta, compat_ac));
    rows.push_back(report_json(report));
    csv << fmt(report.volume) << "," << fmt(report.fte.mean) << "," << fmt(report.gamma) << ","
        << fmt(report.bound) << "\n";
  }
  ctx.summary["rows"] = rows;
  if (ctx.common.out_path.empty()) {
    write_csv(std::cout, csv.str());
  } else {
    auto out = open_out(ctx.common.out_path, ctx);
    write_csv(out, csv.str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coupling-based sensitivity of quasi-stationary distributions "
               "of mass-action networks against their diffusion approximations"};
  app.require_subcommand(1);

  CommonOptions common;

  auto* sim = app.add_subcommand("simulate", "dump one regenerating trajectory as CSV");
  add_common_flags(sim, common);
  std::string process = "poisson";
  std::int64_t sim_steps = 10000;
  int thinning = 1;
  sim->add_option("--process", process, "poisson | diffusion")
      ->check(CLI::IsMember({"poisson", "diffusion"}));
  sim->add_option("--steps", sim_steps, "number of steps");
  sim->add_option("--thin", thinning, "reservoir thinning factor");

  auto* qsd_cmd = app.add_subcommand("qsd", "occupation-measure histograms and their TV distance");
  add_common_flags(qsd_cmd, common);
  std::int64_t qsd_steps = 1000000;
  std::int64_t bins = 60;
  std::int64_t w1_samples = 0;
  std::vector<double> lo, hi;
  qsd_cmd->add_option("--steps", qsd_steps, "steps per process");
  qsd_cmd->add_option("--bins", bins, "bins per dimension");
  qsd_cmd->add_option("--thin", thinning, "reservoir thinning factor");
  qsd_cmd->add_option("--lo", lo, "mesh lower corner (one value per species)");
  qsd_cmd->add_option("--hi", hi, "mesh upper corner (one value per species)");
  qsd_cmd->add_option("--w1-samples", w1_samples, "also report empirical W1 on this many samples");

  auto* fte_cmd = app.add_subcommand("fte", "finite-time error between the paired processes");
  add_common_flags(fte_cmd, common);
  std::int64_t segments = 2000;
  double delta = 0.0;
  bool reuse = false;
  fte_cmd->add_option("--segments", segments, "number of chained segments M");
  fte_cmd->add_option("--delta", delta, "skeleton cell width (default: preset value)");
  fte_cmd->add_flag("--reuse-skeletons", reuse, "reuse one skeleton set across segments");

  auto* con_cmd = app.add_subcommand("contraction", "coupling times and the tail rate gamma");
  add_common_flags(con_cmd, common);
  std::int64_t runs = 5000;
  double threshold = 0.0;
  std::int64_t max_steps = 0;
  std::int64_t burn_in = 20000;
  bool compat_ac = false;
  con_cmd->add_option("--runs", runs, "number of coupling runs M");
  con_cmd->add_option("--threshold", threshold, "reflection/maximal switch distance");
  con_cmd->add_option("--max-steps", max_steps, "censoring horizon in steps");
  con_cmd->add_option("--burn-in", burn_in, "burn-in steps for the start pool");
  con_cmd->add_flag("--compat-ac", compat_ac, "literal n_i + z^2 Agresti-Coull trials");

  auto* bound_cmd = app.add_subcommand("bound", "assembled bound for one volume");
  add_common_flags(bound_cmd, common);
  bound_cmd->add_option("--segments", segments, "finite-time-error segments M");
  bound_cmd->add_option("--runs", runs, "coupling runs M");
  bound_cmd->add_option("--threshold", threshold, "reflection/maximal switch distance");
  bound_cmd->add_option("--max-steps", max_steps, "censoring horizon in steps");
  bound_cmd->add_option("--burn-in", burn_in, "burn-in steps for the start pool");
  bound_cmd->add_option("--delta", delta, "skeleton cell width (default: preset value)");
  bound_cmd->add_flag("--compat-ac", compat_ac, "literal n_i + z^2 Agresti-Coull trials");

  auto* table_cmd = app.add_subcommand("table", "bound rows for several volumes");
  add_common_flags(table_cmd, common);
  std::vector<double> volumes{1000.0, 100.0};
  table_cmd->add_option("--volumes", volumes, "volumes, one row each")->delimiter(',');
  table_cmd->add_option("--segments", segments, "finite-time-error segments M");
  table_cmd->add_option("--runs", runs, "coupling runs M");
  table_cmd->add_option("--threshold", threshold, "reflection/maximal switch distance");
  table_cmd->add_option("--max-steps", max_steps, "censoring horizon in steps");
  table_cmd->add_option("--burn-in", burn_in, "burn-in steps for the start pool");
  table_cmd->add_option("--delta", delta, "skeleton cell width (default: preset value)");
  table_cmd->add_flag("--compat-ac", compat_ac, "literal n_i + z^2 Agresti-Coull trials");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  RunContext ctx;
  ctx.common = common;
  int exit_code = 0;
  try {
    if (sim->parsed()) {
      exit_code = cmd_simulate(ctx, process, sim_steps, thinning);
    } else if (qsd_cmd->parsed()) {
      exit_code = cmd_qsd(ctx, qsd_steps, bins, thinning, lo, hi, w1_samples);
    } else if (fte_cmd->parsed()) {
      exit_code = cmd_fte(ctx, segments, delta, reuse);
    } else if (con_cmd->parsed()) {
      exit_code = cmd_contraction(ctx, runs, threshold, max_steps, burn_in, compat_ac);
    } else if (bound_cmd->parsed()) {
      exit_code = cmd_bound(ctx, segments, runs, threshold, max_steps, burn_in, delta, compat_ac);
    } else if (table_cmd->parsed()) {
      exit_code = cmd_table(ctx, volumes, segments, runs, threshold, max_steps, burn_in, delta,
                            compat_ac);
    }
  } catch (const qsd::HorizonExceeded& e) {
    ctx.summary["error"] = {{"class", "horizon_exceeded"}, {"message", e.what()}};
    std::cerr << "error (horizon): " << e.what() << "\n";
    exit_code = kExitHorizon;
  } catch (const qsd::ParseError& e) {
    ctx.summary["error"] = {{"class", "parse_error"}, {"message", e.what()}};
    std::cerr << "error (parse): " << e.what() << "\n";
    exit_code = kExitUsage;
  } catch (const qsd::ConfigError& e) {
    ctx.summary["error"] = {{"class", "config_error"}, {"message", e.what()}};
    std::cerr << "error (config): " << e.what() << "\n";
    exit_code = kExitUsage;
  } catch (const std::exception& e) {
    ctx.summary["error"] = {{"class", "internal_error"}, {"message", e.what()}};
    std::cerr << "error: " << e.what() << "\n";
    exit_code = kExitInternal;
  }
  finish(ctx, exit_code);
  return exit_code;
}
