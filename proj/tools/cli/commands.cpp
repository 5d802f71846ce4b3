#include "cli/commands.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>

#include "smcmix/smc.hpp"

namespace smcmix::cli {

namespace {

Json nullable(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

// JSON has no inf/nan; those become null.
Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

std::filesystem::path prepare_dir(const CommonOptions& opts) {
  const auto dir = opts.out_dir.value_or("out");
  std::filesystem::create_directories(dir);
  return dir;
}

ExperimentConfig load_with_overrides(const std::filesystem::path& path, const CommonOptions& opts) {
  ExperimentConfig cfg = load_config(path);
  if (opts.seed) cfg.master_seed = *opts.seed;
  return cfg;
}

void report_config_error(const ConfigError& e, std::ostream& err) {
  err << "config error:\n";
  for (const auto& d : e.diagnostics()) err << "  " << d << "\n";
}

Json prescription_json(const Prescription& p) {
  Json branches = Json::array();
  for (const auto& b : p.n_branches) branches.push_back({{"label", b.label}, {"value", finite_or_null(b.value)}});
  return {{"source", p.source},
          {"n_branches", branches},
          {"n_particles", p.n_particles},
          {"t_per_level", p.t_per_level}};
}

std::string kernel_label(const Ladder& ladder) { return to_string(ladder.level(ladder.size() - 1).kernel.kind); }

template <typename Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    report_config_error(e, err);
    return kConfigError;
  } catch (const DegenerateWeights& e) {
    err << "runtime degeneracy: " << e.what() << "\n";
    return kDegenerate;
  } catch (const std::invalid_argument& e) {
    err << "config error:\n  " << e.what() << "\n";
    return kConfigError;
  } catch (const std::domain_error& e) {
    err << "config error:\n  " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "runtime degeneracy: " << e.what() << "\n";
    return kDegenerate;
  }
}

}  // namespace

Json bound_report_json(const BoundReport& rep, double feasibility_cap) {
  const AssumptionParams& p = rep.params;
  Json deltas = Json::array();
  for (const auto& d : rep.delta_table) deltas.push_back({{"p", d.p}, {"value", finite_or_null(d.value)}});
  Json qs = Json::array();
  for (const auto& q : rep.q_samples) qs.push_back({{"t", q.t}, {"q", finite_or_null(q.q)}});
  return {
      {"schema_version", 1},
      {"command", "bounds"},
      {"guarantee", to_string(rep.guarantee)},
      {"params",
       {{"n", p.n},
        {"M", p.M},
        {"w_star", p.w_star},
        {"gamma", p.gamma},
        {"c_star_per_level", p.c_star_per_level},
        {"f_sup_bound", p.f_sup_bound},
        {"f_lp_norm", nullable(p.f_lp_norm)},
        {"epsilon", p.epsilon},
        {"delta", p.delta},
        {"p", p.p}}},
      {"alpha", rep.alpha},
      {"beta", rep.beta},
      {"theta", finite_or_null(rep.theta)},
      {"c_hat", finite_or_null(rep.c_hat)},
      {"v_bar", finite_or_null(rep.v_bar)},
      {"lambda_per_level", rep.lambda_per_level},
      {"delta_table", deltas},
      {"q_samples", qs},
      {"main", prescription_json(rep.main)},
      {"complete", prescription_json(rep.complete)},
      {"delta8_simplified", finite_or_null(rep.delta8_simplified)},
      {"delta8_simplified_bound", finite_or_null(rep.delta8_simplified_bound)},
      {"feasibility_cap", feasibility_cap},
      {"exceeds_feasibility_cap", static_cast<double>(rep.prescribed_n()) > feasibility_cap},
  };
}

Json verify_report_json(const oracle::VerifyReport& report) {
  Json checks = Json::array();
  for (const auto& c : report.checks) {
    Json w = nullptr;
    if (c.witness) w = std::vector<double>(c.witness->data(), c.witness->data() + c.witness->size());
    checks.push_back({{"name", c.name},
                      {"passed", c.passed},
                      {"min_slack", finite_or_null(c.min_slack)},
                      {"trials", c.trials},
                      {"witness", w},
                      {"witness_time", nullable(c.witness_time)},
                      {"detail", c.detail}});
  }
  return {{"schema_version", 1},
          {"command", "verify"},
          {"seed", report.seed},
          {"passed", report.passed()},
          {"checks", checks}};
}

std::vector<oracle::CheckReport> chain_file_checks(const std::filesystem::path& file, std::uint64_t seed) {
  std::vector<oracle::CheckReport> out;
  oracle::CheckReport load;
  load.name = "chain_file.load";
  load.trials = 1;
  std::optional<FiniteChain> chain;
  try {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open " + file.string());
    chain = load_chain(Json::parse(in));
    load.detail = "ok";
  } catch (const ChainError& e) {
    load.name = "chain_file." + e.check();
    load.passed = false;
    load.min_slack = -1.0;
    load.detail = e.what();
  } catch (const std::exception& e) {
    load.passed = false;
    load.min_slack = -1.0;
    load.detail = e.what();
  }
  out.push_back(load);
  if (!chain) return out;
  auto sg = oracle::semigroup_check(*chain, {0.1, 0.5, 1.0, 2.0});
  sg.name = "chain_file." + sg.name;
  out.push_back(std::move(sg));
  if (chain->reversible()) {
    Rng rng = make_rng(seed, 0xC4A1);
    auto pc = oracle::poincare_check(*chain, 200, rng);
    pc.name = "chain_file." + pc.name;
    out.push_back(std::move(pc));
  }
  return out;
}

int cmd_run(const std::filesystem::path& config_path, const CommonOptions& opts, std::ostream& out,
            std::ostream& err) {
  return guarded(err, [&]() {
    const ExperimentConfig cfg = load_with_overrides(config_path, opts);
    const SmcConfig sc = make_smc_config(cfg, 1);
    const ResolvedTimes times = resolve_times(cfg);
    const auto runs = run_replicates(sc, cfg.replicates, opts.threads);
    std::optional<double> exact = cfg.exact_value ? cfg.exact_value : exact_expectation(*cfg.estimand, *cfg.target);

    std::vector<double> etas;
    Json rows = Json::array();
    for (const auto& r : runs) {
      etas.push_back(r.eta);
      rows.push_back({{"replicate", r.index},
                      {"seed", r.seed},
                      {"eta", r.eta},
                      {"nu", nullable(r.nu)},
                      {"ess_per_level", r.ess_per_level},
                      {"weight_sums_per_level", r.weight_sums_per_level}});
    }
    const MseReport stats = mse_statistics(etas, exact.value_or(0.0));
    const double se = runs.size() > 1 ? std::sqrt(stats.variance / static_cast<double>(runs.size() - 1)) : 0.0;
    Json summary = {{"eta_mean", stats.mean}, {"eta_variance", stats.variance}, {"eta_se", se}};
    summary["mse"] = exact ? Json(stats.mse) : Json(nullptr);
    summary["bias_squared"] = exact ? Json(stats.bias_squared) : Json(nullptr);

    const Json doc = {{"schema_version", 1},
                      {"command", "run"},
                      {"seed", cfg.master_seed},
                      {"n_particles", cfg.n_particles},
                      {"replicates", cfg.replicates},
                      {"levels", cfg.ladder->size()},
                      {"ladder_type", cfg.ladder_type},
                      {"kernel", kernel_label(*cfg.ladder)},
                      {"gamma_bound", cfg.ladder->gamma_bound()},
                      {"estimand", cfg.estimand->name},
                      {"t_per_level", times.times},
                      {"t_capped", times.capped},
                      {"exact", nullable(exact)},
                      {"runs", rows},
                      {"summary", summary}};

    const auto dir = prepare_dir(opts);
    write_json(dir / "run.json", doc);
    std::ostringstream levels, reps;
    levels << std::setprecision(17) << "replicate,level,ess,weight_sum,wall_time_seconds\n";
    reps << std::setprecision(17) << "replicate,seed,eta,nu\n";
    for (const auto& r : runs) {
      for (std::size_t k = 0; k < r.ess_per_level.size(); ++k)
        levels << r.index << ',' << (k + 1) << ',' << r.ess_per_level[k] << ',' << r.weight_sums_per_level[k] << ','
               << r.wall_time_per_level[k] << '\n';
      reps << r.index << ',' << r.seed << ',' << r.eta << ',';
      if (r.nu) reps << *r.nu;
      reps << '\n';
    }
    write_text(dir / "levels.csv", levels.str());
    write_text(dir / "replicates.csv", reps.str());
    out << "eta mean " << std::setprecision(10) << stats.mean << " over " << runs.size() << " replicate(s)";
    if (exact) out << ", exact " << *exact;
    out << "\nwrote " << (dir / "run.json").string() << ", levels.csv, replicates.csv\n";
    return int(kOk);
  });
}

int cmd_bounds(const std::filesystem::path& config_path, const CommonOptions& opts, std::ostream& out,
               std::ostream& err) {
  return guarded(err, [&]() {
    const ExperimentConfig cfg = load_with_overrides(config_path, opts);
    const BoundReport rep = bound_report(cfg);
    const double cap = cfg.bounds.feasibility_cap;
    const Json doc = bound_report_json(rep, cap);

    const auto& p = rep.params;
    out << std::setprecision(8);
    auto row = [&out](const std::string& label, const auto& value) {
      out << std::left << std::setw(30) << label << std::right << value << "\n";
    };
    row("guarantee", to_string(rep.guarantee));
    row("n", p.n);
    row("M", p.M);
    row("w*", p.w_star);
    row("gamma", p.gamma);
    row("C* (max)", p.c_star_max());
    row("epsilon", p.epsilon);
    row("delta", p.delta);
    row("alpha", rep.alpha);
    row("beta", rep.beta);
    row("theta", rep.theta);
    row("c_hat", rep.c_hat);
    row("v_bar", rep.v_bar);
    for (const auto& d : rep.delta_table) row("delta(" + std::to_string(d.p) + ")", d.value);
    auto table = [&](const char* title, const Prescription& pr) {
      out << title << " [" << pr.source << "]\n";
      for (const auto& b : pr.n_branches) row("  N branch " + b.label, b.value);
      row("  N", pr.n_particles);
      for (std::size_t k = 0; k < pr.t_per_level.size(); ++k) row("  t_" + std::to_string(k + 1), pr.t_per_level[k]);
    };
    table("main", rep.main);
    table("complete", rep.complete);
    if (doc.at("exceeds_feasibility_cap").get<bool>())
      out << "WARNING: prescribed N = " << rep.prescribed_n() << " exceeds the feasibility cap " << cap << "\n";
    if (opts.out_dir) {
      std::filesystem::create_directories(*opts.out_dir);
      write_json(*opts.out_dir / "bounds.json", doc);
    }
    return int(kOk);
  });
}

int cmd_sweep(const std::filesystem::path& config_path, const CommonOptions& opts, std::ostream& out,
              std::ostream& err) {
  return guarded(err, [&]() {
    ExperimentConfig cfg = load_with_overrides(config_path, opts);
    if (!cfg.sweep) throw ConfigError({"/sweep: required for the sweep command"});
    if (!cfg.ladder) throw ConfigError({"/target: sweep needs a target"});
    const std::optional<double> exact =
        cfg.exact_value ? cfg.exact_value : exact_expectation(*cfg.estimand, *cfg.target);
    if (!exact) throw ConfigError({"/exact_value: no closed form for this estimand; supply exact_value"});
    const bool by_n = cfg.sweep->parameter == SweepSpec::Parameter::n_particles;

    Json points = Json::array();
    std::ostringstream csv;
    csv << std::setprecision(17) << "parameter,value,replicates,mean,variance,bias_squared,mse,mse_se\n";
    for (double v : cfg.sweep->values) {
      ExperimentConfig point = cfg;
      if (by_n) {
        point.n_particles = static_cast<std::size_t>(v);
      } else {
        point.time_policy.kind = TimePolicy::Kind::explicit_times;
        point.time_policy.times = {v};
      }
      const SmcConfig sc = make_smc_config(point, 1);
      const auto runs = run_replicates(sc, cfg.sweep->replicates, opts.threads);
      std::vector<double> etas;
      for (const auto& r : runs) etas.push_back(r.eta);
      const MseReport m = mse_statistics(etas, *exact);
      points.push_back({{"value", v},
                        {"replicates", m.replicates},
                        {"mean", m.mean},
                        {"variance", m.variance},
                        {"bias_squared", m.bias_squared},
                        {"mse", m.mse},
                        {"mse_se", m.mse_se},
                        {"variance_se", m.variance_se},
                        {"bias_squared_se", m.bias_squared_se}});
      csv << (by_n ? "n_particles" : "time") << ',' << v << ',' << m.replicates << ',' << m.mean << ',' << m.variance
          << ',' << m.bias_squared << ',' << m.mse << ',' << m.mse_se << '\n';
      out << (by_n ? "N = " : "t = ") << v << ": mse " << m.mse << " (se " << m.mse_se << ")\n";
    }
    const Json doc = {{"schema_version", 1},
                      {"command", "sweep"},
                      {"seed", cfg.master_seed},
                      {"parameter", by_n ? "n_particles" : "time"},
                      {"exact", *exact},
                      {"points", points}};
    const auto dir = prepare_dir(opts);
    write_json(dir / "sweep.json", doc);
    write_text(dir / "sweep.csv", csv.str());
    return int(kOk);
  });
}

int cmd_verify(const VerifyOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    oracle::VerifyReport report;
    report.seed = opts.seed;
    std::vector<std::string> suites = opts.suites;
    if (suites.empty() && !opts.chain_file) suites = {"all"};
    if (!suites.empty()) report = oracle::run_verify_suite(suites, opts.seed);
    if (opts.chain_file)
      for (auto& c : chain_file_checks(*opts.chain_file, opts.seed)) report.checks.push_back(std::move(c));
    const Json doc = verify_report_json(report);
    out << doc.dump(2) << "\n";
    if (opts.out_dir) {
      std::filesystem::create_directories(*opts.out_dir);
      write_json(*opts.out_dir / "verify.json", doc);
    }
    for (const auto& c : report.checks)
      if (!c.passed) err << "FAILED " << c.name << ": " << c.detail << "\n";
    return report.passed() ? int(kOk) : int(kVerifyFailed);
  } catch (const std::invalid_argument& e) {
    err << "config error:\n  " << e.what() << "\n";
    return kConfigError;
  }
}

}  // namespace smcmix::cli
