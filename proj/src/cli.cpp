#include "levytrace/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <ostream>

#include "CLI11.hpp"
#include "levytrace/config.hpp"
#include "levytrace/errors.hpp"
#include "levytrace/execution.hpp"
#include "levytrace/exponents.hpp"
#include "levytrace/geometry.hpp"
#include "levytrace/heatkernel.hpp"
#include "levytrace/numerics.hpp"
#include "levytrace/renewal.hpp"
#include "levytrace/trace.hpp"

namespace levytrace {
namespace {

namespace fs = std::filesystem;

struct Flags {
  std::string config;
  std::uint64_t seed = 0;
  int workers = 0;
  std::string out;
  std::size_t paths = 0;
  int step_div = 0;
  int resolution = 0;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* out_opt = nullptr;
  CLI::Option* paths_opt = nullptr;
  CLI::Option* step_opt = nullptr;
  CLI::Option* res_opt = nullptr;
};

// Everything a subcommand needs, with flags taking precedence over the file.
class Experiment {
 public:
  Experiment(const Flags& f, std::ostream& out, std::ostream& err)
      : flags_(f), cfg_(KeyValueConfig::load(f.config)), out_(out), err_(err) {
    policy_ = ExecutionPolicy{Execution::parallel, resolve_workers(f.workers)};
    model_ = std::make_unique<SpectralModel>(model_from_config(cfg_));
  }

  const KeyValueConfig& cfg() const { return cfg_; }
  const SpectralModel& model() const { return *model_; }
  const ExecutionPolicy& policy() const { return policy_; }
  std::ostream& out() { return out_; }
  std::ostream& err() { return err_; }

  SmoothDomain domain() const { return domain_from_config(cfg_, model_->dimension()); }

  std::uint64_t seed() const {
    if (flags_.seed_opt->count() > 0) return flags_.seed;
    if (!cfg_.has("sampler", "seed")) throw ConfigError("seed missing: give --seed or [sampler] seed");
    const long long s = cfg_.integer_or("sampler", "seed", 0);
    if (s < 0) throw ConfigError("[sampler] seed must be nonnegative");
    return static_cast<std::uint64_t>(s);
  }

  std::size_t paths() const {
    if (flags_.paths_opt->count() > 0) return flags_.paths;
    const long long n = cfg_.integer_or("sampler", "paths", 100000);
    if (n <= 0) throw ConfigError("[sampler] paths must be positive");
    return static_cast<std::size_t>(n);
  }

  int step_div() const {
    const long long k = flags_.step_opt->count() > 0 ? flags_.step_div : cfg_.integer_or("sampler", "step_div", 64);
    if (k < 2) throw ConfigError("step divisor must be at least 2");
    return static_cast<int>(k);
  }

  int resolution(int fallback) const {
    if (flags_.res_opt->count() > 0) return flags_.resolution;
    return static_cast<int>(cfg_.integer_or("density", "nodes_per_decade", fallback));
  }

  /// Decreasing list of times: [schedule] times = ..., or t_max, ratio, count.
  std::vector<double> schedule() const {
    std::vector<double> ts;
    if (cfg_.has("schedule", "times")) {
      ts = cfg_.numbers("schedule", "times");
    } else if (cfg_.has("schedule", "t_max")) {
      const double t0 = cfg_.number("schedule", "t_max");
      const double q = cfg_.number_or("schedule", "ratio", 0.5);
      const long long n = cfg_.integer_or("schedule", "count", 4);
      if (!(q > 0.0 && q < 1.0) || n < 1) throw ConfigError("[schedule] needs 0 < ratio < 1 and count >= 1");
      for (long long i = 0; i < n; ++i) ts.push_back(t0 * std::pow(q, static_cast<double>(i)));
    }
    if (ts.empty()) throw ConfigError("[schedule] is empty: give times or t_max");
    for (double t : ts)
      if (!(t > 0.0) || !std::isfinite(t)) throw ConfigError("[schedule] times must be positive");
    std::sort(ts.begin(), ts.end(), std::greater<>());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    return ts;
  }

  std::ofstream csv(const std::string& name) const {
    const fs::path dir = flags_.out_opt->count() > 0 ? flags_.out : cfg_.get("output", "dir").value_or(".");
    fs::create_directories(dir);
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + (dir / name).string());
    return f;
  }

  TraceContext context(const std::vector<double>& ts) const {
    err_ << "building tables for " << model_->name() << " on t in [" << ts.back() << ", " << ts.front() << "]\n";
    return TraceContext(*model_, ts.back(), ts.front(), step_div(), policy_);
  }

 private:
  const Flags& flags_;
  KeyValueConfig cfg_;
  std::unique_ptr<SpectralModel> model_;
  ExecutionPolicy policy_;
  std::ostream& out_;
  std::ostream& err_;
};

std::string f(double v) { return format_double(v); }

std::uint64_t time_streams(std::size_t i) { return static_cast<std::uint64_t>(i) << 44; }

int cmd_psi(Experiment& ex) {
  const auto& m = ex.model();
  const double lo = ex.cfg().number_or("psi", "r_min", 1e-3);
  const double hi = ex.cfg().number_or("psi", "r_max", 1e3);
  const auto n = static_cast<std::size_t>(ex.cfg().integer_or("psi", "points", 121));
  auto csv = ex.csv("psi.csv");
  csv << "r,psi,levy_density\n";
  for (double r : log_space(lo, hi, n)) csv << f(r) << ',' << f(m.psi(r)) << ',' << f(m.levy_density(r)) << '\n';

  const auto report = check_weak_scaling(m, default_scaling_grid(m));
  auto sc = ex.csv("scaling.csv");
  report.write_csv(sc);
  const auto c = m.characteristics();
  auto& o = ex.out();
  o << "model " << m.name() << "\n";
  o << "WLSC(" << c.lower_order << ", " << c.theta << ", " << c.lower_const << "): "
    << (report.lower_pass ? "ok" : "violated") << ", min ratio " << report.min_lower_ratio << "\n";
  o << "WUSC(" << c.upper_order << ", " << c.theta << ", " << c.upper_const << "): "
    << (report.upper_pass ? "ok" : "violated") << ", max ratio " << report.max_upper_ratio << "\n";
  const auto hw = check_hartman_wintner(m);
  o << "psi(r) / ln r unbounded: " << (hw.granted ? "yes" : "not certified") << "\n";
  return report.pass() ? exit_ok : exit_verdict;
}

int cmd_renewal(Experiment& ex) {
  const auto& c = ex.cfg();
  const double x_min = c.number_or("renewal", "x_min", 1e-4);
  const double x_max = c.number_or("renewal", "x_max", 1e4);
  const auto n = static_cast<std::size_t>(c.integer_or("renewal", "points", 321));
  const auto table = build_renewal_table(ex.model(), x_min, x_max, n, ex.policy());
  auto v = ex.csv("renewal.csv");
  table.write_csv(v);
  auto tt = ex.csv("T.csv");
  tt << "t,T\n";
  for (double t : log_space(table.t_min(), table.t_max(), 121)) tt << f(t) << ',' << f(table.T(t)) << '\n';

  RenewalDiagnostics d;
  const std::string failure = check_renewal_invariants(table, ex.model(), d);
  auto& o = ex.out();
  o << "renewal table for " << ex.model().name() << ": " << table.xs().size() << " points on [" << x_min << ", "
    << x_max << "], order spread " << table.diagnostics().max_order_spread << "\n";
  o << "V(x+y)/(V(x)+V(y)) <= " << d.max_subadditivity << ", V(r) sqrt(psi(1/r)) in [" << d.comparability_lo << ", "
    << d.comparability_hi << "]\n";
  if (!failure.empty()) throw NumericalError("renewal invariant failed: " + failure);
  return exit_ok;
}

int cmd_density(Experiment& ex) {
  const auto& c = ex.cfg();
  const bool own_range = c.has("density", "t_min") && c.has("density", "t_max");
  const auto ts = own_range ? std::vector<double>{} : ex.schedule();
  const double t_lo = own_range ? c.number("density", "t_min") : ts.back();
  const double t_hi = own_range ? c.number("density", "t_max") : ts.front();
  KernelGridOptions opt;
  opt.t_min = t_lo;
  opt.t_max = t_hi;
  opt.rows_per_decade = static_cast<int>(c.integer_or("density", "rows_per_decade", opt.rows_per_decade));
  opt.nodes_per_decade = ex.resolution(opt.nodes_per_decade);
  if (opt.rows_per_decade < 1 || opt.nodes_per_decade < 4) throw ConfigError("[density] grid resolution too low");
  const double x_min = std::min(1e-6, 1e-2 * ex.model().length_scale(t_lo));
  const auto n = static_cast<std::size_t>(std::ceil(40.0 * std::log10(1e4 / x_min))) + 1;
  const auto table = build_renewal_table(ex.model(), x_min, 1e4, n, ex.policy());
  const auto grid = build_kernel_grid(ex.model(), table, opt, ex.policy());
  auto csv = ex.csv("density.csv");
  grid.write_csv(csv);
  const auto& d = grid.diagnostics();
  ex.out() << "kernel grid: " << d.rows << " rows x " << d.nodes << " nodes, mass error " << d.max_mass_error
           << ", probe error " << d.max_probe_error << ", p_t(r) r^d V(r)^2 / t <= " << d.bound_210
           << ", p_t(0) T(t)^d in [" << d.min_p0_Td << ", " << d.bound_212 << "]\n";
  return exit_ok;
}

int cmd_remainder(Experiment& ex) {
  const auto ts = ex.schedule();
  const auto dom = ex.domain();
  std::vector<double> depths;
  if (ex.cfg().has("remainder", "depths")) {
    depths = ex.cfg().numbers("remainder", "depths");
  } else if (dom.kind() == DomainKind::ball) {
    for (double s : log_space(1e-3, 1.0, 13)) depths.push_back(s * dom.radius());
  } else {
    depths = log_space(1e-3, 10.0, 17);
  }
  std::vector<Point> xs;
  for (double q : depths) xs.push_back(dom.point_at_depth(q));
  const auto ctx = ex.context(ts);
  auto csv = ex.csv("remainder.csv");
  csv << "t,depth,r,se,coarse,fine,p0,bound_peak,bound_decay,paths,h\n";
  std::size_t outside = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    ex.err() << "t = " << ts[i] << "\n";
    const auto prof = estimate_remainders(ctx, dom, ts[i], xs, {}, {ex.paths(), ex.seed(), time_streams(i)}, ex.policy());
    for (const auto& e : prof.nodes) {
      csv << f(e.t) << ',' << f(e.depth) << ',' << f(e.value()) << ',' << f(e.se()) << ',' << f(e.r.coarse) << ','
          << f(e.r.fine) << ',' << f(e.p0) << ',' << f(e.bound_peak) << ',' << f(e.bound_decay) << ',' << e.paths
          << ',' << f(e.h) << '\n';
      if (!e.within_bounds()) {
        ++outside;
        ex.err() << "r(" << e.t << ", depth " << e.depth << ") = " << e.value() << " +- " << e.se()
                 << " outside [0, min(p_t(0), bounds)]\n";
      }
    }
  }
  ex.out() << "remainder profile: " << ts.size() << " times x " << xs.size() << " depths, bound constants "
           << ctx.c_peak() << " (peak), " << ctx.c_decay() << " (decay)\n";
  if (outside > 0) throw NumericalError(std::to_string(outside) + " remainder estimates violate their bounds");
  return exit_ok;
}

HalfSpaceOptions half_space_options(const KeyValueConfig& c) {
  HalfSpaceOptions o;
  o.q_ratio = c.number_or("ch", "q_ratio", o.q_ratio);
  o.head_fraction = c.number_or("ch", "head_fraction", o.head_fraction);
  o.cut = c.number_or("ch", "cut", o.cut);
  o.max_budget = c.number_or("ch", "max_budget", o.max_budget);
  return o;
}

int cmd_ch(Experiment& ex) {
  const auto ts = ex.schedule();
  const auto ctx = ex.context(ts);
  const auto opt = half_space_options(ex.cfg());
  auto csv = ex.csv("ch.csv");
  auto prof = ex.csv("ch_profile.csv");
  csv << "t,T,C_H,se,coarse,fine,q_min,q_max,head_budget,tail_bound,paths,h\n";
  prof << "t,q,r,se\n";
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    ex.err() << "t = " << ts[i] << "\n";
    const auto c = estimate_C_H(ctx, ts[i], {ex.paths(), ex.seed(), time_streams(i)}, opt, ex.policy());
    csv << f(c.t) << ',' << f(ctx.T(c.t)) << ',' << f(c.c.value) << ',' << f(c.c.se) << ',' << f(c.c.coarse) << ','
        << f(c.c.fine) << ',' << f(c.q_min) << ',' << f(c.q_max) << ',' << f(c.head_budget) << ','
        << f(c.tail_bound) << ',' << c.paths << ',' << f(c.h) << '\n';
    for (std::size_t k = 0; k < c.q.size(); ++k)
      prof << f(c.t) << ',' << f(c.q[k]) << ',' << f(c.r[k].value()) << ',' << f(c.r[k].se()) << '\n';
    lx.push_back(std::log(c.t));
    ly.push_back(std::log(c.c.value));
  }
  if (lx.size() >= 2) {
    const double n = static_cast<double>(lx.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) mx += lx[i] / n, my += ly[i] / n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) sxy += (lx[i] - mx) * (ly[i] - my), sxx += (lx[i] - mx) * (lx[i] - mx);
    ex.out() << "log-log slope of C_H(t): " << sxy / sxx << "\n";
  }
  return exit_ok;
}

TraceOptions trace_options(const KeyValueConfig& c) {
  TraceOptions o;
  o.interior_nodes = static_cast<int>(c.integer_or("trace", "interior_nodes", o.interior_nodes));
  o.layer_nodes = static_cast<int>(c.integer_or("trace", "layer_nodes", o.layer_nodes));
  o.half_space = half_space_options(c);
  return o;
}

std::vector<TraceReport> run_traces(Experiment& ex, const TraceContext& ctx, const SmoothDomain& dom,
                                    const std::vector<double>& ts, std::size_t paths) {
  const auto opt = trace_options(ex.cfg());
  std::vector<TraceReport> reps;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    ex.err() << "t = " << ts[i] << ", " << paths << " paths\n";
    reps.push_back(estimate_trace(ctx, dom, ts[i], {paths, ex.seed(), time_streams(i)}, opt, ex.policy()));
  }
  return reps;
}

void write_traces(Experiment& ex, const std::vector<TraceReport>& reps) {
  auto csv = ex.csv("trace.csv");
  csv << trace_csv_header() << '\n';
  for (const auto& r : reps) csv << trace_csv_row(r) << '\n';
  auto det = ex.csv("trace_detail.csv");
  det << "t,T,phi_se,rho_se,remainder,remainder_se,inside,inside_const,C_H,C_H_se,head_budget,bias,flagged_nodes,"
         "degenerate\n";
  for (const auto& r : reps) {
    det << f(r.t) << ',' << f(r.T) << ',' << f(r.phi_se) << ',' << f(r.rho_se) << ',' << f(r.remainder) << ','
        << f(r.remainder_se) << ',' << f(r.inside) << ',' << f(r.inside_const) << ',' << f(r.half_space.c.value)
        << ',' << f(r.half_space.c.se) << ',' << f(r.head_budget) << ',' << f(r.bias) << ',' << r.flagged_nodes
        << ',' << (r.degenerate ? 1 : 0) << '\n';
  }
}

void print_traces(Experiment& ex, const std::vector<TraceReport>& reps) {
  auto& o = ex.out();
  for (const auto& r : reps) {
    o << "t = " << r.t << ": tr = " << r.tr << " +- " << r.tr_se << ", Phi = " << r.phi << " +- " << r.phi_se
      << ", rho = " << r.rho << " +- " << r.rho_se << (r.degenerate ? "  [T(t) >= R/2]" : "") << "\n";
  }
}

int cmd_trace(Experiment& ex) {
  const auto ts = ex.schedule();
  const auto dom = ex.domain();
  const auto ctx = ex.context(ts);
  const auto reps = run_traces(ex, ctx, dom, ts, ex.paths());
  write_traces(ex, reps);
  print_traces(ex, reps);
  return exit_ok;
}

int cmd_verify(Experiment& ex) {
  const auto ts = ex.schedule();
  const auto dom = ex.domain();
  if (dom.kind() != DomainKind::ball) throw ConfigError("verify needs a ball domain");
  {
    // Schedule preconditions before any expensive work.
    std::vector<TraceReport> probe(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) probe[i].t = ts[i], probe[i].phi = 1.0;
    try {
      verify_expansion(probe);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("[schedule] ") + e.what());
    }
  }
  VerifyOptions vo;
  vo.final_tolerance = ex.cfg().number_or("verify", "tolerance", vo.final_tolerance);
  const long long cap = ex.cfg().integer_or("verify", "max_paths", 16 * static_cast<long long>(ex.paths()));
  const double width = ex.cfg().number_or("verify", "half_width", 0.03);

  const auto ctx = ex.context(ts);
  std::size_t paths = ex.paths();
  std::vector<TraceReport> reps;
  ExpansionVerdict v;
  for (;;) {
    reps = run_traces(ex, ctx, dom, ts, paths);
    v = verify_expansion(reps, vo);
    const bool wide = std::any_of(reps.begin(), reps.end(),
                                  [&](const TraceReport& r) { return 3.0 * r.phi_se >= width * std::abs(r.phi); });
    if ((v.verdict != Verdict::inconclusive && !wide) || 2 * paths > static_cast<std::size_t>(std::max(cap, 0LL)))
      break;
    ex.err() << verdict_name(v.verdict) << (wide ? " (wide intervals)" : "") << ", doubling paths\n";
    paths *= 2;
  }
  write_traces(ex, reps);
  print_traces(ex, reps);
  auto& o = ex.out();
  for (const auto& n : v.notes) o << "note: " << n << "\n";
  o << "final gap |Phi - 1| = " << v.final_gap << " (tolerance " << vo.final_tolerance << "), sup rho = " << v.rho_sup
    << ", paths " << paths << "\n";
  o << "verdict: " << verdict_name(v.verdict) << "\n";
  auto txt = ex.csv("verdict.txt");
  txt << "verdict=" << verdict_name(v.verdict) << "\npaths=" << paths << "\nfinal_gap=" << f(v.final_gap)
      << "\nrho_sup=" << f(v.rho_sup) << '\n';
  for (const auto& n : v.notes) txt << "note=" << n << '\n';
  return v.verdict == Verdict::pass ? exit_ok : exit_verdict;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Heat trace expansions for unimodal Levy processes", "levytrace"};
  app.require_subcommand(1);
  Flags flags;
  using Command = std::function<int(Experiment&)>;
  const std::vector<std::pair<std::string, std::string>> names{
      {"psi", "exponent table and weak scaling report"},
      {"renewal", "renewal function V and time scale T tables"},
      {"density", "free transition density grid"},
      {"remainder", "heat remainder r_D over depth"},
      {"ch", "half-space coefficient C_H over t"},
      {"trace", "trace estimates over the schedule"},
      {"verify", "two-term expansion verdict"}};
  const std::map<std::string, Command> commands{{"psi", cmd_psi},     {"renewal", cmd_renewal},
                                                {"density", cmd_density}, {"remainder", cmd_remainder},
                                                {"ch", cmd_ch},       {"trace", cmd_trace},
                                                {"verify", cmd_verify}};
  for (const auto& [name, help] : names) {
    auto* s = app.add_subcommand(name, help);
    s->add_option("--config", flags.config, "configuration file")->required();
    flags.seed_opt = s->add_option("--seed", flags.seed, "base seed (overrides [sampler] seed)");
    s->add_option("--workers", flags.workers, "worker threads (else LEVYTRACE_WORKERS)")->check(CLI::NonNegativeNumber);
    flags.out_opt = s->add_option("--out", flags.out, "output directory");
    flags.paths_opt = s->add_option("--paths", flags.paths, "Monte Carlo paths")->check(CLI::PositiveNumber);
    flags.step_opt = s->add_option("--step-div", flags.step_div, "step h = t / K");
    flags.res_opt = s->add_option("--resolution", flags.resolution, "density grid nodes per decade");
  }

  std::vector<const char*> argv{"levytrace"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::Success&) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return exit_config;
  }
  // Options were registered once per subcommand; keep the ones of the chosen command.
  CLI::App* chosen = app.get_subcommands().front();
  flags.seed_opt = chosen->get_option("--seed");
  flags.out_opt = chosen->get_option("--out");
  flags.paths_opt = chosen->get_option("--paths");
  flags.step_opt = chosen->get_option("--step-div");
  flags.res_opt = chosen->get_option("--resolution");

  try {
    Experiment ex(flags, out, err);
    return commands.at(chosen->get_name())(ex);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return exit_config;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return exit_numerical;
  } catch (const std::invalid_argument& e) {
    err << "invalid input: " << e.what() << "\n";
    return exit_config;
  } catch (const std::out_of_range& e) {
    err << "invalid input: " << e.what() << "\n";
    return exit_config;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "output error: " << e.what() << "\n";
    return exit_config;
  } catch (const std::domain_error& e) {
    err << "invalid input: " << e.what() << "\n";
    return exit_config;
  } catch (const std::exception& e) {
    err << "numerical error: " << e.what() << "\n";
    return exit_numerical;
  }
}

}  // namespace levytrace
