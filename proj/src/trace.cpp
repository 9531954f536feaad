#include "levytrace/trace.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "levytrace/errors.hpp"
#include "levytrace/numerics.hpp"
#include "levytrace/sampler.hpp"

namespace levytrace {

namespace {

constexpr std::size_t kBlock = 256;
constexpr std::uint64_t kPilotStreams = std::uint64_t{1} << 40;
constexpr std::uint64_t kHalfSpaceStreams = std::uint64_t{1} << 41;
constexpr std::uint64_t kOuterStreams = std::uint64_t{1} << 42;
constexpr std::uint64_t kNestedStreams = std::uint64_t{1} << 43;

RenewalTable context_table(const SpectralModel& model, double t_min, const ExecutionPolicy& policy) {
  const double x_min = std::min(1e-6, 1e-2 * model.length_scale(t_min));
  const double x_max = 1e4;
  const auto n = static_cast<std::size_t>(std::ceil(40.0 * std::log10(x_max / x_min))) + 1;
  return build_renewal_table(model, x_min, x_max, n, policy);
}

KernelGridOptions context_grid(double t_lo, double t_hi, int step_div) {
  if (!(t_lo > 0.0) || !(t_hi >= t_lo)) throw std::invalid_argument("trace context: need 0 < t_lo <= t_hi");
  if (step_div < 2) throw std::invalid_argument("trace context: step divisor must be at least 2");
  KernelGridOptions o;
  o.t_min = 0.999 * t_lo / (2.0 * step_div);
  o.t_max = t_hi;
  return o;
}

// Running sums for one start point: fine (step h/2) and coarse (step h) values.
struct NodeSums {
  double f = 0.0, c = 0.0, ff = 0.0, cc = 0.0, fc = 0.0;

  void add(double a, double b) {
    f += a;
    c += b;
    ff += a * a;
    cc += b * b;
    fc += a * b;
  }
  NodeSums& operator+=(const NodeSums& o) {
    f += o.f;
    c += o.c;
    ff += o.ff;
    cc += o.cc;
    fc += o.fc;
    return *this;
  }
};

SkeletonEstimate from_sums(const NodeSums& s, std::size_t n, double w) {
  const double N = static_cast<double>(n);
  const double mf = s.f / N, mc = s.c / N;
  const auto var = [&](double sum_sq, double mean) { return std::max(0.0, (sum_sq - N * mean * mean) / (N - 1)); };
  const double vf = var(s.ff, mf), vc = var(s.cc, mc);
  const double cov = (s.fc - N * mf * mc) / (N - 1);
  const double vr = std::max(0.0, (1 + w) * (1 + w) * vf + w * w * vc - 2 * w * (1 + w) * cov);
  SkeletonEstimate e;
  e.fine = mf;
  e.fine_se = std::sqrt(vf / N);
  e.coarse = mc;
  e.coarse_se = std::sqrt(vc / N);
  e.value = (1 + w) * mf - w * mc;
  e.se = std::sqrt(vr / N);
  return e;
}

SkeletonEstimate from_paths(const std::vector<double>& fine, const std::vector<double>& coarse, double w) {
  std::vector<double> rich(fine.size());
  for (std::size_t i = 0; i < fine.size(); ++i) rich[i] = (1 + w) * fine[i] - w * coarse[i];
  const auto a = mean_se(fine), b = mean_se(coarse), c = mean_se(rich);
  SkeletonEstimate e;
  e.fine = a.mean;
  e.fine_se = a.se;
  e.coarse = b.mean;
  e.coarse_se = b.se;
  e.value = c.mean;
  e.se = c.se;
  return e;
}

template <class T>
T pairwise_reduce(std::vector<T>& parts, std::size_t lo, std::size_t hi) {
  if (hi - lo == 1) return parts[lo];
  const std::size_t mid = lo + (hi - lo) / 2;
  T a = pairwise_reduce(parts, lo, mid);
  const T b = pairwise_reduce(parts, mid, hi);
  for (std::size_t k = 0; k < a.size(); ++k) a[k] += b[k];
  return a;
}

// Start points x_k = base + s_k dir with dir the ball's e_1 or the half-space
// normal. At each step the set of s with base + s dir + S(s) inside the domain is an
// interval, so the nodes still inside form a contiguous run in sorted order.
struct LineNodes {
  bool valid = false;
  Point base{}, dir{};
  std::vector<double> s;              // ascending
  std::vector<std::size_t> order;     // node index of the k-th smallest s
};

LineNodes line_nodes(const SmoothDomain& domain, const std::vector<Point>& starts) {
  LineNodes out;
  const int d = domain.dimension();
  if (domain.kind() == DomainKind::ball) {
    out.base = domain.center();
    out.dir[0] = 1.0;
  } else {
    out.dir = domain.normal();
  }
  std::vector<std::pair<double, std::size_t>> s;
  for (std::size_t k = 0; k < starts.size(); ++k) {
    double proj = 0.0, scale = 0.0;
    for (int j = 0; j < d; ++j) {
      proj += (starts[k][j] - out.base[j]) * out.dir[j];
      scale = std::max(scale, std::abs(starts[k][j]));
    }
    for (int j = 0; j < d; ++j)
      if (std::abs(starts[k][j] - out.base[j] - proj * out.dir[j]) > 1e-14 * (1.0 + scale)) return out;
    s.emplace_back(proj, k);
  }
  std::sort(s.begin(), s.end());
  for (const auto& [v, k] : s) {
    out.s.push_back(v);
    out.order.push_back(k);
  }
  out.valid = true;
  return out;
}

struct EngineResult {
  std::vector<NodeSums> nodes;
  std::vector<std::vector<double>> fine, coarse;   // per weight set, per path
};

// One walk per path at step h/2 (the h skeleton is every second point), shared
// by all start points. Exit values p_{t - s}(|X(s) - x_k|) only depend on the
// common increment S(s) = X(s) - x_k.
EngineResult run_engine(const TraceContext& ctx, const SmoothDomain& domain, double t,
                        const std::vector<Point>& starts, const std::vector<std::vector<double>>& weights,
                        std::size_t paths, std::uint64_t seed, std::uint64_t offset, const ExecutionPolicy& policy) {
  const int d = domain.dimension();
  const std::size_t n_nodes = starts.size();
  const IncrementSampler sampler(ctx.model());
  const double h = t / ctx.step_div();
  const auto stepper = sampler.fixed(0.5 * h);
  const std::size_t steps = 2 * static_cast<std::size_t>(ctx.step_div()) - 1;   // fine points s < t
  const KernelGrid& grid = ctx.grid();
  const LineNodes line = line_nodes(domain, starts);

  EngineResult out;
  out.fine.assign(weights.size(), std::vector<double>(paths, 0.0));
  out.coarse.assign(weights.size(), std::vector<double>(paths, 0.0));
  const std::size_t n_blocks = (paths + kBlock - 1) / kBlock;
  std::vector<std::vector<NodeSums>> block_sums(n_blocks, std::vector<NodeSums>(n_nodes));

  for_each_index(n_blocks, policy, [&](std::size_t b) {
    auto& sums = block_sums[b];
    std::vector<double> vf(n_nodes), vc(n_nodes);
    std::vector<char> fine_in(n_nodes), coarse_in(n_nodes);
    std::vector<std::size_t> alive;
    const std::size_t end = std::min(paths, (b + 1) * kBlock);
    for (std::size_t i = b * kBlock; i < end; ++i) {
      Philox rng(seed, offset + i);
      std::fill(vf.begin(), vf.end(), 0.0);
      std::fill(vc.begin(), vc.end(), 0.0);
      Point S{};
      double s = 0.0, value = -1.0;
      const auto exit_value = [&] {
        if (value < 0.0) {
          double r2 = 0.0;
          for (int j = 0; j < d; ++j) r2 += S[j] * S[j];
          value = grid.density(t - s, std::sqrt(r2));
        }
        return value;
      };
      if (line.valid) {
        std::size_t fl = 0, fu = n_nodes, cl = 0, cu = n_nodes;
        for (std::size_t k = 1; k <= steps && cl < cu; ++k) {
          stepper.step(S, rng);
          s = 0.5 * h * static_cast<double>(k);
          value = -1.0;
          double lo, hi;
          if (domain.kind() == DomainKind::ball) {
            double ad = 0.0, a2 = 0.0;
            for (int j = 0; j < d; ++j) {
              const double a = line.base[j] + S[j] - domain.center()[j];
              ad += a * line.dir[j];
              a2 += a * a;
            }
            const double disc = ad * ad - a2 + domain.radius() * domain.radius();
            const double wdt = disc > 0.0 ? std::sqrt(disc) : 0.0;
            lo = -ad - wdt;
            hi = disc > 0.0 ? -ad + wdt : lo;
          } else {
            double sn = 0.0;
            for (int j = 0; j < d; ++j) sn += S[j] * line.dir[j];
            lo = domain.offset() - sn;
            hi = INFINITY;
          }
          while (fl < fu && line.s[fl] <= lo) vf[line.order[fl++]] = exit_value();
          while (fu > fl && line.s[fu - 1] >= hi) vf[line.order[--fu]] = exit_value();
          if (k % 2 == 0) {
            while (cl < cu && line.s[cl] <= lo) vc[line.order[cl++]] = exit_value();
            while (cu > cl && line.s[cu - 1] >= hi) vc[line.order[--cu]] = exit_value();
          }
        }
      } else {
        std::fill(fine_in.begin(), fine_in.end(), 1);
        std::fill(coarse_in.begin(), coarse_in.end(), 1);
        alive.resize(n_nodes);
        for (std::size_t k = 0; k < n_nodes; ++k) alive[k] = k;
        for (std::size_t k = 1; k <= steps && !alive.empty(); ++k) {
          stepper.step(S, rng);
          s = 0.5 * h * static_cast<double>(k);
          value = -1.0;
          const bool even = k % 2 == 0;
          std::size_t kept = 0;
          for (std::size_t a = 0; a < alive.size(); ++a) {
            const std::size_t node = alive[a];
            Point y = starts[node];
            for (int j = 0; j < d; ++j) y[j] += S[j];
            if (!domain.contains(y)) {
              if (fine_in[node]) {
                fine_in[node] = 0;
                vf[node] = exit_value();
              }
              if (even) {
                coarse_in[node] = 0;
                vc[node] = exit_value();
                continue;
              }
            }
            alive[kept++] = node;
          }
          alive.resize(kept);
        }
      }
      for (std::size_t k = 0; k < n_nodes; ++k) sums[k].add(vf[k], vc[k]);
      for (std::size_t w = 0; w < weights.size(); ++w) {
        double sf = 0.0, sc = 0.0;
        for (std::size_t k = 0; k < n_nodes; ++k) {
          sf += weights[w][k] * vf[k];
          sc += weights[w][k] * vc[k];
        }
        out.fine[w][i] = sf;
        out.coarse[w][i] = sc;
      }
    }
  });
  out.nodes = pairwise_reduce(block_sums, 0, n_blocks);
  return out;
}

void check_config(const EstimatorConfig& config) {
  if (config.paths < 1000) throw std::invalid_argument("estimator: at least 1000 paths required");
}

RemainderEstimate make_estimate(const TraceContext& ctx, const SmoothDomain& domain, double t, const Point& x,
                                const SkeletonEstimate& r, std::size_t paths) {
  const int d = domain.dimension();
  RemainderEstimate e;
  e.t = t;
  e.x = x;
  e.depth = domain.distance(x);
  e.r = r;
  e.h = t / ctx.step_div();
  e.paths = paths;
  e.p0 = ctx.grid().density_at_zero(t);
  e.bound_peak = ctx.c_peak() * std::pow(ctx.T(t), -d);
  const double delta = std::min(e.depth, ctx.table().x_max());
  e.bound_decay = delta >= ctx.table().x_min()
                      ? ctx.c_decay() * t / (std::pow(ctx.V(delta), 2) * std::pow(delta, d))
                      : INFINITY;
  return e;
}

RemainderProfile profile_from(const TraceContext& ctx, const SmoothDomain& domain, double t,
                              const std::vector<Point>& starts, const EngineResult& res, std::size_t paths,
                              double w) {
  RemainderProfile out;
  for (std::size_t k = 0; k < starts.size(); ++k)
    out.nodes.push_back(make_estimate(ctx, domain, t, starts[k], from_sums(res.nodes[k], paths, w), paths));
  return out;
}

void validate_starts(const SmoothDomain& domain, const std::vector<Point>& starts, double t, const TraceContext& ctx) {
  if (domain.dimension() != ctx.model().dimension()) throw std::invalid_argument("estimator: dimension mismatch");
  if (!(t >= ctx.grid().t_min() * 2 * ctx.step_div() * 0.999) || !(t <= ctx.grid().t_max()))
    throw std::out_of_range("estimator: t = " + format_double(t) + " outside the context's time range");
  for (const auto& x : starts)
    if (!domain.contains(x)) throw std::invalid_argument("estimator: start point outside the domain");
}

}  // namespace

TraceContext::TraceContext(const SpectralModel& model, double t_lo, double t_hi, int step_div,
                           const ExecutionPolicy& policy)
    : table_(context_table(model, context_grid(t_lo, t_hi, step_div).t_min, policy)),
      grid_(build_kernel_grid(model, table_, context_grid(t_lo, t_hi, step_div), policy)),
      step_div_(step_div) {
  if (!model.samplable()) throw std::invalid_argument("trace estimators need a samplable model");
}

bool RemainderEstimate::within_bounds() const {
  const double slack = 3.0 * r.se;
  return r.value >= -slack && r.value <= p0 + slack && r.value <= std::min(bound_peak, bound_decay) + slack;
}

RemainderProfile estimate_remainders(const TraceContext& context, const SmoothDomain& domain, double t,
                                     const std::vector<Point>& starts, const std::vector<double>& weights,
                                     const EstimatorConfig& config, const ExecutionPolicy& policy) {
  check_config(config);
  validate_starts(domain, starts, t, context);
  if (!weights.empty() && weights.size() != starts.size())
    throw std::invalid_argument("estimate_remainders: one weight per start point");
  std::vector<std::vector<double>> sets;
  if (!weights.empty()) sets.push_back(weights);
  const auto res = run_engine(context, domain, t, starts, sets, config.paths, config.seed, config.stream_offset, policy);
  const double w = richardson_weight(context.model(), t / context.step_div());
  auto out = profile_from(context, domain, t, starts, res, config.paths, w);
  if (!weights.empty()) out.weighted = from_paths(res.fine[0], res.coarse[0], w);
  return out;
}

RemainderEstimate estimate_remainder(const TraceContext& context, const SmoothDomain& domain, double t,
                                     const Point& x, const EstimatorConfig& config, const ExecutionPolicy& policy) {
  return estimate_remainders(context, domain, t, {x}, {}, config, policy).nodes.front();
}

NestedIdentityReport check_nested_identity(const TraceContext& context, const SmoothDomain& inner,
                                           const SmoothDomain& outer, double t, const Point& x,
                                           const EstimatorConfig& config, const ExecutionPolicy& policy) {
  check_config(config);
  validate_starts(inner, {x}, t, context);
  validate_starts(outer, {x}, t, context);
  const auto rd = estimate_remainder(context, inner, t, x, config, policy);
  auto other = config;
  other.stream_offset += kOuterStreams;
  const auto rf = estimate_remainder(context, outer, t, x, other, policy);

  const int d = inner.dimension();
  const IncrementSampler sampler(context.model());
  const double h = t / context.step_div();
  const auto stepper = sampler.fixed(0.5 * h);
  const std::size_t steps = 2 * static_cast<std::size_t>(context.step_div()) - 1;
  std::vector<double> fine(config.paths), coarse(config.paths);
  for_each_index(config.paths, policy, [&](std::size_t i) {
    Philox rng(config.seed, config.stream_offset + kNestedStreams + i);
    // Per skeleton: 0 inside D, 1 in F \ D after tau_D, 2 done.
    int state[2] = {0, 0};
    double value[2] = {0.0, 0.0};
    Point X = x;
    for (std::size_t k = 1; k <= steps && (state[0] < 2 || state[1] < 2); ++k) {
      stepper.step(X, rng);
      const double s = 0.5 * h * static_cast<double>(k);
      for (int sk = 0; sk < 2; ++sk) {
        if (sk == 1 && k % 2 != 0) continue;
        if (state[sk] == 2) continue;
        const bool in_d = inner.contains(X), in_f = outer.contains(X);
        if (state[sk] == 0 && !in_d) {
          if (!in_f) {
            state[sk] = 2;
            continue;
          }
          double r2 = 0.0;
          for (int j = 0; j < d; ++j) r2 += (X[j] - x[j]) * (X[j] - x[j]);
          value[sk] = context.grid().density(t - s, std::sqrt(r2));
          state[sk] = 1;
        } else if (state[sk] == 1 && !in_f) {
          double r2 = 0.0;
          for (int j = 0; j < d; ++j) r2 += (X[j] - x[j]) * (X[j] - x[j]);
          value[sk] -= context.grid().density(t - s, std::sqrt(r2));
          state[sk] = 2;
        }
      }
    }
    fine[i] = value[0];
    coarse[i] = value[1];
  });
  const auto rhs = from_paths(fine, coarse, richardson_weight(context.model(), h));

  NestedIdentityReport rep;
  rep.lhs = rd.value() - rf.value();
  rep.lhs_se = std::hypot(rd.se(), rf.se());
  rep.rhs = rhs.value;
  rep.rhs_se = rhs.se;
  const double joint = std::hypot(rep.lhs_se, rep.rhs_se);
  rep.z = joint > 0.0 ? std::abs(rep.lhs - rep.rhs) / joint : (rep.lhs == rep.rhs ? 0.0 : INFINITY);
  rep.agree = rep.z <= 3.0;
  rep.nonnegative = rep.lhs >= -3.0 * rep.lhs_se;
  return rep;
}

namespace {

double decay_tail(const TraceContext& ctx, double t, double q_max, int d) {
  const double c = ctx.c_decay() * t;
  const double x_max = ctx.table().x_max();
  double total = 0.0;
  if (q_max < x_max) {
    const auto g = [&](double u) {
      const double q = std::exp(u);
      const double V = ctx.V(q);
      return c / (V * V * std::pow(q, d)) * q;
    };
    std::vector<double> breaks;
    for (double u = std::log(q_max); u < std::log(x_max); u += 0.5) breaks.push_back(u);
    breaks.push_back(std::log(x_max));
    if (breaks.size() >= 2) total += integrate_pieces(g, breaks, 1e-8);
  }
  // Beyond the table V >= V(x_max).
  const double edge = std::max(q_max, x_max);
  const double V = ctx.V(x_max);
  total += c / (V * V) * std::pow(edge, 1 - d) / (d - 1);
  return total;
}

// Trapezoid weights in log q for geometric nodes, with the head q_min r(q_min) on node 0.
std::vector<double> half_space_weights(const std::vector<double>& q, double log_ratio) {
  std::vector<double> w(q.size());
  for (std::size_t k = 0; k < q.size(); ++k) w[k] = log_ratio * q[k] * (k == 0 || k + 1 == q.size() ? 0.5 : 1.0);
  if (q.size() == 1) w[0] = 0.0;
  w[0] += q[0];
  return w;
}

}  // namespace

HalfSpaceEstimate estimate_C_H(const TraceContext& context, double t, const EstimatorConfig& config,
                               const HalfSpaceOptions& options, const ExecutionPolicy& policy) {
  check_config(config);
  const int d = context.model().dimension();
  if (d < 2) throw std::invalid_argument("estimate_C_H: dimension must be at least 2");
  if (!(options.q_ratio > 1.0) || !(options.head_fraction > 0.0) || !(options.q_cap > 1.0))
    throw std::invalid_argument("estimate_C_H: bad node options");
  std::vector<double> e1(d, 0.0);
  e1[0] = 1.0;
  const auto H = SmoothDomain::half_space(e1, 0.0);
  const double T = context.T(t);
  const double q_min = options.head_fraction * T;
  const double log_ratio = std::log(options.q_ratio);
  std::vector<double> q;
  for (double v = q_min; v <= options.q_cap * T; v *= options.q_ratio) q.push_back(v);
  const auto points = [&](std::size_t n) {
    std::vector<Point> p(n);
    for (std::size_t k = 0; k < n; ++k) p[k][0] = q[k];
    return p;
  };
  validate_starts(H, points(q.size()), t, context);
  const double w = richardson_weight(context.model(), t / context.step_div());
  const double p0 = context.grid().density_at_zero(t);
  const auto bound = [&](double v) {
    const double V = context.V(std::min(v, context.table().x_max()));
    return context.c_decay() * t / (V * V * std::pow(v, d));
  };

  // Pilot: cut-off node on separate streams.
  const std::size_t pilot = std::min(config.paths, std::max<std::size_t>(2000, config.paths / 8));
  const auto pilot_run =
      run_engine(context, H, t, points(q.size()), {}, pilot, config.seed, config.stream_offset + kPilotStreams, policy);
  std::size_t last = q.size() - 1;
  double running = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    const double r = from_sums(pilot_run.nodes[k], pilot, w).value;
    if (k == 0) {
      running = q_min * r;
    } else {
      const double r_prev = from_sums(pilot_run.nodes[k - 1], pilot, w).value;
      running += 0.5 * log_ratio * (q[k - 1] * r_prev + q[k] * r);
    }
    if (k >= 1 && bound(q[k]) < options.cut * running / q[k]) {
      last = k;
      break;
    }
  }
  q.resize(last + 1);

  const auto starts = points(q.size());
  const auto weights = half_space_weights(q, log_ratio);
  const auto res = run_engine(context, H, t, starts, {weights}, config.paths, config.seed,
                              config.stream_offset + kHalfSpaceStreams, policy);
  const auto profile = profile_from(context, H, t, starts, res, config.paths, w);

  HalfSpaceEstimate out;
  out.t = t;
  out.c = from_paths(res.fine[0], res.coarse[0], w);
  out.q_min = q_min;
  out.q_max = q.back();
  const double r0 = profile.nodes.front().value();
  out.head = q_min * r0;
  out.head_budget = q_min * std::max(0.0, p0 - r0);
  out.tail_bound = decay_tail(context, t, out.q_max, d);
  out.q = q;
  out.r = profile.nodes;
  out.paths = config.paths;
  out.pilot_paths = pilot;
  out.h = t / context.step_div();
  if (!(out.c.value > 0.0) || out.budget_fraction() > options.max_budget)
    throw NumericalError("C_H(" + format_double(t) + "): head budget " + format_double(out.head_budget) +
                         " and tail bound " + format_double(out.tail_bound) + " exceed " +
                         format_double(options.max_budget) + " of the estimate " + format_double(out.c.value));
  return out;
}

TraceReport estimate_trace(const TraceContext& context, const SmoothDomain& ball, double t,
                           const EstimatorConfig& config, const TraceOptions& options, const ExecutionPolicy& policy) {
  if (ball.kind() != DomainKind::ball) throw std::invalid_argument("estimate_trace needs a ball");
  check_config(config);
  const int d = ball.dimension();
  const double rho = ball.radius();
  const double R = ball.smoothness_scale();
  const double sigma = unit_sphere_area(d);
  const double T = context.T(t);
  const double q_min = std::min(options.half_space.head_fraction * T, R / 128.0);
  const double q_layer = 0.5 * R;

  std::vector<Point> starts;
  std::vector<double> total, inside;
  const auto add = [&](double s, double weight, bool interior) {
    Point x = ball.center();
    x[0] += s;
    starts.push_back(x);
    total.push_back(weight);
    inside.push_back(interior ? weight : 0.0);
  };
  const auto gi = gauss_legendre(options.interior_nodes);
  const double a = rho - q_layer;
  for (std::size_t k = 0; k < gi.nodes.size(); ++k) {
    const double s = 0.5 * a * (gi.nodes[k] + 1.0);
    add(s, 0.5 * a * gi.weights[k] * sigma * std::pow(s, d - 1), true);
  }
  const auto gl = gauss_legendre(options.layer_nodes);
  const double u0 = std::log(q_min), u1 = std::log(q_layer);
  for (std::size_t k = 0; k < gl.nodes.size(); ++k) {
    const double q = std::exp(u0 + 0.5 * (u1 - u0) * (gl.nodes[k] + 1.0));
    add(rho - q, 0.5 * (u1 - u0) * gl.weights[k] * q * sigma * std::pow(rho - q, d - 1), false);
  }
  const double head_weight = sigma * (std::pow(rho, d) - std::pow(rho - q_min, d)) / d;
  add(rho - q_min, head_weight, false);

  validate_starts(ball, starts, t, context);
  const auto res = run_engine(context, ball, t, starts, {total, inside}, config.paths, config.seed,
                              config.stream_offset, policy);
  const double w = richardson_weight(context.model(), t / context.step_div());
  const auto profile = profile_from(context, ball, t, starts, res, config.paths, w);
  const auto rem = from_paths(res.fine[0], res.coarse[0], w);
  const auto ins = from_paths(res.fine[1], res.coarse[1], w);

  auto hs_config = config;
  hs_config.stream_offset += kOuterStreams;
  TraceReport rep;
  rep.half_space = estimate_C_H(context, t, hs_config, options.half_space, policy);
  const auto& ch = rep.half_space.c;

  const auto m = measures(ball);
  const double p0 = context.grid().density_at_zero(t);
  rep.t = t;
  rep.T = T;
  rep.term1 = m.volume * p0;
  rep.remainder = rem.value;
  rep.remainder_se = rem.se;
  rep.tr = rep.term1 - rem.value;
  rep.tr_se = rem.se;
  rep.term2 = m.surface * ch.value;
  rep.term2_se = m.surface * ch.se;
  rep.phi = rem.value / rep.term2;
  rep.phi_se = std::abs(rep.phi) * std::hypot(rem.se / rem.value, ch.se / ch.value);
  const double scale = m.volume * p0 * T * T / (R * R);
  rep.rho = std::abs(rep.term2 - rem.value) / scale;
  rep.rho_se = std::hypot(rem.se, rep.term2_se) / scale;
  rep.inside = ins.value;
  rep.inside_se = ins.se;
  rep.inside_const = ins.value * R * R * std::pow(T, d - 2) / m.volume;
  rep.head_budget = head_weight * std::max(0.0, p0 - profile.nodes.back().value());
  rep.bias = rem.value - rem.fine;
  for (const auto& n : profile.nodes)
    if (n.se() > 0.05 * std::abs(n.value())) ++rep.flagged_nodes;
  rep.degenerate = T >= 0.5 * R;
  rep.paths = config.paths;
  rep.h = t / context.step_div();
  rep.nodes = profile.nodes;
  return rep;
}

std::string trace_csv_header() { return "t,tr,se,term1,term2,phi,rho,paths,h"; }

std::string trace_csv_row(const TraceReport& r) {
  return format_double(r.t) + "," + format_double(r.tr) + "," + format_double(r.tr_se) + "," +
         format_double(r.term1) + "," + format_double(r.term2) + "," + format_double(r.phi) + "," +
         format_double(r.rho) + "," + std::to_string(r.paths) + "," + format_double(r.h);
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::pass:
      return "PASS";
    case Verdict::fail:
      return "FAIL";
    case Verdict::inconclusive:
      return "INCONCLUSIVE";
  }
  return "?";
}

ExpansionVerdict verify_expansion(const std::vector<TraceReport>& reports, const VerifyOptions& options) {
  if (reports.size() < 4) throw std::invalid_argument("verify_expansion: at least 4 times required");
  for (std::size_t i = 0; i < reports.size(); ++i) {
    if (i > 0 && !(reports[i].t < reports[i - 1].t))
      throw std::invalid_argument("verify_expansion: times must decrease");
  }
  const double ratio = reports[1].t / reports[0].t;
  for (std::size_t i = 1; i < reports.size(); ++i)
    if (std::abs(reports[i].t / reports[i - 1].t - ratio) > 1e-6 * ratio)
      throw std::invalid_argument("verify_expansion: times must be geometric");

  ExpansionVerdict out;
  bool failed = false, unresolved = false;
  const auto note = [&](const std::string& s) { out.notes.push_back(s); };
  for (const auto& r : reports)
    if (r.degenerate)
      note("t = " + format_double(r.t) + ": T(t) = " + format_double(r.T) +
           " >= R/2, the trivial regime (checked, but the expansion carries no information there)");
  for (const auto& r : reports)
    if (!std::isfinite(r.phi) || !std::isfinite(r.rho)) {
      note("non-finite Phi or rho at t = " + format_double(r.t));
      failed = true;
    }
  for (std::size_t i = 0; i + 1 < reports.size(); ++i) {
    const auto& a = reports[i];
    const auto& b = reports[i + 1];
    const double ga = std::abs(a.phi - 1.0), gb = std::abs(b.phi - 1.0);
    const double lo = std::max(a.phi - 3 * a.phi_se, b.phi - 3 * b.phi_se);
    const double hi = std::min(a.phi + 3 * a.phi_se, b.phi + 3 * b.phi_se);
    const double overlap = std::max(0.0, hi - lo);
    const double half_width = 0.5 * (3 * a.phi_se + 3 * b.phi_se);
    if (gb > ga && overlap <= 0.0) {
      note("|Phi - 1| grows from t = " + format_double(a.t) + " to " + format_double(b.t));
      failed = true;
    }
    if (overlap > half_width) {
      note("Phi intervals at t = " + format_double(a.t) + " and " + format_double(b.t) + " overlap by more than half");
      unresolved = true;
    }
  }
  out.final_gap = std::abs(reports.back().phi - 1.0);
  if (out.final_gap > options.final_tolerance) {
    note("|Phi - 1| = " + format_double(out.final_gap) + " at the smallest t exceeds " +
         format_double(options.final_tolerance));
    failed = true;
  }
  double sup = reports.front().rho;
  double sup_se = reports.front().rho_se;
  for (std::size_t i = 1; i < reports.size(); ++i) {
    const auto& r = reports[i];
    if (r.rho > sup + 3.0 * std::hypot(r.rho_se, sup_se)) {
      note("bound ratio rho grows at t = " + format_double(r.t));
      failed = true;
    }
    if (r.rho > sup) {
      sup = r.rho;
      sup_se = r.rho_se;
    }
  }
  out.rho_sup = sup;
  out.verdict = failed ? Verdict::fail : (unresolved ? Verdict::inconclusive : Verdict::pass);
  return out;
}

}  // namespace levytrace
