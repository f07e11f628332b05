#include "sarqc/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "sarqc/error.hpp"
#include "sarqc/parallel.hpp"
#include "sarqc/rng.hpp"
#include "sarqc/saliency.hpp"
#include "sarqc/solver_gbs.hpp"
#include "sarqc/solver_gs.hpp"

namespace sarqc::oracle {

using linalg::Matrix;
using nlohmann::json;

namespace {

double quad_form(const Matrix& g, std::span<const double> v) {
  const std::vector<double> gv = linalg::matvec(g, v);
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) acc += v[i] * gv[i];
  return acc;
}

Matrix random_gaussian(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double std = 1.0) {
  std::normal_distribution<double> nd(0.0, std);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = nd(rng);
  return m;
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double rel_diff(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / scale;
}

// Calls visit(point) for every element of the product grid in
// lexicographic order.
template <typename Visit>
void for_each_point(const std::vector<std::vector<double>>& grids, Visit&& visit) {
  std::size_t total = 1;
  for (const auto& g : grids) {
    if (g.empty()) throw InvalidArgument("exhaustive search: empty candidate set");
    if (total > kMaxExhaustive / g.size()) {
      throw InvalidArgument("exhaustive search: product grid exceeds 1e6 points");
    }
    total *= g.size();
  }
  std::vector<std::size_t> idx(grids.size(), 0);
  std::vector<double> point(grids.size());
  for (std::size_t n = 0; n < total; ++n) {
    for (std::size_t k = 0; k < grids.size(); ++k) point[k] = grids[k][idx[k]];
    visit(std::as_const(point));
    for (std::size_t k = grids.size(); k-- > 0;) {
      if (++idx[k] < grids[k].size()) break;
      idx[k] = 0;
    }
  }
}

json candidates_json(const std::vector<FiniteCandidate>& cands) {
  json arr = json::array();
  for (const auto& c : cands) arr.push_back({{"id", c.id}, {"risk", c.risk}, {"dist", c.dist}});
  return arr;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

RowOracle oracle_row_update(std::span<const double> w_row, const Matrix& g, std::size_t j,
                            double qhat_j) {
  const std::size_t d = g.rows();
  if (g.cols() != d || w_row.size() != d) throw InvalidArgument("oracle_row_update: shape mismatch");
  if (j >= d) throw InvalidArgument("oracle_row_update: index out of range");
  const double e = w_row[j] - qhat_j;
  RowOracle out;
  out.delta.assign(d, 0.0);
  out.delta[j] = -e;
  if (d > 1) {
    Matrix reduced(d - 1, d - 1);
    std::vector<double> rhs(d - 1);
    for (std::size_t a = 0, ra = 0; a < d; ++a) {
      if (a == j) continue;
      rhs[ra] = e * g(a, j);
      for (std::size_t b = 0, rb = 0; b < d; ++b) {
        if (b == j) continue;
        reduced(ra, rb) = g(a, b);
        ++rb;
      }
      ++ra;
    }
    const std::vector<double> sol = linalg::solve_spd(reduced, rhs, "reduced curvature");
    for (std::size_t a = 0, ra = 0; a < d; ++a) {
      if (a == j) continue;
      out.delta[a] = sol[ra++];
    }
  }
  out.objective = 0.5 * quad_form(g, out.delta);
  return out;
}

ExhaustiveResult exhaustive_quant_min(std::span<const double> w_row, const Matrix& g,
                                      const std::vector<std::vector<double>>& grids) {
  const std::size_t d = w_row.size();
  if (g.rows() != d || g.cols() != d || grids.size() != d) {
    throw InvalidArgument("exhaustive_quant_min: shape mismatch");
  }
  ExhaustiveResult best;
  bool have = false;
  std::vector<double> delta(d);
  for_each_point(grids, [&](const std::vector<double>& q) {
    for (std::size_t k = 0; k < d; ++k) delta[k] = q[k] - w_row[k];
    const double obj = 0.5 * quad_form(g, delta);
    if (!have || obj < best.best_objective) {
      best.best_objective = obj;
      best.best_delta = delta;
      have = true;
    }
  });
  return best;
}

std::vector<EnumeratedPoint> enumerate_points(std::span<const double> w_row, const Matrix& h,
                                              std::span<const double> saliency,
                                              const std::vector<std::vector<double>>& grids) {
  const std::size_t d = w_row.size();
  if (h.rows() != d || h.cols() != d || grids.size() != d || saliency.size() != d) {
    throw InvalidArgument("enumerate_points: shape mismatch");
  }
  std::vector<EnumeratedPoint> points;
  for_each_point(grids, [&](const std::vector<double>& q) {
    EnumeratedPoint p;
    p.delta.resize(d);
    for (std::size_t k = 0; k < d; ++k) {
      p.delta[k] = q[k] - w_row[k];
      p.sar += (saliency[k] * p.delta[k]) * (saliency[k] * p.delta[k]);
    }
    p.recon = quad_form(h, p.delta);
    points.push_back(std::move(p));
  });
  return points;
}

std::size_t scalarized_argmin(const std::vector<EnumeratedPoint>& points, double lambda) {
  if (points.empty()) throw InvalidArgument("scalarized_argmin: no points");
  std::size_t best = 0;
  double best_j = points[0].recon + lambda * points[0].sar;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double j = points[i].recon + lambda * points[i].sar;
    if (j < best_j) {
      best_j = j;
      best = i;
    }
  }
  return best;
}

std::vector<double> code_values(const quant::GroupParams& p, const quant::QuantScheme& scheme) {
  std::vector<double> out;
  for (std::int32_t c = scheme.code_min(); c <= scheme.code_max(); ++c) {
    out.push_back(quant::dequantize_value(c, p));
  }
  return out;
}

LambdaInterval lambda_interval(const std::vector<FiniteCandidate>& candidates,
                               const std::string& chosen, double r_sq) {
  const auto it = std::find_if(candidates.begin(), candidates.end(),
                               [&](const FiniteCandidate& c) { return c.id == chosen; });
  if (it == candidates.end()) throw PreconditionViolation("chosen candidate '" + chosen + "' not found");
  const FiniteCandidate& c = *it;
  if (c.dist > r_sq) {
    throw PreconditionViolation("chosen candidate '" + chosen + "' violates the drift constraint");
  }
  double lo = -kInfinity;
  double hi = kInfinity;
  for (const FiniteCandidate& o : candidates) {
    if (!std::isfinite(o.risk) || !std::isfinite(o.dist)) {
      throw InvalidArgument("candidate risk and dist must be finite");
    }
    if (o.dist <= r_sq && o.risk < c.risk) {
      throw PreconditionViolation("chosen candidate '" + chosen +
                                  "' is not a constrained minimizer (beaten by '" + o.id + "')");
    }
    if (o.dist > c.dist) {
      lo = std::max(lo, (c.risk - o.risk) / (o.dist - c.dist));
    } else if (o.dist < c.dist) {
      hi = std::min(hi, (o.risk - c.risk) / (c.dist - o.dist));
    }
  }
  LambdaInterval out;
  out.lambda_min = std::max(0.0, lo);
  out.lambda_max = hi;
  out.supported = out.lambda_min <= out.lambda_max;
  return out;
}

SupportednessReport verify_supportedness(const std::vector<FiniteCandidate>& candidates,
                                         const std::string& chosen, double r_sq,
                                         std::span<const double> probes, double tie_tol) {
  SupportednessReport rep;
  rep.interval = lambda_interval(candidates, chosen, r_sq);
  const auto chosen_it = std::find_if(candidates.begin(), candidates.end(),
                                      [&](const FiniteCandidate& c) { return c.id == chosen; });
  const LambdaInterval& iv = rep.interval;
  for (double lambda : probes) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
      throw InvalidArgument("probe lambdas must be finite and >= 0");
    }
    double min_j = kInfinity;
    for (const auto& o : candidates) min_j = std::min(min_j, o.risk + lambda * o.dist);
    const double jc = chosen_it->risk + lambda * chosen_it->dist;
    ProbeResult p;
    p.lambda = lambda;
    p.in_argmin = jc <= min_j + tie_tol * std::max(1.0, std::abs(min_j));
    const bool above = lambda >= iv.lambda_min - tie_tol * std::max(1.0, iv.lambda_min);
    const bool below = !std::isfinite(iv.lambda_max) ||
                       lambda <= iv.lambda_max + tie_tol * std::max(1.0, iv.lambda_max);
    p.in_interval = above && below;
    if (p.in_argmin != p.in_interval && rep.passed) {
      rep.passed = false;
      rep.counterexample = {{"lambda", lambda},
                            {"in_argmin", p.in_argmin},
                            {"in_interval", p.in_interval},
                            {"lambda_min", iv.lambda_min},
                            {"lambda_max", finite_or_null(iv.lambda_max)},
                            {"chosen", chosen},
                            {"r_sq", r_sq},
                            {"candidates", candidates_json(candidates)}};
    }
    rep.probes.push_back(p);
  }
  return rep;
}

double hoeffding_bound(double r, double m_x, std::size_t class_size, std::size_t n, double delta) {
  if (r < 0.0 || m_x <= 0.0 || class_size == 0 || n == 0 || !(delta > 0.0 && delta < 1.0)) {
    throw InvalidArgument("hoeffding_bound: invalid arguments");
  }
  const double log_term = std::log(2.0 * static_cast<double>(class_size) / delta);
  return r * r * m_x * m_x * std::sqrt(log_term / (2.0 * static_cast<double>(n)));
}

CoverageReport hoeffding_check(const HoeffdingParams& p, std::size_t jobs) {
  if (p.trials < 1000) throw InvalidArgument("hoeffding_check: trials must be >= 1000");
  if (p.d_in == 0 || p.heldout_factor == 0) throw InvalidArgument("hoeffding_check: invalid sizes");
  CoverageReport rep;
  rep.bound = hoeffding_bound(p.r, p.m_x, p.class_size, p.n, p.delta);
  rep.trials = p.trials;
  const std::size_t d = p.d_in;
  const std::size_t m = p.heldout_factor * p.n;

  std::vector<double> deviation(p.trials, 0.0);
  parallel_for(p.trials, jobs, [&](std::size_t t) {
    auto rng = make_rng(p.seed, Stream::Hoeffding, t);
    std::normal_distribution<double> nd(0.0, 1.0);
    // Each class member enters only through A = ΔWᵀΔW, loss = xᵀAx.
    std::vector<Matrix> forms;
    forms.reserve(p.class_size);
    for (std::size_t k = 0; k < p.class_size; ++k) {
      Matrix dw = random_gaussian(rng, d, d);
      const double norm = std::sqrt(linalg::frobenius_sq(dw));
      for (double& v : dw.data()) v = norm > 0.0 ? v * (p.r / norm) : 0.0;
      forms.push_back(linalg::matmul(dw.transpose(), dw));
    }
    const double coord_std = p.m_x / std::sqrt(static_cast<double>(d));
    std::vector<double> x(d);
    auto draw = [&] {
      double sq = 0.0;
      for (double& v : x) {
        v = coord_std * nd(rng);
        sq += v * v;
      }
      const double norm = std::sqrt(sq);
      if (norm > p.m_x) {
        for (double& v : x) v *= p.m_x / norm;
      }
    };
    std::vector<double> cal(p.class_size, 0.0);
    std::vector<double> truth(p.class_size, 0.0);
    auto accumulate = [&](std::vector<double>& acc) {
      for (std::size_t k = 0; k < p.class_size; ++k) acc[k] += quad_form(forms[k], x);
    };
    for (std::size_t i = 0; i < p.n; ++i) {
      draw();
      accumulate(cal);
    }
    for (std::size_t i = 0; i < m; ++i) {
      draw();
      accumulate(truth);
    }
    double dev = 0.0;
    for (std::size_t k = 0; k < p.class_size; ++k) {
      dev = std::max(dev, std::abs(cal[k] / static_cast<double>(p.n) -
                                   truth[k] / static_cast<double>(m)));
    }
    deviation[t] = dev;
  });

  for (double dev : deviation) {
    rep.max_deviation = std::max(rep.max_deviation, dev);
    if (dev > rep.bound) ++rep.violations;
  }
  rep.violation_rate = static_cast<double>(rep.violations) / static_cast<double>(p.trials);
  rep.threshold = p.delta + 3.0 * std::sqrt(p.delta * (1.0 - p.delta) / static_cast<double>(p.trials));
  rep.passed = rep.violation_rate <= rep.threshold;
  return rep;
}

quant::QuantizedLayer gptq_reference(const Matrix& w, const Matrix& g,
                                     const quant::QuantScheme& scheme, std::size_t block_size) {
  const std::size_t rows = w.rows();
  const std::size_t d = w.cols();
  if (g.rows() != d || g.cols() != d) throw InvalidArgument("gptq_reference: G must be d_in x d_in");
  if (block_size == 0) throw InvalidArgument("gptq_reference: block size must be >= 1");
  const linalg::TriangularFactor m = linalg::chol_upper_of_inverse(g, linalg::default_jitter(g));
  quant::ParamGrid grid = quant::fit_params(w, scheme);
  const std::size_t width = scheme.group_width(d);

  quant::QuantizedLayer out;
  out.scheme = scheme;
  out.codes = quant::IntMatrix(rows, d);
  out.dequantized = Matrix(rows, d);
  Matrix u = w;
  std::vector<double> e(rows);
  for (std::size_t i = 0; i < d; i += block_size) {
    const std::size_t i_end = std::min(i + block_size, d);
    Matrix err(rows, i_end - i);
    for (std::size_t j = i; j < i_end; ++j) {
      for (std::size_t r = 0; r < rows; ++r) {
        const quant::GroupParams p{grid.scales(r, j / width), grid.zero_points(r, j / width)};
        const std::int32_t code = quant::quantize_value(u(r, j), p, scheme);
        out.codes(r, j) = code;
        out.dequantized(r, j) = quant::dequantize_value(code, p);
        e[r] = (u(r, j) - out.dequantized(r, j)) / m(j, j);
        err(r, j - i) = e[r];
      }
      for (std::size_t k = j; k < i_end; ++k) {
        for (std::size_t r = 0; r < rows; ++r) u(r, k) -= e[r] * m(j, k);
      }
    }
    if (i_end < d) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = i_end; c < d; ++c) {
          double acc = 0.0;
          for (std::size_t k = 0; k < i_end - i; ++k) acc += err(r, k) * m(i + k, c);
          u(r, c) -= acc;
        }
      }
    }
  }
  out.scales = std::move(grid.scales);
  out.zero_points = std::move(grid.zero_points);
  return out;
}

// ---- suites ---------------------------------------------------------------

SuiteReport run_compensation_suite(const SuiteOptions& opts) {
  SuiteReport rep;
  rep.name = "compensation";
  rep.trials = opts.trials == 0 ? 500 : opts.trials;
  constexpr double kTol = 1e-9;

  struct Outcome {
    double closed_delta_err = 0.0;
    double closed_obj_rel = 0.0;
    double factor_delta_err = 0.0;
    double factor_obj_rel = 0.0;
    json instance;
  };
  std::vector<Outcome> outcomes(rep.trials);
  parallel_for(rep.trials, opts.jobs, [&](std::size_t t) {
    auto rng = make_rng(opts.seed, Stream::Compensation, t);
    const std::size_t d = uniform_index(rng, 2, 8);
    const Matrix a = random_gaussian(rng, d, d + 2);
    Matrix g = linalg::matmul(a, a.transpose());
    for (std::size_t i = 0; i < d; ++i) g(i, i) += 0.1;
    const std::size_t j = uniform_index(rng, 0, d - 1);
    const Matrix wm = random_gaussian(rng, 1, d);
    const std::vector<double> w(wm.data());
    const double e = std::normal_distribution<double>(0.0, 1.0)(rng);

    Outcome& o = outcomes[t];
    const RowOracle oracle = oracle_row_update(w, g, j, w[j] - e);
    const Matrix g_inv = linalg::inverse_spd(g, linalg::default_jitter(g));
    gbs::RowUpdate cf = gbs::closed_form_update(g_inv, j, e);
    if (opts.flip_compensation_sign) {
      for (double& v : cf.delta) v = -v;
    }
    o.closed_delta_err = max_abs_diff(oracle.delta, cf.delta);
    o.closed_obj_rel = rel_diff(oracle.objective, cf.objective);

    // Factor route used by the solver: a step at column j must equal the
    // oracle on the not-yet-committed coordinates j..d-1.
    quant::QuantScheme scheme;
    scheme.bits = 3;
    scheme.mode = quant::Mode::Symmetric;
    scheme.granularity = quant::Granularity::PerChannel;
    const quant::GroupParams params = quant::fit_group(w, scheme);
    const linalg::TriangularFactor m = linalg::chol_upper_of_inverse(g, linalg::default_jitter(g));
    const auto steps = gbs::trace_row(w, m, std::span(&params, 1), scheme);
    const auto& step = steps[j];
    const Matrix tail = g.block(j, j, d - j, d - j);
    std::vector<double> tail_row(d - j, 0.0);
    tail_row[0] = step.residual;
    const RowOracle tail_oracle = oracle_row_update(tail_row, tail, 0, 0.0);
    o.factor_delta_err = max_abs_diff(tail_oracle.delta, step.update);
    const double mjj = m(j, j);
    o.factor_obj_rel = rel_diff(tail_oracle.objective,
                                step.residual * step.residual / (2.0 * mjj * mjj));
    o.instance = {{"trial", t}, {"d", d}, {"j", j}, {"e", e}, {"G", g.data()}, {"w", w}};
  });

  double worst[4] = {0, 0, 0, 0};
  rep.passed = true;
  for (const Outcome& o : outcomes) {
    worst[0] = std::max(worst[0], o.closed_delta_err);
    worst[1] = std::max(worst[1], o.closed_obj_rel);
    worst[2] = std::max(worst[2], o.factor_delta_err);
    worst[3] = std::max(worst[3], o.factor_obj_rel);
    const bool ok = o.closed_delta_err <= kTol && o.closed_obj_rel <= kTol &&
                    o.factor_delta_err <= kTol && o.factor_obj_rel <= kTol;
    if (!ok && rep.passed) {
      rep.passed = false;
      rep.counterexample = o.instance;
      rep.counterexample["closed_form_delta_error"] = o.closed_delta_err;
      rep.counterexample["closed_form_objective_rel_error"] = o.closed_obj_rel;
      rep.counterexample["factor_delta_error"] = o.factor_delta_err;
      rep.counterexample["factor_objective_rel_error"] = o.factor_obj_rel;
    }
  }
  rep.detail = {{"tolerance", kTol},
                {"max_closed_form_delta_error", worst[0]},
                {"max_closed_form_objective_rel_error", worst[1]},
                {"max_factor_delta_error", worst[2]},
                {"max_factor_objective_rel_error", worst[3]}};
  return rep;
}

SuiteReport run_supportedness_suite(const SuiteOptions& opts) {
  SuiteReport rep;
  rep.name = "supportedness";
  rep.trials = opts.trials == 0 ? 1000 : opts.trials;
  rep.passed = true;
  auto fail = [&](json ce) {
    if (rep.passed) {
      rep.passed = false;
      rep.counterexample = std::move(ce);
    }
  };

  // Worked instance: λ_min = 0.1, λ_max = 1/3.
  {
    const std::vector<FiniteCandidate> q{{"A", 1.0, 4.0}, {"B", 0.5, 9.0}, {"C", 2.0, 1.0}};
    const std::vector<double> probes{0.05, 0.1, 0.2, 1.0 / 3.0, 0.5};
    const std::vector<bool> expected{false, true, true, true, false};
    const auto r = verify_supportedness(q, "A", 4.0, probes);
    bool ok = r.passed && std::abs(r.interval.lambda_min - 0.1) <= 1e-15 &&
              std::abs(r.interval.lambda_max - 1.0 / 3.0) <= 1e-15 && r.interval.supported;
    for (std::size_t i = 0; i < probes.size(); ++i) ok = ok && r.probes[i].in_argmin == expected[i];
    if (!ok) fail({{"instance", "worked example"}, {"candidates", candidates_json(q)}});
  }
  // Unsupported: A lies above the segment joining B and C.
  {
    const std::vector<FiniteCandidate> q{{"A", 2.0, 4.0}, {"B", 0.0, 10.0}, {"C", 3.0, 0.0}};
    const std::vector<double> probes{0.0, 0.1, 0.25, 0.3, 1.0 / 3.0, 0.5, 1.0};
    const auto r = verify_supportedness(q, "A", 5.0, probes);
    bool ok = r.passed && !r.interval.supported;
    for (const auto& p : r.probes) ok = ok && !p.in_argmin;
    if (!ok) fail({{"instance", "unsupported example"}, {"candidates", candidates_json(q)}});
  }

  std::size_t supported = 0;
  std::size_t unsupported = 0;
  std::size_t integer_instances = 0;
  const std::size_t max_iters = 50 * rep.trials;
  std::size_t iter = 0;
  for (; iter < max_iters && supported < rep.trials; ++iter) {
    auto rng = make_rng(opts.seed, Stream::Supportedness, iter);
    const bool integer = iter % 2 == 0;
    const std::size_t k = uniform_index(rng, 1, 16);
    std::vector<FiniteCandidate> q;
    for (std::size_t i = 0; i < k; ++i) {
      FiniteCandidate c;
      c.id = "q" + std::to_string(i);
      if (integer) {
        c.risk = static_cast<double>(uniform_index(rng, 0, 20));
        c.dist = static_cast<double>(uniform_index(rng, 0, 20));
      } else {
        c.risk = std::uniform_real_distribution<double>(0.0, 10.0)(rng);
        c.dist = std::uniform_real_distribution<double>(0.0, 10.0)(rng);
      }
      q.push_back(c);
    }
    const double r_sq = q[uniform_index(rng, 0, k - 1)].dist;
    std::size_t chosen = k;
    for (std::size_t i = 0; i < k; ++i) {
      if (q[i].dist <= r_sq && (chosen == k || q[i].risk < q[chosen].risk)) chosen = i;
    }
    const LambdaInterval iv = lambda_interval(q, q[chosen].id, r_sq);
    std::vector<double> probes;
    double tol = 1e-12;
    if (integer) {
      // Dyadic probes keep every J value exact.
      for (int i = 0; i <= 96; ++i) probes.push_back(i / 16.0);
      tol = 0.0;
      ++integer_instances;
    } else {
      probes = {0.0, iv.lambda_min, iv.lambda_min * 0.9, iv.lambda_min * 1.1 + 1e-3};
      if (std::isfinite(iv.lambda_max)) {
        probes.push_back(iv.lambda_max);
        probes.push_back(iv.lambda_max * 0.9);
        probes.push_back(iv.lambda_max * 1.1 + 1e-3);
        if (iv.supported) probes.push_back(0.5 * (iv.lambda_min + iv.lambda_max));
      }
      std::uniform_real_distribution<double> ud(0.0, 3.0);
      for (int i = 0; i < 8; ++i) probes.push_back(ud(rng));
    }
    const auto r = verify_supportedness(q, q[chosen].id, r_sq, probes, tol);
    if (r.interval.supported) {
      ++supported;
    } else {
      ++unsupported;
      for (const auto& p : r.probes) {
        if (p.in_argmin && tol == 0.0) {
          fail({{"instance", iter}, {"reason", "unsupported minimizer recovered"},
                {"candidates", candidates_json(q)}});
        }
      }
    }
    if (!r.passed) {
      json ce = r.counterexample;
      ce["instance"] = iter;
      fail(std::move(ce));
    }
  }
  if (supported < rep.trials) {
    fail({{"reason", "could not generate enough supported instances"}, {"supported", supported}});
  }
  rep.detail = {{"supported_instances", supported},
                {"unsupported_instances", unsupported},
                {"integer_instances", integer_instances},
                {"generated", iter}};
  return rep;
}

SuiteReport run_hoeffding_suite(const SuiteOptions& opts) {
  SuiteReport rep;
  rep.name = "hoeffding";
  HoeffdingParams p;
  p.trials = opts.trials == 0 ? 2000 : opts.trials;
  p.seed = opts.seed;
  rep.trials = p.trials;
  const CoverageReport c = hoeffding_check(p, opts.jobs);
  rep.passed = c.passed;
  rep.detail = {{"bound", c.bound},
                {"violations", c.violations},
                {"violation_rate", c.violation_rate},
                {"threshold", c.threshold},
                {"max_deviation", c.max_deviation},
                {"d_in", p.d_in},
                {"R", p.r},
                {"M_X", p.m_x},
                {"n", p.n},
                {"delta", p.delta},
                {"class_size", p.class_size}};
  if (!c.passed) rep.counterexample = rep.detail;
  return rep;
}

SuiteReport run_gptq_equiv_suite(const SuiteOptions& opts) {
  SuiteReport rep;
  rep.name = "gptq-equiv";
  rep.trials = opts.trials == 0 ? 100 : opts.trials;
  std::vector<json> failures(rep.trials);
  parallel_for(rep.trials, opts.jobs, [&](std::size_t t) {
    auto rng = make_rng(opts.seed, Stream::GptqEquiv, t);
    const std::size_t d_in = uniform_index(rng, 4, 64);
    const std::size_t d_out = uniform_index(rng, 2, 16);
    constexpr std::size_t n = 256;
    Matrix w = random_gaussian(rng, d_out, d_in);
    for (std::size_t c = 0; c < d_in; c += 7) {
      for (std::size_t r = 0; r < d_out; ++r) w(r, c) *= 5.0;
    }
    Matrix x = random_gaussian(rng, d_in, n);
    std::lognormal_distribution<double> ln(0.0, 0.5);
    for (std::size_t r = 0; r < d_in; ++r) {
      const double s = ln(rng);
      for (double& v : x.row(r)) v *= s;
    }
    quant::QuantScheme scheme;
    scheme.bits = uniform_index(rng, 0, 1) == 0 ? 3 : 4;
    scheme.mode = uniform_index(rng, 0, 1) == 0 ? quant::Mode::Symmetric : quant::Mode::Asymmetric;
    const std::size_t gsel = uniform_index(rng, 0, 3);
    if (gsel == 3) {
      scheme.granularity = quant::Granularity::PerChannel;
    } else {
      scheme.group_size = std::size_t{8} << gsel;
    }
    const std::size_t blocks[] = {1, 4, 16, 128};
    const std::size_t block = blocks[uniform_index(rng, 0, 3)];

    const auto curv = gbs::build_curvature(x, saliency::SaliencyProfile::identity(d_in), 0.0);
    const auto solver = gbs::run_gbs(w, curv, scheme, block);
    const auto reference = gptq_reference(w, linalg::gram(x), scheme, block);
    const bool same = solver.codes == reference.codes && solver.scales == reference.scales &&
                      solver.zero_points == reference.zero_points &&
                      solver.dequantized == reference.dequantized;
    if (!same) {
      failures[t] = {{"trial", t}, {"d_in", d_in}, {"d_out", d_out}, {"block", block},
                     {"bits", scheme.bits}};
    }
  });
  rep.passed = true;
  std::size_t mismatches = 0;
  for (auto& f : failures) {
    if (f.is_null()) continue;
    ++mismatches;
    if (rep.passed) {
      rep.passed = false;
      rep.counterexample = f;
    }
  }
  rep.detail = {{"layers", rep.trials}, {"mismatches", mismatches}, {"n", 256}};
  return rep;
}

SuiteReport run_scalarization_suite(const SuiteOptions& opts) {
  SuiteReport rep;
  rep.name = "scalarization";
  rep.trials = opts.trials == 0 ? 200 : opts.trials;
  std::vector<json> failures(rep.trials);
  parallel_for(rep.trials, opts.jobs, [&](std::size_t t) {
    auto rng = make_rng(opts.seed, Stream::Scalarization, t);

    // Grid-search solver over its fixed α candidate set.
    {
      Matrix w = random_gaussian(rng, 8, 16);
      for (std::size_t r = 0; r < 8; ++r) w(r, uniform_index(rng, 0, 15)) *= 8.0;
      Matrix x = random_gaussian(rng, 16, 64);
      for (std::size_t r = 0; r < 16; ++r) {
        const double s = std::exp(std::normal_distribution<double>(0.0, 1.0)(rng));
        for (double& v : x.row(r)) v *= s;
      }
      gs::GsConfig cfg;
      cfg.scheme.bits = 3;
      cfg.scheme.group_size = 8;
      double prev_r = -kInfinity;
      double prev_s = kInfinity;
      for (int k = 0; k <= 20; ++k) {
        cfg.lambda = k * 0.25;
        const gs::GsResult res = gs::run_gs(w, x, cfg);
        const double rn = res.recon_n[res.selected_index];
        const double sn = res.sar_n[res.selected_index];
        if (rn < prev_r || sn > prev_s) {
          failures[t] = {{"trial", t}, {"solver", "gs"}, {"lambda", cfg.lambda}};
          return;
        }
        prev_r = rn;
        prev_s = sn;
      }
    }
    // Exhaustive minimizer of recon + λ·sar on a tiny row.
    {
      const std::size_t d = uniform_index(rng, 1, 4);
      const Matrix x = random_gaussian(rng, d, 8);
      const Matrix h = linalg::gram(x);
      const Matrix wm = random_gaussian(rng, 1, d);
      std::vector<double> sal(d);
      for (double& s : sal) s = std::exp(std::normal_distribution<double>(0.0, 0.5)(rng));
      quant::QuantScheme scheme;
      scheme.bits = 3;
      scheme.granularity = quant::Granularity::PerChannel;
      const auto params = quant::fit_group(wm.data(), scheme);
      const std::vector<std::vector<double>> grids(d, code_values(params, scheme));
      const auto points = enumerate_points(wm.data(), h, sal, grids);
      double prev_r = -kInfinity;
      double prev_s = kInfinity;
      for (int k = 0; k <= 40; ++k) {
        const double lambda = k * 0.25;
        const auto& p = points[scalarized_argmin(points, lambda)];
        if (p.recon < prev_r || p.sar > prev_s) {
          failures[t] = {{"trial", t}, {"solver", "exhaustive"}, {"lambda", lambda}};
          return;
        }
        prev_r = p.recon;
        prev_s = p.sar;
      }
    }
  });
  rep.passed = true;
  for (auto& f : failures) {
    if (!f.is_null() && rep.passed) {
      rep.passed = false;
      rep.counterexample = f;
    }
  }
  rep.detail = {{"instances", rep.trials}};
  return rep;
}

}  // namespace sarqc::oracle
