#include "mollify/oracle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <string>

#include "mollify/error.hpp"

namespace mollify {

namespace {

// 15-point Kronrod abscissae and weights with the embedded 7-point Gauss
// rule (QUADPACK qk15).
constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double a, b, value, error;
  bool operator<(const Panel& o) const { return error < o.error; }
};

Panel gauss_kronrod(const std::function<double(double)>& fn, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = fn(center);
  double kronrod = fc * kWgk[7];
  double gauss = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kXgk[j];
    const double sum = fn(center - dx) + fn(center + dx);
    kronrod += kWgk[j] * sum;
    if (j % 2 == 1) gauss += kWg[j / 2] * sum;
  }
  return {a, b, kronrod * half, std::abs((kronrod - gauss) * half)};
}

std::vector<double> sorted_unique(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

// Keeps points strictly inside (lo, hi) and adds the limits.
std::vector<double> clip_breaks(std::vector<double> pts, double lo, double hi) {
  std::vector<double> out{lo, hi};
  for (double p : pts) {
    if (p > lo && p < hi) out.push_back(p);
  }
  return sorted_unique(std::move(out));
}

}  // namespace

QuadratureResult integrate(const std::function<double(double)>& fn,
                           std::span<const double> breakpoints, const QuadratureOptions& opts) {
  if (breakpoints.size() < 2) throw ConfigInvalid("integrate needs at least two breakpoints");
  std::priority_queue<Panel> active;
  std::vector<Panel> frozen;  // too narrow to split further
  std::size_t evals = 0;
  double total_value = 0.0;
  double total_error = 0.0;
  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
    if (!(breakpoints[i] < breakpoints[i + 1])) {
      if (breakpoints[i] == breakpoints[i + 1]) continue;
      throw ConfigInvalid("integrate breakpoints must be sorted");
    }
    Panel p = gauss_kronrod(fn, breakpoints[i], breakpoints[i + 1]);
    evals += 15;
    total_value += p.value;
    total_error += p.error;
    active.push(p);
  }
  auto target = [&] { return std::max(opts.abs_tol, opts.rel_tol * std::abs(total_value)); };
  while (!(total_error <= target()) && !active.empty()) {
    if (evals >= opts.max_evaluations) {
      throw ConvergenceFailure("quadrature did not reach tolerance " + std::to_string(target()) +
                               " within " + std::to_string(opts.max_evaluations) +
                               " evaluations (error estimate " + std::to_string(total_error) + ")");
    }
    const Panel p = active.top();
    active.pop();
    const double mid = 0.5 * (p.a + p.b);
    if (!(mid > p.a && mid < p.b) || (p.b - p.a) < 1e-14 * std::max(1.0, std::abs(mid))) {
      frozen.push_back(p);
      continue;
    }
    const Panel left = gauss_kronrod(fn, p.a, mid);
    const Panel right = gauss_kronrod(fn, mid, p.b);
    evals += 30;
    total_value += left.value + right.value - p.value;
    total_error += left.error + right.error - p.error;
    active.push(left);
    active.push(right);
  }
  if (!(total_error <= target())) {
    throw ConvergenceFailure("quadrature stalled at error estimate " + std::to_string(total_error));
  }
  // Re-sum in interval order so the result does not carry update round-off.
  std::vector<Panel> all = std::move(frozen);
  while (!active.empty()) {
    all.push_back(active.top());
    active.pop();
  }
  std::sort(all.begin(), all.end(), [](const Panel& x, const Panel& y) { return x.a < y.a; });
  QuadratureResult r;
  for (const Panel& p : all) {
    r.value += p.value;
    r.error_estimate += p.error;
  }
  r.evaluations = evals;
  return r;
}

QuadratureResult integrate_2d(const std::function<double(double, double)>& fn,
                              std::span<const double> x_breaks, std::span<const double> y_breaks,
                              const QuadratureOptions& opts) {
  std::size_t evals = 0;
  double inner_error = 0.0;
  QuadratureOptions inner_opts = opts;
  inner_opts.abs_tol = opts.abs_tol * 0.1;
  const double x_len = x_breaks.back() - x_breaks.front();
  // max_evaluations bounds the total over all inner integrals.
  auto inner = [&](double x) {
    if (evals >= opts.max_evaluations) {
      throw ConvergenceFailure("2-D quadrature exceeded " + std::to_string(opts.max_evaluations) +
                               " evaluations");
    }
    inner_opts.max_evaluations = opts.max_evaluations - evals;
    const QuadratureResult r =
        integrate([&](double y) { return fn(x, y); }, y_breaks, inner_opts);
    evals += r.evaluations;
    inner_error = std::max(inner_error, r.error_estimate);
    return r.value;
  };
  QuadratureResult outer = integrate(inner, x_breaks, opts);
  outer.evaluations = evals;
  outer.error_estimate += inner_error * x_len;
  return outer;
}

double truncation_radius(const KernelSpec& k) { return 1.1 * k.inv_cdf(1.0 - 1e-12); }

std::vector<double> kernel_panels(const KernelSpec& k) {
  const double t = truncation_radius(k);
  std::vector<double> pts{-t, 0.0, t};
  for (double s = k.epsilon(); s < t; s *= 10.0) {
    pts.push_back(s);
    pts.push_back(-s);
  }
  if (k.kind() == KernelKind::rect) {
    pts.push_back(k.epsilon());
    pts.push_back(-k.epsilon());
  }
  return clip_breaks(std::move(pts), -t, t);
}

PiecewiseFunction toy_piecewise() {
  return {toy_eval, toy_derivative,
          std::vector<double>(kToyBreakpoints.begin(), kToyBreakpoints.end()),
          std::vector<JumpDiscontinuity>(kToyJumps.begin(), kToyJumps.end())};
}

QuadratureResult mollify_quadrature(const PiecewiseFunction& f, const KernelSpec& k, double x,
                                    bool derivative, const QuadratureOptions& opts) {
  const double t = truncation_radius(k);
  std::vector<double> pts = kernel_panels(k);
  for (double c : f.kinks) pts.push_back(x - c);
  for (const auto& j : f.jumps) pts.push_back(x - j.at);
  const auto breaks = clip_breaks(std::move(pts), -t, t);
  const auto& g = derivative ? f.derivative : f.value;
  return integrate([&](double s) { return g(x - s) * k.pdf(s); }, breaks, opts);
}

QuadratureResult mollify_quadrature_swapped(const PiecewiseFunction& f, const KernelSpec& k,
                                            double x, const QuadratureOptions& opts) {
  const double t = truncation_radius(k);
  std::vector<double> pts;
  for (double p : kernel_panels(k)) pts.push_back(x - p);
  for (double c : f.kinks) pts.push_back(c);
  for (const auto& j : f.jumps) pts.push_back(j.at);
  const auto breaks = clip_breaks(std::move(pts), x - t, x + t);
  return integrate([&](double s) { return f.value(s) * k.pdf(x - s); }, breaks, opts);
}

double mollified_derivative(const PiecewiseFunction& f, const KernelSpec& k, double x,
                            const QuadratureOptions& opts) {
  double d = mollify_quadrature(f, k, x, true, opts).value;
  for (const auto& j : f.jumps) d += j.size * k.pdf(x - j.at);
  return d;
}

Vector mollified_gradient_quadrature(const DifferentiableFunction& f, std::span<const double> x0,
                                     const KernelSpec& k, const QuadratureOptions& opts,
                                     std::span<const double> kinks) {
  if (x0.size() != f.input_dim()) throw DimensionError("x0 does not match the function");
  const double t = truncation_radius(k);
  if (x0.size() == 1) {
    std::vector<double> pts = kernel_panels(k);
    for (double c : kinks) pts.push_back(x0[0] - c);
    const auto breaks = clip_breaks(std::move(pts), -t, t);
    const double v = integrate(
        [&](double s) {
          const double x = x0[0] - s;
          return f.grad_input(std::span<const double>(&x, 1))[0] * k.pdf(s);
        },
        breaks, opts).value;
    return {v};
  }
  if (x0.size() == 2) {
    const auto breaks = kernel_panels(k);
    Vector out(2);
    for (std::size_t comp = 0; comp < 2; ++comp) {
      out[comp] = integrate_2d(
                      [&](double s1, double s2) {
                        const std::array<double, 2> x{x0[0] - s1, x0[1] - s2};
                        return f.grad_input(x)[comp] * k.pdf(s1) * k.pdf(s2);
                      },
                      breaks, breaks, opts)
                      .value;
    }
    return out;
  }
  throw DimensionError("quadrature reference supports 1-D and 2-D inputs only");
}

LemmaReport lemma_checks() {
  const PiecewiseFunction f = toy_piecewise();
  LemmaReport rep;
  rep.epsilon = 0.3;
  const KernelSpec k(KernelKind::gaussian, rep.epsilon);
  QuadratureOptions opts;
  opts.abs_tol = 1e-13;
  constexpr double h = 1e-4;
  for (double x : {0.5, 2.0, 3.5}) {
    LemmaCase c;
    c.x = x;
    const double direct = mollify_quadrature(f, k, x, false, opts).value;
    const double swapped = mollify_quadrature_swapped(f, k, x, opts).value;
    c.commutativity = std::abs(direct - swapped);
    const double fd = (mollify_quadrature(f, k, x + h, false, opts).value -
                       mollify_quadrature(f, k, x - h, false, opts).value) /
                      (2.0 * h);
    c.derivative_interchange = std::abs(fd - mollified_derivative(f, k, x, opts));
    rep.commutativity_max = std::max(rep.commutativity_max, c.commutativity);
    rep.derivative_interchange_max =
        std::max(rep.derivative_interchange_max, c.derivative_interchange);
    rep.cases.push_back(c);
  }
  rep.dirac_epsilon = 1e-3;
  const KernelSpec narrow(KernelKind::gaussian, rep.dirac_epsilon);
  rep.dirac_limit = std::abs(mollify_quadrature(f, narrow, 2.0, false, opts).value - toy_eval(2.0));
  rep.dirac_derivative_limit =
      std::abs(mollify_quadrature(f, narrow, 2.0, true, opts).value - toy_derivative(2.0));
  return rep;
}

}  // namespace mollify
