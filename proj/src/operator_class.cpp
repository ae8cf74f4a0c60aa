#include "gconv/operator_class.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace gconv {

ClassParams::ClassParams(double alpha_, double beta_, double p_) : alpha(alpha_), beta(beta_), p(p_) {
  if (!(alpha > 0.0) || !(beta > 0.0)) throw ConfigError("class constants must be positive");
  if (alpha > beta) throw ConfigError("class constants must satisfy alpha <= beta");
  if (!(p >= 2.0) || !std::isfinite(p)) throw ConfigError("growth exponent p must be finite and >= 2");
}

double ClassParams::beta_prime() const {
  const double q = 1.0 / (p - 1.0);
  return std::pow(std::pow(beta, p) / alpha, q) *
         std::max(1.0, std::pow(alpha, -(p - 2.0) * q));
}

double beta_prime(const ClassParams& params) { return params.beta_prime(); }

namespace {

double frac(double v) { return v - std::floor(v); }

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

Weight constant_weight(double c) {
  if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError("constant weight must be positive");
  return Weight{[c](const Point&) { return c; }, c, c, true, "constant:" + format_double(c)};
}

Weight sine_weight(double mean, double amplitude) {
  const double lo = mean - std::abs(amplitude);
  const double hi = mean + std::abs(amplitude);
  if (!(lo > 0.0) || !std::isfinite(hi)) {
    throw ConfigError("sine weight must stay positive: need mean > |amplitude|");
  }
  return Weight{[mean, amplitude](const Point& y) {
                  return mean + amplitude * std::sin(2.0 * std::numbers::pi * y[0]);
                },
                lo, hi, true, "sine:" + format_double(mean) + "," + format_double(amplitude)};
}

Weight two_phase_weight(double w1, double w2) {
  if (!(w1 > 0.0) || !(w2 > 0.0) || !std::isfinite(w1) || !std::isfinite(w2)) {
    throw ConfigError("two-phase weights must be positive");
  }
  return Weight{[w1, w2](const Point& y) { return frac(y[0]) < 0.5 ? w1 : w2; },
                std::min(w1, w2), std::max(w1, w2), true,
                "two_phase:" + format_double(w1) + "," + format_double(w2)};
}

Weight table_weight(std::vector<double> values) {
  if (values.empty()) throw ConfigError("custom table weight needs at least one value");
  for (double v : values) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("custom table entries must be positive");
  }
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  std::string desc = "table:";
  for (std::size_t i = 0; i < values.size(); ++i) {
    desc += (i ? "," : "") + format_double(values[i]);
  }
  Weight w{nullptr, *lo, *hi, true, desc};
  w.fn = [values = std::move(values)](const Point& y) {
    const auto k = values.size();
    auto idx = static_cast<std::size_t>(std::floor(frac(y[0]) * static_cast<double>(k)));
    return values[std::min(idx, k - 1)];
  };
  return w;
}

MonotoneMap::MonotoneMap(ClassParams params, bool time_dependent, EvalFn eval, bool periodic,
                         std::string description)
    : params_(params),
      time_dependent_(time_dependent),
      eval_(std::move(eval)),
      periodic_(periodic),
      description_(std::move(description)) {
  if (!eval_) throw ConfigError("monotone map needs an evaluation function");
}

MonotoneMap MonotoneMap::with_p_laplacian(PLaplacian info) const {
  MonotoneMap copy = *this;
  copy.p_laplacian_ = std::move(info);
  return copy;
}

MonotoneMap make_p_laplacian(double p, const Weight& weight, bool time_dependent) {
  if (!(weight.min > 0.0) || weight.min > weight.max || !std::isfinite(weight.max)) {
    throw ConfigError("p-Laplacian weight bounds must satisfy 0 < w_min <= w_max < inf");
  }
  if (!(p >= 2.0)) throw ConfigError("p-Laplacian needs p >= 2");
  const ClassParams params(weight.min * std::pow(2.0, 2.0 - p), (p - 1.0) * weight.max, p);
  auto w = weight.fn;
  MonotoneMap::EvalFn eval;
  if (p == 2.0) {
    eval = [w](const Point& x, double, const Vec& xi) -> Vec { return w(x) * xi; };
  } else {
    eval = [w, p](const Point& x, double, const Vec& xi) -> Vec {
      const double r = xi.norm();
      if (r == 0.0) return Vec::Zero(xi.size());
      return (w(x) * std::pow(r, p - 2.0)) * xi;
    };
  }
  MonotoneMap map(params, time_dependent, std::move(eval), weight.periodic,
                  "p_laplacian(p=" + format_double(p) + ", w=" + weight.description + ")");
  return map.with_p_laplacian({p, weight, 1});
}

MonotoneMap make_oscillating(const MonotoneMap& base, int h) {
  if (h <= 0) throw ConfigError("oscillation parameter h must be a positive integer");
  if (!base.periodic()) {
    throw ConfigError("make_oscillating: base map is not declared 1-periodic");
  }
  const double hd = static_cast<double>(h);
  MonotoneMap map(
      base.params(), base.time_dependent(),
      [base, hd](const Point& x, double t, const Vec& xi) -> Vec {
        Point y(x.size());
        for (Eigen::Index d = 0; d < x.size(); ++d) y[d] = frac(hd * x[d]);
        return base(y, t, xi);
      },
      true, base.description() + " oscillating h=" + std::to_string(h));
  if (const auto& info = base.p_laplacian()) {
    auto next = *info;
    next.oscillation = info->oscillation * h;
    return map.with_p_laplacian(next);
  }
  return map;
}

MonotoneMap make_shifted(const MonotoneMap& base, double shift) {
  return MonotoneMap(
      base.params(), base.time_dependent(),
      [base, shift](const Point& x, double t, const Vec& xi) -> Vec {
        Vec out = base(x, t, xi);
        out.array() += shift;
        return out;
      },
      base.periodic(), base.description() + " shifted by " + format_double(shift));
}

const char* condition_name(Condition c) {
  switch (c) {
    case Condition::zero: return "i";
    case Condition::monotone: return "ii";
    case Condition::continuity: return "iii";
    case Condition::holder: return "iii_prime";
  }
  return "?";
}

bool StructureReport::all_passed() const {
  return std::all_of(conditions.begin(), conditions.end(),
                     [](const ConditionResult& c) { return c.passed; });
}

namespace {

bool all_finite(const Vec& v) { return v.allFinite(); }

// Tracks the worst normalized margin of one condition.
struct Tracker {
  ConditionResult result;
  double worst_normalized = std::numeric_limits<double>::infinity();

  void record(double margin, double scale, double tol, const Point& x, double t, const Vec& xi,
              const Vec& eta) {
    const double normalized = std::isfinite(margin) ? margin / std::max(1.0, scale)
                                                    : -std::numeric_limits<double>::infinity();
    if (!(normalized >= -tol)) result.passed = false;
    if (normalized < worst_normalized || !result.worst) {
      worst_normalized = normalized;
      result.worst = Witness{x, t, xi, eta, margin};
    }
  }
};

}  // namespace

StructureReport verify_structure(const MonotoneMap& a, const Box& box, int m,
                                 const StructureOptions& options) {
  if (options.n_pairs < 1) throw ContractViolation("verify_structure: n_pairs must be >= 1");
  if (m < 1 || m > kMaxDim) throw ContractViolation("verify_structure: bad field count m");
  const auto& prm = a.params();
  const double p = prm.p;
  const double beta_p = prm.beta_prime();

  Rng rng(options.seed);
  std::uniform_real_distribution<double> time_dist(0.0, options.final_time);
  std::array<Tracker, 4> track;
  double alpha_emp = std::numeric_limits<double>::infinity();
  double beta_emp = 0.0;
  const Vec zero = Vec::Zero(m);

  for (int k = 0; k < options.n_pairs; ++k) {
    const Point x = sample_in_box(rng, box);
    const double t = time_dist(rng);
    const Vec xi = sample_in_ball(rng, m, options.radius);
    const Vec eta = sample_in_ball(rng, m, options.radius);

    const Vec a0 = a(x, t, zero);
    const double a0_norm = all_finite(a0) ? a0.norm() : std::numeric_limits<double>::quiet_NaN();
    track[0].record(-a0_norm, 1.0, options.tol, x, t, zero, zero);

    const Vec axi = a(x, t, xi);
    const Vec aeta = a(x, t, eta);
    if (!all_finite(axi) || !all_finite(aeta)) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      for (int c = 1; c < 4; ++c) track[c].record(nan, 1.0, options.tol, x, t, xi, eta);
      continue;
    }
    const Vec da = axi - aeta;
    const Vec dxi = xi - eta;
    const double dist = dxi.norm();
    const double growth = 1.0 + std::pow(xi.norm(), p) + std::pow(eta.norm(), p);

    const double mono_lhs = da.dot(dxi);
    const double mono_rhs = prm.alpha * std::pow(dist, p);
    track[1].record(mono_lhs - mono_rhs, std::max(std::abs(mono_lhs), mono_rhs), options.tol, x, t,
                    xi, eta);

    const double cont_rhs = prm.beta * std::pow(growth, (p - 2.0) / p) * dist;
    track[2].record(cont_rhs - da.norm(), cont_rhs, options.tol, x, t, xi, eta);

    const double hold_rhs =
        beta_p * std::pow(growth, (p - 2.0) / (p - 1.0)) * std::pow(dist, 1.0 / (p - 1.0));
    track[3].record(hold_rhs - da.norm(), hold_rhs, options.tol, x, t, xi, eta);

    if (dist >= 1e-10) {
      alpha_emp = std::min(alpha_emp, mono_lhs / std::pow(dist, p));
      beta_emp = std::max(beta_emp, da.norm() / (std::pow(growth, (p - 2.0) / p) * dist));
    }
  }

  StructureReport report;
  for (int c = 0; c < 4; ++c) report.conditions[c] = track[c].result;
  report.empirical_alpha = std::isfinite(alpha_emp) ? alpha_emp : 0.0;
  report.empirical_beta = beta_emp;
  return report;
}

}  // namespace gconv
