#include "slidesearch/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include "slidesearch/seed.hpp"

namespace slidesearch::stats {

namespace {

// Continued fraction for I_x(a, b), modified Lentz.
double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

// Two-sided tail P(|T| >= |t|).
double two_sided_tail(double t, double df) {
  if (std::isinf(t)) return 0.0;
  const double x = df / (df + t * t);
  return incomplete_beta(df / 2.0, 0.5, x);
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
  if (std::isnan(t)) return std::nan("");
  const double tail = 0.5 * two_sided_tail(t, df);
  return t > 0.0 ? 1.0 - tail : tail;
}

double student_t_quantile(double p, double df) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("student_t_quantile: p must be in (0, 1)");
  }
  if (p == 0.5) return 0.0;
  if (p < 0.5) return -student_t_quantile(1.0 - p, df);
  // Solve two_sided_tail(t) = 2 (1 - p) for t > 0; the tail is decreasing.
  const double target = 2.0 * (1.0 - p);
  double lo = 0.0, hi = 1.0;
  while (two_sided_tail(hi, df) > target) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) return std::numeric_limits<double>::infinity();
  }
  for (int i = 0; i < 200 && hi - lo > 0.0; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (two_sided_tail(mid, df) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

namespace {

bool all_equal(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs.front(); });
}

}  // namespace

double mean(std::span<const double> xs) {
  if (xs.empty()) return std::nan("");
  if (all_equal(xs)) return xs.front();
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sample_sd(std::span<const double> xs) {
  if (xs.size() < 2 || all_equal(xs)) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

PairedTestResult paired_t_test(std::span<const double> a,
                               std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("paired_t_test: length mismatch");
  }
  if (a.size() < 2) throw std::invalid_argument("paired_t_test: need n >= 2");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const double sd = sample_sd(d);
  if (!(sd > 0.0)) throw DegenerateError("degenerate differences");
  PairedTestResult r;
  r.n_pairs = a.size();
  r.df = a.size() - 1;
  r.mean_difference = mean(d);
  r.t_stat = r.mean_difference / (sd / std::sqrt(static_cast<double>(a.size())));
  r.p_value = std::clamp(two_sided_tail(r.t_stat, static_cast<double>(r.df)), 0.0, 1.0);
  return r;
}

std::vector<HolmStep> holm_bonferroni(std::span<const double> p_values,
                                      double alpha) {
  const std::size_t m = p_values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return p_values[a] < p_values[b];
  });
  std::vector<HolmStep> steps(m);
  bool stopped = false;
  for (std::size_t k = 1; k <= m; ++k) {
    auto& s = steps[k - 1];
    s.input_index = order[k - 1];
    s.p_value = p_values[s.input_index];
    s.rank = k;
    s.threshold = alpha / static_cast<double>(m - k + 1);
    if (!stopped && s.p_value < s.threshold) {
      s.rejected = true;
    } else {
      stopped = true;
    }
  }
  return steps;
}

double gaussian_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

namespace {

double log_pdf(double x, const GaussianComponent& c) {
  const double z = (x - c.mean) / c.sd;
  return -0.5 * z * z - std::log(c.sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

struct EmRun {
  std::array<GaussianComponent, 2> params;
  double log_likelihood = -std::numeric_limits<double>::infinity();
  int iterations = 0;
  std::vector<double> trace;
};

EmRun run_em(std::span<const double> data, std::array<GaussianComponent, 2> p,
             double sd_floor, const GmmOptions& options) {
  const std::size_t n = data.size();
  std::vector<double> r0(n);
  EmRun run;
  double prev = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    // E step; log-likelihood of the current parameters.
    double ll = 0.0;
    const double lw0 = std::log(p[0].weight), lw1 = std::log(p[1].weight);
    for (std::size_t i = 0; i < n; ++i) {
      const double a = lw0 + log_pdf(data[i], p[0]);
      const double b = lw1 + log_pdf(data[i], p[1]);
      const double hi = std::max(a, b);
      const double lse = hi + std::log(std::exp(a - hi) + std::exp(b - hi));
      ll += lse;
      r0[i] = std::exp(a - lse);
    }
    run.trace.push_back(ll);
    run.params = p;
    run.log_likelihood = ll;
    run.iterations = iter + 1;
    if (iter > 0 && ll - prev < options.tolerance) break;
    prev = ll;

    // M step.
    double n0 = 0.0, s0 = 0.0, s1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      n0 += r0[i];
      s0 += r0[i] * data[i];
      s1 += (1.0 - r0[i]) * data[i];
    }
    const double n1 = static_cast<double>(n) - n0;
    std::array<GaussianComponent, 2> next = p;
    const double nk[2] = {n0, n1};
    const double sk[2] = {s0, s1};
    for (int k = 0; k < 2; ++k) {
      next[k].weight = nk[k] / static_cast<double>(n);
      if (nk[k] <= 0.0) continue;
      next[k].mean = sk[k] / nk[k];
    }
    double v0 = 0.0, v1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      v0 += r0[i] * (data[i] - next[0].mean) * (data[i] - next[0].mean);
      v1 += (1.0 - r0[i]) * (data[i] - next[1].mean) * (data[i] - next[1].mean);
    }
    if (n0 > 0.0) next[0].sd = std::max(std::sqrt(v0 / n0), sd_floor);
    if (n1 > 0.0) next[1].sd = std::max(std::sqrt(v1 / n1), sd_floor);
    p = next;
  }
  return run;
}

double percentile(std::vector<double> sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

void check_data(std::span<const double> data) {
  if (data.size() < 4) {
    throw std::invalid_argument("fit_gmm_1d: need at least 4 points");
  }
  for (double x : data) {
    if (!std::isfinite(x)) throw std::invalid_argument("fit_gmm_1d: non-finite data");
  }
}

}  // namespace

std::vector<double> em_trace(std::span<const double> data,
                             std::array<GaussianComponent, 2> start,
                             const GmmOptions& options) {
  check_data(data);
  const auto [mn, mx] = std::minmax_element(data.begin(), data.end());
  return run_em(data, start, options.sd_floor * (*mx - *mn), options).trace;
}

GmmFit fit_gmm_1d(std::span<const double> data, const GmmOptions& options) {
  check_data(data);
  std::vector<double> sorted(data.begin(), data.end());
  std::sort(sorted.begin(), sorted.end());
  const double range = sorted.back() - sorted.front();
  if (!(range > 0.0)) throw DegenerateError("degenerate data");
  const double floor = options.sd_floor * range;
  const double sd = std::max(sample_sd(data), floor);
  const std::size_t inits = std::max<std::size_t>(1, options.n_init);

  std::vector<EmRun> runs(inits);
  const auto m = static_cast<std::ptrdiff_t>(inits);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t r = 0; r < m; ++r) {
    std::array<GaussianComponent, 2> start{};
    if (r == 0) {
      start[0] = {0.5, percentile(sorted, 0.25), sd};
      start[1] = {0.5, percentile(sorted, 0.75), sd};
    } else {
      std::mt19937_64 rng(derive_seed(options.seed, "gmm-init",
                                      static_cast<std::uint64_t>(r)));
      const auto pick = [&] {
        return data[static_cast<std::size_t>(uniform01(rng) * data.size())];
      };
      double a = pick(), b = pick();
      for (int tries = 0; a == b && tries < 64; ++tries) b = pick();
      start[0] = {0.5, a, sd};
      start[1] = {0.5, b, sd};
    }
    runs[r] = run_em(data, start, floor, options);
  }

  std::size_t best = 0;
  for (std::size_t r = 1; r < inits; ++r) {
    if (runs[r].log_likelihood > runs[best].log_likelihood) best = r;
  }
  GmmFit fit;
  fit.components = runs[best].params;
  if (fit.components[0].mean > fit.components[1].mean) {
    std::swap(fit.components[0], fit.components[1]);
  }
  fit.log_likelihood = runs[best].log_likelihood;
  fit.iterations = runs[best].iterations;
  fit.best_init = best;
  fit.log_likelihood_trace = std::move(runs[best].trace);
  return fit;
}

GmmThreshold gmm_intersection(const std::array<GaussianComponent, 2>& params) {
  const auto& c1 = params[0];
  const auto& c2 = params[1];
  if (c1.mean == c2.mean) {
    throw std::invalid_argument("gmm_intersection: identical means");
  }
  if (!(c1.weight > 0.0 && c2.weight > 0.0 && c1.sd > 0.0 && c2.sd > 0.0)) {
    throw std::invalid_argument("gmm_intersection: weights and sds must be > 0");
  }
  GmmThreshold out;
  out.components = params;
  const double lo = std::min(c1.mean, c2.mean), hi = std::max(c1.mean, c2.mean);
  const double mid = 0.5 * (c1.mean + c2.mean);
  const double v1 = c1.sd * c1.sd, v2 = c2.sd * c2.sd;

  // log(w1 N1) - log(w2 N2) = a x^2 + b x + c
  const double a = 1.0 / (2.0 * v2) - 1.0 / (2.0 * v1);
  const double b = c1.mean / v1 - c2.mean / v2;
  const double c = c2.mean * c2.mean / (2.0 * v2) - c1.mean * c1.mean / (2.0 * v1) +
                   std::log(c1.weight / c1.sd) - std::log(c2.weight / c2.sd);

  std::vector<double> roots;
  const double scale = std::max(1.0 / v1, 1.0 / v2);
  if (std::fabs(a) <= 1e-12 * scale) {
    roots.push_back(-c / b);
  } else {
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) {
      out.has_root = false;
      out.between_means = false;
      out.threshold = -b / (2.0 * a);
      return out;
    }
    const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
    if (q != 0.0) {
      roots.push_back(q / a);
      roots.push_back(c / q);
    } else {
      roots.push_back(-b / (2.0 * a));
    }
  }
  // Newton polish on the centred log-density difference; the expanded
  // quadratic cancels badly when one sd is tiny.
  const double k1 = std::log(c1.weight / c1.sd), k2 = std::log(c2.weight / c2.sd);
  const auto h = [&](double x) {
    const double d1 = x - c1.mean, d2 = x - c2.mean;
    return (k1 - d1 * d1 / (2.0 * v1)) - (k2 - d2 * d2 / (2.0 * v2));
  };
  for (double& x : roots) {
    for (int i = 0; i < 50; ++i) {
      const double slope = -(x - c1.mean) / v1 + (x - c2.mean) / v2;
      if (slope == 0.0) break;
      const double step = h(x) / slope;
      if (!std::isfinite(step)) break;
      x -= step;
      if (std::fabs(step) <= 4e-16 * std::max(1.0, std::fabs(x))) break;
    }
  }
  double pick = roots.front();
  bool inside = false;
  for (double x : roots) {
    const bool in = x >= lo && x <= hi;
    if (in && (!inside || std::fabs(x - mid) < std::fabs(pick - mid))) {
      pick = x;
      inside = true;
    } else if (!inside && std::fabs(x - mid) < std::fabs(pick - mid)) {
      pick = x;
    }
  }
  out.threshold = pick;
  out.between_means = inside;
  return out;
}

}  // namespace slidesearch::stats
