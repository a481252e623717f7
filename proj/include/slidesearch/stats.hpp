#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace slidesearch::stats {

// Raised when paired differences have zero variance and t is undefined.
class DegenerateError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Regularized incomplete beta I_x(a, b), continued fraction (modified Lentz).
double incomplete_beta(double a, double b, double x);

double student_t_cdf(double t, double df);
// Inverse CDF, p in (0, 1).
double student_t_quantile(double p, double df);

double mean(std::span<const double> xs);
// Sample standard deviation (n - 1 denominator); 0 for n < 2.
double sample_sd(std::span<const double> xs);

struct PairedTestResult {
  std::string model_a;
  std::string model_b;
  double t_stat = 0.0;
  std::size_t df = 0;
  double p_value = 1.0;  // two-sided
  std::size_t n_pairs = 0;
  double mean_difference = 0.0;
};

// d = a - b pairwise; t = mean(d) / (sd(d) / sqrt(n)). Throws
// std::invalid_argument on length mismatch or n < 2 and DegenerateError
// when sd(d) == 0.
PairedTestResult paired_t_test(std::span<const double> a,
                               std::span<const double> b);

struct HolmStep {
  std::size_t input_index = 0;
  double p_value = 0.0;
  std::size_t rank = 0;  // 1-based
  double threshold = 0.0;
  bool rejected = false;
};

// Steps sorted by ascending p (stable on input order). A hypothesis is
// rejected while p_k < alpha / (m - k + 1); the first failure stops the
// procedure.
std::vector<HolmStep> holm_bonferroni(std::span<const double> p_values,
                                      double alpha = 0.05);

struct GaussianComponent {
  double weight = 0.0;
  double mean = 0.0;
  double sd = 0.0;
};

struct GmmFit {
  std::array<GaussianComponent, 2> components{};  // ordered by mean
  double log_likelihood = 0.0;
  int iterations = 0;
  std::size_t best_init = 0;
  // Log-likelihood after each EM iteration of the winning restart.
  std::vector<double> log_likelihood_trace;
};

struct GmmOptions {
  std::size_t n_init = 10;
  std::uint64_t seed = 0;
  int max_iterations = 500;
  double tolerance = 1e-8;    // stop when the log-likelihood gain drops below
  double sd_floor = 1e-6;     // relative to range(data)
};

// Two-component univariate EM. Restart 0 starts from the 25th/75th
// percentiles; restarts 1.. pick two random data points. The
// highest-likelihood restart wins (lowest index on ties). Throws
// std::invalid_argument for fewer than 4 points or non-finite data and
// DegenerateError when every value is identical.
GmmFit fit_gmm_1d(std::span<const double> data, const GmmOptions& options = {});

// Log-likelihood after every iteration of a single EM run started from the
// given components. Exposed for monotonicity checks.
std::vector<double> em_trace(std::span<const double> data,
                             std::array<GaussianComponent, 2> start,
                             const GmmOptions& options = {});

double gaussian_pdf(double x, double mean, double sd);

struct GmmThreshold {
  std::array<GaussianComponent, 2> components{};
  double threshold = 0.0;
  // Set when no root lies between the means (nearest root to the midpoint is
  // returned) or when the weighted densities never cross (the point of
  // closest approach is returned).
  bool between_means = true;
  bool has_root = true;
};

// Solves w1 N(x; m1, s1) = w2 N(x; m2, s2). Throws std::invalid_argument
// when the means coincide.
GmmThreshold gmm_intersection(const std::array<GaussianComponent, 2>& params);

}  // namespace slidesearch::stats
