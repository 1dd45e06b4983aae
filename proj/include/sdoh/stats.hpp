#pragma once

#include <span>
#include <string>

namespace sdoh {

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // two-sided
  std::string warning;
};

// Unequal-variance two-sample t-test. Each sample needs at least 2 values.
// Both variances zero: equal means give t = 0, p = 1; unequal means give
// t = +-inf, p = 0 and a warning.
WelchResult welch_t(std::span<const double> a, std::span<const double> b);

// Regularized incomplete beta I_x(a, b), continued fraction by modified Lentz.
double incomplete_beta(double x, double a, double b);

// P(|T| >= |t|) for Student's t with `df` degrees of freedom.
double student_t_two_sided(double t, double df);

double mean(std::span<const double> v);
// Unbiased (n - 1) sample variance.
double sample_variance(std::span<const double> v);

}  // namespace sdoh
