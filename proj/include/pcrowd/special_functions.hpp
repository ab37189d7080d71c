#pragma once

namespace pcrowd::special {

// Regularized incomplete beta I_x(a, b), relative accuracy ~1e-14.
double incomplete_beta(double a, double b, double x);

// Two-sided tail probability of Student's t with `df` degrees of freedom.
double student_t_two_sided(double t, double df);

// Upper tail P(F > f) of the F(d1, d2) distribution.
double f_upper_tail(double f, double d1, double d2);

// Upper tail of the standard normal.
double normal_upper_tail(double z);

}  // namespace pcrowd::special
