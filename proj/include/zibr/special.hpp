#pragma once

namespace zibr {

double digamma(double x);
double trigamma(double x);

/// Upper tail P(X > x) of a chi-square distribution with `df` degrees of freedom.
double chi_square_upper(double x, double df);

}  // namespace zibr
