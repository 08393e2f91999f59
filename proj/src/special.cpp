#include "zibr/special.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/policies/policy.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

namespace zibr {

namespace {
using Policy = boost::math::policies::policy<boost::math::policies::promote_double<false>>;
}

double digamma(double x) { return boost::math::digamma(x, Policy()); }

double trigamma(double x) { return boost::math::trigamma(x, Policy()); }

double chi_square_upper(double x, double df) {
  if (!(x > 0.0)) return 1.0;
  boost::math::chi_squared_distribution<double, Policy> dist(df);
  return boost::math::cdf(boost::math::complement(dist, x));
}

}  // namespace zibr
