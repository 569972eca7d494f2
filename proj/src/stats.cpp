#include "swdecay/stats.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "swdecay/errors.hpp"

namespace swdecay::stats {

namespace {
const boost::math::normal_distribution<double> kStdNormal(0.0, 1.0);
}

double norm_cdf(double x) { return boost::math::cdf(kStdNormal, x); }

double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw ValidationError("norm_quantile: p must lie in (0, 1)");
  }
  return boost::math::quantile(kStdNormal, p);
}

double t_cdf(double x, double dof) {
  if (!(dof > 0.0)) {
    throw ValidationError("t_cdf: degrees of freedom must be positive");
  }
  return boost::math::cdf(boost::math::students_t_distribution<double>(dof), x);
}

double t_quantile(double p, double dof) {
  if (!(p > 0.0 && p < 1.0)) {
    throw ValidationError("t_quantile: p must lie in (0, 1)");
  }
  if (!(dof > 0.0)) {
    throw ValidationError("t_quantile: degrees of freedom must be positive");
  }
  return boost::math::quantile(boost::math::students_t_distribution<double>(dof), p);
}

}  // namespace swdecay::stats
