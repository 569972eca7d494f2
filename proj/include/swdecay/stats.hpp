#pragma once

namespace swdecay::stats {

// Standard normal CDF / quantile and Student t CDF / quantile.
// Absolute error well below 1e-12 across the usable range.
double norm_cdf(double x);
double norm_quantile(double p);
double t_cdf(double x, double dof);
double t_quantile(double p, double dof);

}  // namespace swdecay::stats
