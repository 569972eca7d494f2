#pragma once

#include <json.hpp>

#include "swdecay/estimation.hpp"
#include "swdecay/simulation.hpp"

namespace swdecay {

using Json = nlohmann::ordered_json;

// Rounds to 10 significant digits; report JSON floats all pass through here.
double round_sig10(double x);

// Serializable fit record: theta, tau, rho, phi, cov_mb, cov_bc0..cov_bc3,
// converged, iterations, plus the stage-1 correlations and flags.
Json fit_result_to_json(const FitResult& result);

Json summary_to_json(const SimSummary& summary);

}  // namespace swdecay
