#pragma once

// CSV / JSON serialization of Monte Carlo results and rate fits.

#include "kldro/montecarlo.hpp"

#include <json.hpp>

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace kldro {

inline constexpr const char* kVersion = KLDRO_VERSION;

/// %.17g, so a rerun with the same inputs prints identical bytes.
std::string format_double(double x);

/// Artifact provenance written into every output. CSV files carry version,
/// config and seed as leading '#' lines. The command line and wall-clock go
/// only to JSON and stderr so reruns (at any thread count) give identical CSV bytes.
struct ArtifactInfo {
    std::string command;
    nlohmann::json config;
    std::optional<std::uint64_t> seed;  // absent for deterministic commands
};

void write_csv_preamble(std::ostream& out, const ArtifactInfo& info);

/// Header estimator,n,trials,hits,p_hat,ci_lo,ci_hi,bound,seed; empty bound when absent.
void write_trial_csv(std::ostream& out, const std::vector<TrialReport>& rows);

nlohmann::json to_json(const TrialReport& rep);
nlohmann::json to_json(const RateFit& fit);

/// Envelope with tool, version, command, config, seed and wall-clock (UTC, ISO 8601).
nlohmann::json artifact_json(const ArtifactInfo& info);

std::string utc_timestamp();

/// n,p_hat rows of a rate fit.
void write_rate_points_csv(std::ostream& out, const RateFit& fit);

/// Reads (n, p_hat) pairs from a CSV with a header naming both columns
/// (simulate output or a plain n,p_hat file). '#' lines are skipped.
std::vector<std::pair<double, double>> read_rate_points(std::istream& in);

}  // namespace kldro
