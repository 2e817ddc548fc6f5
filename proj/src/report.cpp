#include "kldro/report.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <istream>
#include <ostream>
#include <sstream>

namespace kldro {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        const auto first = cell.find_first_not_of(" \t\r");
        const auto last = cell.find_last_not_of(" \t\r");
        cells.push_back(first == std::string::npos ? "" : cell.substr(first, last - first + 1));
    }
    return cells;
}

double parse_cell(const std::string& cell, std::size_t line) {
    double x = 0.0;
    const char* end = cell.data() + cell.size();
    const auto [ptr, ec] = std::from_chars(cell.data(), end, x);
    if (ec != std::errc() || ptr != end) throw InputError("not a number: '" + cell + "'", line);
    return x;
}

// JSON has no infinity; map non-finite values to null.
nlohmann::json number(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

}  // namespace

std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_csv_preamble(std::ostream& out, const ArtifactInfo& info) {
    out << "# kldro " << kVersion << "\n";
    out << "# config: " << info.config.dump() << "\n";
    if (info.seed) out << "# seed: " << *info.seed << "\n";
}

void write_trial_csv(std::ostream& out, const std::vector<TrialReport>& rows) {
    out << "estimator,n,trials,hits,p_hat,ci_lo,ci_hi,bound,seed\n";
    for (const TrialReport& r : rows) {
        out << r.estimator_id << ',' << r.n << ',' << r.trials << ',' << r.hits << ',' << format_double(r.p_hat)
            << ',' << format_double(r.ci_lo) << ',' << format_double(r.ci_hi) << ','
            << (r.bound ? format_double(*r.bound) : std::string()) << ',' << r.seed << '\n';
    }
}

nlohmann::json to_json(const TrialReport& rep) {
    nlohmann::json j;
    j["estimator"] = rep.estimator_id;
    j["event"] = to_string(rep.event);
    j["n"] = rep.n;
    j["trials"] = rep.trials;
    j["hits"] = rep.hits;
    j["p_hat"] = rep.p_hat;
    j["ci_lo"] = rep.ci_lo;
    j["ci_hi"] = rep.ci_hi;
    j["bound"] = rep.bound ? number(*rep.bound) : nlohmann::json(nullptr);
    j["seed"] = rep.seed;
    j["threshold"] = rep.threshold;
    if (rep.event == Event::Conservatism) j["b"] = rep.b;
    return j;
}

nlohmann::json to_json(const RateFit& fit) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& [n, p] : fit.points) pts.push_back({{"n", n}, {"p_hat", p}});
    return {{"axis", to_string(fit.axis)},
            {"slope", number(fit.slope)},
            {"intercept", number(fit.intercept)},
            {"r_squared", number(fit.r_squared)},
            {"points", pts}};
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

nlohmann::json artifact_json(const ArtifactInfo& info) {
    return {{"tool", "kldro"},
            {"version", kVersion},
            {"command", info.command},
            {"config", info.config},
            {"seed", info.seed ? nlohmann::json(*info.seed) : nlohmann::json(nullptr)},
            {"wall_clock", utc_timestamp()}};
}

void write_rate_points_csv(std::ostream& out, const RateFit& fit) {
    out << "n,p_hat\n";
    for (const auto& [n, p] : fit.points) out << format_double(n) << ',' << format_double(p) << '\n';
}

std::vector<std::pair<double, double>> read_rate_points(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    std::ptrdiff_t col_n = -1, col_p = -1;
    std::vector<std::pair<double, double>> points;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#' || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::vector<std::string> cells = split_csv(line);
        if (col_n < 0) {
            for (std::size_t i = 0; i < cells.size(); ++i) {
                if (cells[i] == "n") col_n = static_cast<std::ptrdiff_t>(i);
                if (cells[i] == "p_hat") col_p = static_cast<std::ptrdiff_t>(i);
            }
            if (col_n < 0 || col_p < 0) throw InputError("header must name columns n and p_hat", lineno);
            continue;
        }
        const auto need = static_cast<std::size_t>(std::max(col_n, col_p));
        if (cells.size() <= need) throw InputError("row has too few columns", lineno);
        points.emplace_back(parse_cell(cells[static_cast<std::size_t>(col_n)], lineno),
                            parse_cell(cells[static_cast<std::size_t>(col_p)], lineno));
    }
    if (col_n < 0) throw InputError("missing header", lineno);
    return points;
}

}  // namespace kldro
