#include "cli.hpp"

#include "kldro/core.hpp"
#include "kldro/estimators.hpp"
#include "kldro/expectation.hpp"
#include "kldro/montecarlo.hpp"
#include "kldro/oracle.hpp"
#include "kldro/report.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

namespace kldro::cli {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Raised for flag combinations CLI11 cannot express.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EstimatorFlags {
    std::string name;
    double r = std::numeric_limits<double>::quiet_NaN();
    double lambda = std::numeric_limits<double>::quiet_NaN();
    std::string schedule;
    double delta = 0.0;
    double a = 2.0;
    double A = 1.0;
    double truncation = kInf;
    double tol = 1e-10;
};

void add_estimator_flags(CLI::App& cmd, EstimatorFlags& f) {
    cmd.add_option("--estimator", f.name, "mean | wasserstein | trunc | vr | tv | kl")
        ->required()
        ->check(CLI::IsMember({"mean", "wasserstein", "trunc", "vr", "tv", "kl"}));
    cmd.add_option("--r", f.r, "Radius r");
    cmd.add_option("--lambda", f.lambda, "Constant lambda, r = lambda / n");
    cmd.add_option("--lambda-schedule", f.schedule, "const:<v> | logn[:<c>] | loglogn[:<c>] | power:<c>:<beta>");
    cmd.add_option("--delta", f.delta, "Deflation for the mean estimator");
    cmd.add_option("--a", f.a, "Moment order for the truncated mean, in (1, 2]");
    cmd.add_option("--A", f.A, "Moment bound for the truncated mean");
    cmd.add_option("--truncation", f.truncation, "Cap applied before TV mass removal");
    cmd.add_option("--tol", f.tol, "Dual solver tolerance");
}

EstimatorConfig resolve(const EstimatorFlags& f) {
    const int given = (std::isnan(f.r) ? 0 : 1) + (std::isnan(f.lambda) ? 0 : 1) + (f.schedule.empty() ? 0 : 1);
    if (given > 1) throw UsageError("give exactly one of --r, --lambda, --lambda-schedule");
    EstimatorConfig cfg;
    if (f.name == "mean") cfg.kind = SampleMeanDelta{f.delta};
    else if (f.name == "wasserstein") cfg.kind = Wasserstein{};
    else if (f.name == "trunc") cfg.kind = TruncatedMean{f.a, f.A};
    else if (f.name == "vr") cfg.kind = VarianceReg{};
    else if (f.name == "tv") cfg.kind = TotalVariation{f.truncation};
    else cfg.kind = KlDro{};

    if (given == 0) {
        if (f.name != "mean") throw UsageError("--estimator " + f.name + " needs one of --r, --lambda, --lambda-schedule");
    } else if (!std::isnan(f.r)) {
        cfg.schedule = RadiusSchedule::constant_radius(f.r);
    } else if (!std::isnan(f.lambda)) {
        cfg.schedule = RadiusSchedule::constant(f.lambda);
    } else {
        cfg.schedule = RadiusSchedule::parse(f.schedule);
    }
    validate(cfg);
    return cfg;
}

nlohmann::json describe(const EstimatorConfig& cfg, const EstimatorFlags& f) {
    nlohmann::json j{{"estimator", estimator_id(cfg.kind)}, {"schedule", cfg.schedule.describe()}};
    if (f.name == "mean") j["delta"] = f.delta;
    if (f.name == "trunc") {
        j["a"] = f.a;
        j["A"] = f.A;
    }
    if (f.name == "tv" && std::isfinite(f.truncation)) j["truncation"] = f.truncation;
    if (f.name == "kl") j["tol"] = f.tol;
    return j;
}

std::string join_args(int argc, const char* const* argv) {
    std::string s;
    for (int i = 0; i < argc; ++i) {
        if (i > 0) s += ' ';
        s += argv[i];
    }
    return s;
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw UsageError("cannot open " + path + " for writing");
    f << text;
    if (!f) throw UsageError("failed writing " + path);
}

// estimate ------------------------------------------------------------------

int cmd_estimate(const EstimatorFlags& f, const std::string& input, const std::string& command, std::ostream& out) {
    const EstimatorConfig cfg = resolve(f);
    const Sample s = read_sample_file(input);
    EstimateResult res;
    if (std::holds_alternative<KlDro>(cfg.kind)) {
        DualOptions opt;
        opt.tol = f.tol;
        res = kl_dro_estimator(s, cfg.schedule.radius(s.size()), opt);
        res.diagnostics["radius"] = cfg.schedule.radius(s.size());
    } else {
        res = estimate(cfg, s);
    }

    nlohmann::json config = describe(cfg, f);
    config["input"] = input;
    nlohmann::json j = artifact_json({command, config, std::nullopt});
    j["n"] = s.size();
    j["value"] = res.value;
    j["sample_mean"] = sample_mean(s);
    nlohmann::json diag = nlohmann::json::object();
    for (const auto& [k, v] : res.diagnostics) diag[k] = v;
    j["diagnostics"] = diag;
    out << j.dump(2) << "\n";
    return kOk;
}

// simulate ------------------------------------------------------------------

struct SimulateFlags {
    std::string dist;
    std::vector<std::size_t> n;
    std::size_t trials = 1000;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::string event = "disappointment";
    double b = std::numeric_limits<double>::quiet_NaN();
    std::string output;
    std::string json;
};

int cmd_simulate(const EstimatorFlags& f, const SimulateFlags& sf, const std::string& command, std::ostream& out,
                 std::ostream& err) {
    const EstimatorConfig cfg = resolve(f);
    const DistributionSpec spec = parse_distribution(sf.dist);
    validate(spec);
    const Event event = sf.event == "conservatism" ? Event::Conservatism : Event::Disappointment;
    if (event == Event::Conservatism && !(sf.b > 0.0)) throw UsageError("--event conservatism needs --b > 0");
    if (event == Event::Disappointment && !std::isnan(sf.b)) throw UsageError("--b only applies to conservatism");
    if (sf.trials < 1) throw UsageError("--trials must be at least 1");
    if (sf.threads < 1) throw UsageError("--threads must be at least 1");
    for (std::size_t n : sf.n) {
        if (n < 1) throw UsageError("--n values must be positive");
        if (std::holds_alternative<TotalVariation>(cfg.kind) && std::sqrt(cfg.schedule.radius(n) / 2.0) > 1.0)
            throw UsageError("TV mass sqrt(r/2) exceeds 1 at n = " + std::to_string(n));
    }

    nlohmann::json config = describe(cfg, f);
    config["dist"] = describe(spec);
    config["n"] = sf.n;
    config["trials"] = sf.trials;
    config["event"] = to_string(event);
    if (event == Event::Conservatism) config["b"] = sf.b;

    const auto start = std::chrono::steady_clock::now();
    RunOptions run{sf.trials, sf.seed, sf.threads};
    std::vector<TrialReport> rows;
    for (std::size_t n : sf.n) {
        rows.push_back(event == Event::Disappointment ? disappointment_probability(spec, cfg, n, run)
                                                      : conservatism_probability(spec, cfg, sf.b, n, run));
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    // Thread count never changes results, so it stays out of the CSV.
    std::ostringstream csv;
    write_csv_preamble(csv, {command, config, sf.seed});
    write_trial_csv(csv, rows);
    write_text(sf.output, csv.str(), out);

    if (!sf.json.empty()) {
        nlohmann::json j = artifact_json({command, config, sf.seed});
        j["threads"] = sf.threads;
        j["elapsed_seconds"] = elapsed;
        j["reports"] = nlohmann::json::array();
        for (const TrialReport& r : rows) j["reports"].push_back(to_json(r));
        write_text(sf.json, j.dump(2) + "\n", out);
    }
    err << "kldro simulate: " << rows.size() << " cell(s) in " << format_double(elapsed) << " s, finished "
        << utc_timestamp() << "\n";
    return kOk;
}

// validate ------------------------------------------------------------------

struct ValidateFlags {
    long long instances = -1;
    std::uint64_t seed = 0;
    std::size_t probes = 10000;
    std::size_t iterations = 4000;
    std::size_t max_distinct = 20;
    std::size_t max_n = 50;
    bool inject = false;
    bool skip_bruteforce = false;
};

int cmd_validate(const ValidateFlags& vf, const std::string& command, std::ostream& out) {
    if (vf.instances < 1) throw UsageError("--instances must be at least 1");
    if (vf.probes < 1) throw UsageError("--probes must be at least 1");
    if (vf.max_n < 1) throw UsageError("--max-n must be at least 1");

    std::size_t failures = 0, brute_checked = 0, brute_failures = 0, violations = 0;
    double worst_kl = 0.0, worst_duality = 0.0, worst_simplex = 0.0, worst_brute = 0.0;
    for (long long i = 0; i < vf.instances; ++i) {
        const Instance inst = random_instance(vf.seed, static_cast<std::size_t>(i), vf.max_n);
        CertificateOptions opt;
        opt.probes = vf.probes;
        opt.seed = substream_seed(vf.seed ^ 0xc3a5c85c97cb3127ULL, static_cast<std::uint64_t>(i));
        // Negative control: check the witness against a radius it was not solved for.
        if (vf.inject) opt.claimed_radius = 2.0 * inst.radius;
        const CertificateReport rep = verify_certificate(inst.sample, inst.radius, opt);
        if (!rep.passed()) ++failures;
        worst_kl = std::max(worst_kl, rep.kl_gap);
        worst_duality = std::max(worst_duality, rep.duality_gap / std::max(1.0, std::abs(rep.value)));
        worst_simplex = std::max(worst_simplex, rep.simplex_residual);
        violations += rep.probe_violations;

        if (!vf.skip_bruteforce && static_cast<std::size_t>(merge_duplicates(inst.sample).points.size()) <= vf.max_distinct) {
            const double brute = kl_projection_bruteforce(inst.sample, inst.radius, vf.iterations, opt.seed);
            const double gap = std::abs(brute - rep.value);
            ++brute_checked;
            worst_brute = std::max(worst_brute, gap);
            if (!(gap <= 1e-3)) ++brute_failures;
        }
    }

    nlohmann::json config{{"instances", vf.instances}, {"probes", vf.probes},  {"iterations", vf.iterations},
                          {"max_distinct", vf.max_distinct}, {"max_n", vf.max_n}, {"inject_radius_mismatch", vf.inject},
                          {"bruteforce", !vf.skip_bruteforce}};
    nlohmann::json j = artifact_json({command, config, vf.seed});
    j["certificate_failures"] = failures;
    j["worst_kl_gap"] = worst_kl;
    j["worst_relative_duality_gap"] = worst_duality;
    j["worst_simplex_residual"] = worst_simplex;
    j["probe_violations"] = violations;
    j["bruteforce_checked"] = brute_checked;
    j["bruteforce_failures"] = brute_failures;
    j["worst_bruteforce_gap"] = worst_brute;
    const bool ok = failures == 0 && brute_failures == 0;
    j["passed"] = ok;
    out << j.dump(2) << "\n";
    return ok ? kOk : kValidationFailure;
}

// rates ---------------------------------------------------------------------

struct RatesFlags {
    std::string input;
    std::string axis = "log-log";
    bool variance_ratio = false;
    bool cramer = false;
    std::string dist;
    std::vector<double> r_grid;
    double b = std::numeric_limits<double>::quiet_NaN();
    std::string output;
    std::string output_points;
};

int cmd_rates(const RatesFlags& rf, const std::string& command, std::ostream& out) {
    const int modes = (rf.variance_ratio ? 1 : 0) + (rf.cramer ? 1 : 0) + (rf.input.empty() ? 0 : 1);
    if (modes != 1) throw UsageError("choose exactly one of --input, --variance-ratio, --cramer");

    if (rf.variance_ratio) {
        if (rf.dist.empty() || rf.r_grid.empty()) throw UsageError("--variance-ratio needs --dist and --r-grid");
        for (double r : rf.r_grid)
            if (!(r > 0.0)) throw UsageError("--r-grid values must be positive");
        const DistributionSpec spec = parse_distribution(rf.dist);
        const auto curve = variance_ratio_curve(spec, rf.r_grid);
        std::ostringstream csv;
        write_csv_preamble(csv, {command, {{"dist", describe(spec)}, {"r_grid", rf.r_grid}}, std::nullopt});
        csv << "# wall_clock: " << utc_timestamp() << "\n";
        csv << "r,ratio\n";
        for (const auto& [r, ratio] : curve) csv << format_double(r) << ',' << format_double(ratio) << '\n';
        write_text(rf.output, csv.str(), out);
        return kOk;
    }

    if (rf.cramer) {
        if (rf.dist.empty() || std::isnan(rf.b)) throw UsageError("--cramer needs --dist and --b");
        const DistributionSpec spec = parse_distribution(rf.dist);
        const double rate = cramer_rate(spec, rf.b);
        nlohmann::json j = artifact_json({command, {{"dist", describe(spec)}, {"b", rf.b}}, std::nullopt});
        j["rate"] = std::isfinite(rate) ? nlohmann::json(rate) : nlohmann::json(nullptr);
        j["infinite"] = !std::isfinite(rate);
        write_text(rf.output, j.dump(2) + "\n", out);
        return kOk;
    }

    std::ifstream in(rf.input);
    if (!in) throw InputError("cannot open " + rf.input, 0);
    const RateAxis axis = rf.axis == "log-linear" ? RateAxis::LogLinear : RateAxis::LogLog;
    const RateFit fit = rate_fit(read_rate_points(in), axis);
    nlohmann::json j = artifact_json({command, {{"input", rf.input}, {"axis", to_string(axis)}}, std::nullopt});
    j["fit"] = to_json(fit);
    write_text(rf.output, j.dump(2) + "\n", out);
    if (!rf.output_points.empty()) {
        std::ostringstream csv;
        write_rate_points_csv(csv, fit);
        write_text(rf.output_points, csv.str(), out);
    }
    return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Safe mean estimation for non-negative heavy-tailed samples", "kldro"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    EstimatorFlags est_flags;
    std::string input;
    auto* estimate_cmd = app.add_subcommand("estimate", "Estimate the mean of a sample file");
    add_estimator_flags(*estimate_cmd, est_flags);
    estimate_cmd->add_option("--input", input, "One non-negative value per line")->required();

    EstimatorFlags sim_est;
    SimulateFlags sim;
    auto* simulate_cmd = app.add_subcommand("simulate", "Monte Carlo disappointment / conservatism probabilities");
    add_estimator_flags(*simulate_cmd, sim_est);
    simulate_cmd->add_option("--dist", sim.dist, "pareto:<rho>:<xm> | lognormal:<mu>:<sigma> | bern:<p>:<high> | "
                                                 "point:<c> | uniform:<lo>:<hi>")
        ->required();
    simulate_cmd->add_option("--n", sim.n, "Comma-separated sample sizes")->required()->delimiter(',');
    simulate_cmd->add_option("--trials", sim.trials, "Trials per sample size");
    simulate_cmd->add_option("--seed", sim.seed, "Master seed");
    simulate_cmd->add_option("--threads", sim.threads, "Worker threads (results do not depend on it)");
    simulate_cmd->add_option("--event", sim.event, "disappointment | conservatism")
        ->check(CLI::IsMember({"disappointment", "conservatism"}));
    simulate_cmd->add_option("--b", sim.b, "Conservatism margin");
    simulate_cmd->add_option("--output", sim.output, "CSV path (default stdout)");
    simulate_cmd->add_option("--json", sim.json, "Also write a JSON report here");

    ValidateFlags val;
    auto* validate_cmd = app.add_subcommand("validate", "Certificate and brute-force checks of the dual solver");
    validate_cmd->add_option("--instances", val.instances, "Number of random instances")->required();
    validate_cmd->add_option("--seed", val.seed, "Master seed");
    validate_cmd->add_option("--probes", val.probes, "Random feasible probes per instance");
    validate_cmd->add_option("--iterations", val.iterations, "Brute-force iterations per restart");
    validate_cmd->add_option("--max-distinct", val.max_distinct, "Brute force only on instances with at most this many "
                                                                 "distinct points");
    validate_cmd->add_option("--max-n", val.max_n, "Largest instance size");
    validate_cmd->add_flag("--inject-radius-mismatch", val.inject, "Check witnesses against the wrong radius");
    validate_cmd->add_flag("--skip-bruteforce", val.skip_bruteforce, "Certificates only");

    RatesFlags rates;
    auto* rates_cmd = app.add_subcommand("rates", "Rate fits, Cramer rates and variance-ratio curves");
    rates_cmd->add_option("--input", rates.input, "CSV with n and p_hat columns");
    rates_cmd->add_option("--axis", rates.axis, "log-log | log-linear")
        ->check(CLI::IsMember({"log-log", "log-linear"}));
    rates_cmd->add_flag("--variance-ratio", rates.variance_ratio, "Emit the (r, V/r) curve");
    rates_cmd->add_flag("--cramer", rates.cramer, "Compute I(b)");
    rates_cmd->add_option("--dist", rates.dist, "Distribution for --variance-ratio / --cramer");
    rates_cmd->add_option("--r-grid", rates.r_grid, "Comma-separated radii")->delimiter(',');
    rates_cmd->add_option("--b", rates.b, "Shortfall b for --cramer");
    rates_cmd->add_option("--output", rates.output, "Output path (default stdout)");
    rates_cmd->add_option("--output-points", rates.output_points, "Write the fitted n,p_hat points here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsageError;
    }

    const std::string command = join_args(argc, argv);
    try {
        if (*estimate_cmd) return cmd_estimate(est_flags, input, command, out);
        if (*simulate_cmd) return cmd_simulate(sim_est, sim, command, out, err);
        if (*validate_cmd) return cmd_validate(val, command, out);
        return cmd_rates(rates, command, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kUsageError;
    } catch (const InputError& e) {
        err << "input error: " << e.what() << "\n";
        return kUsageError;
    } catch (const DomainError& e) {
        err << "invalid argument: " << e.what() << "\n";
        return kUsageError;
    } catch (const std::exception& e) {
        // ConvergenceError, QuadratureError, TrialError and anything else raised while computing.
        err << "numeric failure: " << e.what() << "\n";
        return kNumericFailure;
    }
}

}  // namespace kldro::cli
