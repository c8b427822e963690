#include "homog/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "homog/cell.hpp"
#include "homog/dirichlet.hpp"
#include "homog/error.hpp"
#include "homog/law.hpp"
#include "homog/norms.hpp"
#include "homog/parallel.hpp"
#include "homog/rng.hpp"
#include "homog/stats.hpp"

namespace homog {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::vector<std::pair<Command, std::string>> kCommands = {
    {Command::check_invariants, "check-invariants"},
    {Command::study_cell, "study-cell"},
    {Command::study_convergence, "study-convergence"},
    {Command::study_dirichlet, "study-dirichlet"},
    {Command::suppressive_profile, "suppressive-profile"},
    {Command::max_moment, "max-moment"},
};

std::string num(double v)
{
    if (!std::isfinite(v))
        return "";
    char buf[40];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc() ? std::string(buf, end) : std::string();
}

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep))
        out.push_back(trim(item));
    return out;
}

[[noreturn]] void bad(const std::string& key, const std::string& value, const std::string& need)
{
    throw ConfigError("config key '" + key + "': '" + value + "' " + need);
}

long long to_integer(const std::string& key, const std::string& v, long long lo, long long hi)
{
    long long x = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || ptr != v.data() + v.size() || x < lo || x > hi)
        bad(key, v, "must be an integer in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return x;
}

double to_real(const std::string& key, const std::string& v, double lo, double hi, bool open_lo)
{
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    const bool in = open_lo ? (x > lo) : (x >= lo);
    if (used == 0 || used != v.size() || !std::isfinite(x) || !in || x > hi)
        bad(key, v, std::string("must be a number in ") + (open_lo ? "(" : "[") + num(lo) + ", " + num(hi) + "]");
    return x;
}

bool to_bool(const std::string& key, const std::string& v)
{
    if (v == "on" || v == "true" || v == "1" || v == "yes")
        return true;
    if (v == "off" || v == "false" || v == "0" || v == "no")
        return false;
    bad(key, v, "must be on or off");
}

std::vector<int> to_n_range(const std::string& key, const std::string& v)
{
    std::vector<int> out;
    const auto dots = v.find("..");
    if (dots != std::string::npos) {
        const int a = static_cast<int>(to_integer(key, trim(v.substr(0, dots)), 0, 6));
        const int b = static_cast<int>(to_integer(key, trim(v.substr(dots + 2)), 0, 6));
        if (b < a)
            bad(key, v, "must be an ascending range a..b");
        for (int n = a; n <= b; ++n)
            out.push_back(n);
        return out;
    }
    for (const auto& item : split(v, ','))
        out.push_back(static_cast<int>(to_integer(key, item, 0, 6)));
    if (out.empty() || std::adjacent_find(out.begin(), out.end(), std::greater_equal<>()) != out.end())
        bad(key, v, "must be a strictly ascending list of scales in [0, 6]");
    return out;
}

template <class T, class F>
std::vector<T> to_list(const std::string& key, const std::string& v, F parse_one)
{
    std::vector<T> out;
    for (const auto& item : split(v, ','))
        out.push_back(static_cast<T>(parse_one(item)));
    if (out.empty())
        bad(key, v, "must be a nonempty comma-separated list");
    return out;
}

template <class T>
std::string join(const std::vector<T>& v)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i)
            s += ",";
        if constexpr (std::is_floating_point_v<T>)
            s += num(v[i]);
        else
            s += std::to_string(v[i]);
    }
    return s;
}

std::string default_datum(int dim)
{
    std::string s = "affine:1";
    for (int i = 1; i < dim; ++i)
        s += ",0";
    return s;
}

nlohmann::json fin(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

std::vector<std::pair<std::string, std::string>> canonical_pairs(const ExperimentConfig& c)
{
    return {
        {"command", command_name(c.command)},
        {"law", c.law},
        {"dim", std::to_string(c.dim)},
        {"n", join(c.n_range)},
        {"N", std::to_string(c.N)},
        {"res", std::to_string(c.res)},
        {"seed", std::to_string(c.seed)},
        {"threads", std::to_string(c.threads)},
        {"out", c.out},
        {"timings", c.timings ? "on" : "off"},
        {"U", num(c.U)},
        {"f", c.f},
        {"r", join(c.r_grid)},
        {"abar", c.abar ? num(*c.abar) : "auto"},
        {"omega", c.omega ? "on" : "off"},
        {"beta_prime", num(c.beta_prime)},
        {"gamma_prime", num(c.gamma_prime)},
        {"counts", join(c.counts)},
        {"p", join(c.p)},
        {"samples", std::to_string(c.samples)},
        {"mc", c.mc ? "on" : "off"},
    };
}

//---------------------------------------------------------------------------//
// Commands

void check_invariants(const ExperimentConfig& c, const MarginalLaw& law, RunOutput& out)
{
    std::vector<int> scales;
    for (int n : c.n_range)
        if (n >= 1)
            scales.push_back(n);
    if (scales.empty())
        throw ConfigError("config key 'n': check-invariants needs a scale n >= 1");

    std::ostringstream csv;
    csv << "n,sample,probe,slack,Jq_residual,qr2_residual,fv_residual,ordering,distance\n";
    auto rows = nlohmann::json::array();
    double min_slack = std::numeric_limits<double>::infinity();
    double max_res = 0.0;
    int failures = 0;
    int probes = 0;
    for (int n : scales) {
        const auto cube = TriadicCube::centered(n, c.dim);
        std::vector<LemmaDiagnostics> diags(static_cast<std::size_t>(c.N));
        std::vector<char> ordering(diags.size(), 0);
        parallel_for(diags.size(), resolve_threads(c.threads), [&](std::size_t i) {
            auto field = sample_field(law, sample_seed(c.seed, i), cube);
            diags[i] = verify_lemma_properties(field, cube, c.res);
            ordering[i] = matrices(field, cube, c.res).ordering_holds() ? 1 : 0;
        });
        for (std::size_t i = 0; i < diags.size(); ++i) {
            const auto& d = diags[i];
            const bool ok = d.min_slack() >= -1e-6 && d.max_Jq_residual() <= 1e-6 &&
                            d.max_qr2_residual() <= 1e-5 && d.max_fv_residual() <= 1e-6 &&
                            d.distance_holds() && ordering[i];
            failures += ok ? 0 : 1;
            for (std::size_t k = 0; k < d.probes.size(); ++k) {
                const auto& pr = d.probes[k];
                ++probes;
                min_slack = std::min(min_slack, pr.slack);
                max_res = std::max({max_res, pr.Jq_residual, pr.qr2_residual, pr.fv_residual});
                csv << n << ',' << i << ',' << k << ',' << num(pr.slack) << ',' << num(pr.Jq_residual) << ','
                    << num(pr.qr2_residual) << ',' << num(pr.fv_residual) << ',' << int(ordering[i]) << ','
                    << (d.distance_holds() ? 1 : 0) << '\n';
            }
            rows.push_back({{"n", n}, {"sample", i}, {"passed", ok}, {"diagnostics", d}});
        }
    }
    out.csv = csv.str();
    out.passed = failures == 0;
    out.json = {{"samples", rows},
                {"probes", probes},
                {"failed_samples", failures},
                {"min_slack", fin(min_slack)},
                {"max_residual", max_res}};
    out.summary.push_back("check-invariants: " + std::to_string(probes) + " probes, " +
                          std::to_string(failures) + " failing samples");
    out.summary.push_back("  min slack " + num(min_slack) + ", max residual " + num(max_res));
}

void study_cell(const ExperimentConfig& c, const MarginalLaw& law, RunOutput& out)
{
    StudyOptions so;
    so.threads = c.threads;
    std::vector<ScaleStudy> studies;
    for (int n : c.n_range)
        studies.push_back(run_scale_study(law, c.dim, n, c.N, c.res, c.seed, so));
    std::vector<double> tau;
    auto taus = nlohmann::json::array();
    for (std::size_t k = 0; k + 1 < studies.size(); ++k) {
        auto t = estimate_tau(studies[k], studies[k + 1]);
        tau.push_back(t.tau);
        taus.push_back(t);
    }
    auto est = estimate_abar(studies);
    auto mono = nlohmann::json::array();
    for (const auto& r : monotonicity_rows(studies))
        mono.push_back({{"n", r.n},
                        {"quantity", r.quantity},
                        {"probe", r.probe},
                        {"value_n", r.value_n},
                        {"value_n1", r.value_n1},
                        {"se", r.se},
                        {"holds", r.holds}});
    out.csv = studies_csv(studies, tau, c.timings);
    out.json = {{"studies", studies}, {"tau", taus}, {"abar", est}, {"monotonicity", mono}};
    for (const auto& s : studies) {
        std::ostringstream line;
        line << "n=" << s.n << "  abar_n diag:";
        for (int i = 0; i < c.dim; ++i)
            line << ' ' << num(s.abar_n(i, i));
        out.summary.push_back(line.str());
    }
    out.summary.push_back("abar estimate (0,0): " + num(est.abar(0, 0)) + " in [" + num(est.lower_refined) +
                          ", " + num(est.upper_refined) + "]");
}

void study_convergence(const ExperimentConfig& c, const MarginalLaw& law, RunOutput& out)
{
    ConvergenceOptions opts;
    opts.study.threads = c.threads;
    opts.with_omega = c.omega;
    auto r = convergence_study(law, c.dim, c.n_range, c.N, c.res, c.seed, opts);
    out.csv = convergence_csv(r);
    out.json = r;
    for (const auto& row : r.rows)
        out.summary.push_back("n=" + std::to_string(row.n) + "  E|abar - a|^2 = " + num(row.sq_error) +
                              " +- " + num(row.sq_error_se));
    out.summary.push_back(std::string("reference ") + r.reference + ", strictly decreasing: " +
                          (r.strictly_decreasing ? "yes" : "no"));
}

void study_dirichlet(const ExperimentConfig& c, const MarginalLaw& law, RunOutput& out)
{
    ExperimentOptions opts;
    opts.threads = c.threads;
    opts.with_phi = c.omega;
    if (c.abar)
        opts.abar = *c.abar * Mat::Identity(c.dim, c.dim);
    auto rep = error_experiment(law, c.dim, Box::symmetric(c.dim, c.U), BoundaryDatum::parse(c.f, c.dim),
                                c.n_range, c.r_grid, c.N, c.res, c.seed, opts);
    out.csv = dirichlet_csv(rep, c.timings);
    out.json = rep;
    for (const auto& a : rep.aggregates)
        out.summary.push_back("eps=3^-" + std::to_string(a.n) + "  E||u - u^eps||^2 = " + num(a.mean_sq) +
                              " +- " + num(a.sq_se));
    for (double r : c.r_grid)
        out.summary.push_back("r=" + num(r) + "  two-scale half fraction at n=" +
                              std::to_string(c.n_range.back()) + ": " +
                              num(rep.two_scale_fraction(c.n_range.back(), r)));
}

void suppressive(const ExperimentConfig& c, const MarginalLaw& law, RunOutput& out)
{
    auto prof = suppressive_profile(law, c.dim, c.beta_prime, c.gamma_prime, c.n_range.back());
    std::ostringstream csv;
    csv << "n,delta,M,upper_moment,lower_moment,moment,mc_mean,mc_se\n";
    auto mc = nlohmann::json::array();
    for (const auto& r : prof.rows) {
        double mean = kNaN, se = kNaN;
        if (c.mc) {
            auto m = truncated_moment_mc(law, c.dim, r.n, r.delta, r.M, c.samples,
                                         sample_seed(c.seed, static_cast<std::uint64_t>(r.n)));
            mean = m.mean;
            se = m.se;
            mc.push_back({{"n", r.n}, {"mean", mean}, {"se", se}, {"agrees", std::abs(mean - r.moment()) <= 3.0 * se}});
        }
        csv << r.n << ',' << num(r.delta) << ',' << num(r.M) << ',' << num(r.upper_moment) << ','
            << num(r.lower_moment) << ',' << num(r.moment()) << ',' << num(mean) << ',' << num(se) << '\n';
    }
    out.csv = csv.str();
    out.json = {{"profile", prof}, {"monte_carlo", mc}};
    out.summary.push_back("suppressive profile: L = " + num(prof.L) +
                          (prof.consistent ? ", consistent" : ", not yet decaying"));
}

void max_moment(const ExperimentConfig& c, const MarginalLaw& law, RunOutput& out)
{
    std::ostringstream csv;
    csv << "count,p,lhs,stderr,rhs,margin,holds\n";
    auto rows = nlohmann::json::array();
    std::uint64_t idx = 0;
    int held = 0;
    for (long count : c.counts)
        for (double p : c.p) {
            auto r = check_max_moment(law, count, p, c.samples, sample_seed(c.seed, idx++));
            held += r.holds() ? 1 : 0;
            csv << count << ',' << num(p) << ',' << num(r.lhs) << ',' << num(r.stderr_) << ',' << num(r.rhs)
                << ',' << num(r.margin()) << ',' << (r.holds() ? 1 : 0) << '\n';
            rows.push_back({{"count", count},
                            {"p", p},
                            {"lhs", r.lhs},
                            {"stderr", r.stderr_},
                            {"rhs", fin(r.rhs)},
                            {"margin", fin(r.margin())},
                            {"holds", r.holds()}});
        }
    out.csv = csv.str();
    out.json = {{"rows", rows}};
    out.summary.push_back("max-moment: " + std::to_string(held) + "/" + std::to_string(rows.size()) + " hold");
}

std::ofstream open_output(const std::string& path)
{
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f)
        throw IoError("cannot write '" + path + "'");
    return f;
}

}  // namespace

//---------------------------------------------------------------------------//

std::string command_name(Command c)
{
    for (const auto& [cmd, name] : kCommands)
        if (cmd == c)
            return name;
    return "?";
}

Command parse_command(const std::string& name)
{
    for (const auto& [cmd, n] : kCommands)
        if (n == name)
            return cmd;
    throw ConfigError("config key 'command': unknown command '" + name + "'");
}

const std::vector<ConfigKey>& config_keys()
{
    static const std::vector<ConfigKey> keys = {
        {"command", "", "check-invariants | study-cell | study-convergence | study-dirichlet | "
                        "suppressive-profile | max-moment"},
        {"law", "two_point:1,4,0.5", "marginal law spec"},
        {"dim", "2", "dimension, 1..3"},
        {"n", "0..2", "scales: a..b or an ascending list, each in 0..6"},
        {"N", "100", "samples, 2..10000000"},
        {"res", "4", "elements per unit length, 1..64"},
        {"seed", "1", "master seed, unsigned 64-bit"},
        {"threads", "0", "thread budget, 0..1024 (0: HOMOG_THREADS, else 1)"},
        {"out", "homog_out", "output prefix for <out>.csv and <out>.json"},
        {"timings", "off", "on: record wall times (outputs then differ run to run)"},
        {"U", "0.45", "Dirichlet domain (-U, U)^dim, U in (0, 0.5]"},
        {"f", "affine:1,0,...", "boundary datum: affine:p | quadratic:p;Q | sine"},
        {"r", "0.05,0.1,0.2,0.4", "cutoff radii, each in (0, 1)"},
        {"abar", "auto", "scalar homogenized coefficient for study-dirichlet, or auto"},
        {"omega", "off", "on: compute Omega(n) (and Phi) in studies"},
        {"beta_prime", "0.5", "M_n = (n+1)^beta_prime, > 0"},
        {"gamma_prime", "0.5", "delta_n = (n+1)^-gamma_prime, > 0"},
        {"counts", "1,9,81", "max-moment sample counts, each >= 1"},
        {"p", "1,3", "max-moment exponents, each in [1, 16]"},
        {"samples", "100000", "Monte Carlo samples, 2..1000000000"},
        {"mc", "off", "on: Monte Carlo cross-check of the suppressive profile"},
    };
    return keys;
}

std::map<std::string, std::string> read_config_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot read config file '" + path + "'");
    std::map<std::string, std::string> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
        const auto key = trim(line.substr(0, eq));
        if (out.count(key))
            throw ConfigError(path + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
        out[key] = trim(line.substr(eq + 1));
    }
    return out;
}

ExperimentConfig parse_config(const std::map<std::string, std::string>& file,
                              const std::map<std::string, std::string>& flags,
                              std::vector<std::string>* warnings)
{
    std::map<std::string, std::string> v;
    auto known = [](const std::string& k) {
        const auto& keys = config_keys();
        return std::any_of(keys.begin(), keys.end(), [&](const ConfigKey& c) { return c.name == k; });
    };
    for (const auto& [k, val] : file) {
        if (!known(k))
            throw ConfigError("unknown config key '" + k + "'");
        v[k] = val;
    }
    for (const auto& [k, val] : flags) {
        if (!known(k))
            throw ConfigError("unknown config key '" + k + "'");
        auto it = v.find(k);
        if (it != v.end() && it->second != val && warnings)
            warnings->push_back("flag overrides config file for '" + k + "': '" + it->second + "' -> '" +
                                val + "'");
        v[k] = val;
    }
    auto get = [&](const std::string& k) -> std::optional<std::string> {
        auto it = v.find(k);
        if (it == v.end())
            return std::nullopt;
        return it->second;
    };

    ExperimentConfig c;
    auto cmd = get("command");
    if (!cmd || cmd->empty())
        throw ConfigError("config key 'command' is required");
    c.command = parse_command(*cmd);
    if (auto s = get("law")) {
        try {
            c.law = MarginalLaw::parse(*s).to_spec();
        } catch (const Error& e) {
            throw ConfigError("config key 'law': " + std::string(e.what()));
        }
    } else {
        c.law = MarginalLaw::parse(c.law).to_spec();
    }
    if (auto s = get("dim"))
        c.dim = static_cast<int>(to_integer("dim", *s, 1, 3));
    if (auto s = get("n"))
        c.n_range = to_n_range("n", *s);
    if (auto s = get("N"))
        c.N = static_cast<int>(to_integer("N", *s, 2, 10000000));
    if (auto s = get("res"))
        c.res = static_cast<int>(to_integer("res", *s, 1, 64));
    if (auto s = get("seed")) {
        std::uint64_t x = 0;
        auto [ptr, ec] = std::from_chars(s->data(), s->data() + s->size(), x);
        if (ec != std::errc() || ptr != s->data() + s->size())
            bad("seed", *s, "must be an unsigned 64-bit integer");
        c.seed = x;
    }
    if (auto s = get("threads"))
        c.threads = static_cast<int>(to_integer("threads", *s, 0, 1024));
    if (auto s = get("out")) {
        if (s->empty())
            bad("out", *s, "must be a nonempty path prefix");
        c.out = *s;
    }
    if (auto s = get("timings"))
        c.timings = to_bool("timings", *s);
    if (auto s = get("U"))
        c.U = to_real("U", *s, 0.0, 0.5, true);
    c.f = default_datum(c.dim);
    if (auto s = get("f")) {
        try {
            c.f = BoundaryDatum::parse(*s, c.dim).to_spec();
        } catch (const Error& e) {
            throw ConfigError("config key 'f': " + std::string(e.what()));
        }
    }
    if (auto s = get("r"))
        c.r_grid = to_list<double>("r", *s, [&](const std::string& x) { return to_real("r", x, 0.0, 1.0, true); });
    if (std::any_of(c.r_grid.begin(), c.r_grid.end(), [](double r) { return r >= 1.0; }))
        bad("r", join(c.r_grid), "radii must be below 1");
    if (auto s = get("abar"); s && *s != "auto")
        c.abar = to_real("abar", *s, 0.0, 1e12, true);
    if (auto s = get("omega"))
        c.omega = to_bool("omega", *s);
    if (auto s = get("beta_prime"))
        c.beta_prime = to_real("beta_prime", *s, 0.0, 100.0, true);
    if (auto s = get("gamma_prime"))
        c.gamma_prime = to_real("gamma_prime", *s, 0.0, 100.0, true);
    if (auto s = get("counts"))
        c.counts = to_list<long>("counts", *s,
                                 [&](const std::string& x) { return to_integer("counts", x, 1, 1000000000); });
    if (auto s = get("p"))
        c.p = to_list<double>("p", *s, [&](const std::string& x) { return to_real("p", x, 1.0, 16.0, false); });
    if (auto s = get("samples"))
        c.samples = static_cast<long>(to_integer("samples", *s, 2, 1000000000));
    if (auto s = get("mc"))
        c.mc = to_bool("mc", *s);
    return c;
}

std::string ExperimentConfig::canonical() const
{
    std::string s;
    for (const auto& [k, v] : canonical_pairs(*this))
        s += k + "=" + v + "\n";
    return s;
}

nlohmann::json ExperimentConfig::to_json() const
{
    auto j = nlohmann::json::object();
    for (const auto& [k, v] : canonical_pairs(*this))
        if (k != "threads" && k != "out")
            j[k] = v;
    return j;
}

RunOutput execute(const ExperimentConfig& cfg)
{
    const auto t0 = std::chrono::steady_clock::now();
    const auto law = MarginalLaw::parse(cfg.law);
    RunOutput out;
    switch (cfg.command) {
    case Command::check_invariants: check_invariants(cfg, law, out); break;
    case Command::study_cell: study_cell(cfg, law, out); break;
    case Command::study_convergence: study_convergence(cfg, law, out); break;
    case Command::study_dirichlet: study_dirichlet(cfg, law, out); break;
    case Command::suppressive_profile: suppressive(cfg, law, out); break;
    case Command::max_moment: max_moment(cfg, law, out); break;
    }
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    out.json = {{"config", cfg.to_json()},
                {"results", std::move(out.json)},
                {"timings", {{"total_ms", cfg.timings ? ms : 0.0}}}};
    return out;
}

int run(const ExperimentConfig& cfg, std::ostream& summary)
{
    const std::string csv_path = cfg.out + ".csv";
    const std::string json_path = cfg.out + ".json";
    // Fail on unwritable outputs before any computation.
    auto csv = open_output(csv_path);
    auto json = open_output(json_path);

    auto out = execute(cfg);
    csv << out.csv;
    json << out.json.dump(2) << '\n';
    csv.close();
    json.close();
    if (!csv || !json)
        throw IoError("failed writing '" + cfg.out + "'.{csv,json}");

    summary << command_name(cfg.command) << " (" << cfg.law << ", dim " << cfg.dim << ")\n";
    for (const auto& line : out.summary)
        summary << "  " << line << '\n';
    summary << "  wrote " << csv_path << ", " << json_path << '\n';
    return out.passed ? 0 : exit_code(ErrorCategory::internal);
}

}  // namespace homog
