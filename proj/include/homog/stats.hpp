#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "homog/cell.hpp"
#include "homog/field.hpp"
#include "homog/law.hpp"
#include "json.hpp"

namespace homog {

//---------------------------------------------------------------------------//
/*!
 * Monte Carlo statistics of a(box_n), a_*(box_n) over N independent samples.
 *
 * Sample i is the field of law with master seed sample_seed(master_seed, i),
 * centered on the origin. Cell values depend only on the seed and the
 * lattice point, so studies at different scales with the same master seed
 * share their fields on the nested cubes (sample coupling).
 */
struct ScaleStudy {
    MarginalLaw law = MarginalLaw::constant(1.0);
    int dim = 0;
    int n = 0;
    int N = 0;
    int res = 0;
    std::uint64_t master_seed = 0;

    Mat mean_a;
    Mat se_a;
    Mat mean_a_star_inv;
    Mat se_a_star_inv;
    /// (mean a_*^{-1})^{-1}
    Mat abar_n;
    double mean_Lam = 0.0;
    double mean_inv_lam = 0.0;

    /// Per-sample matrices in sample order.
    std::vector<Mat> a_samples;
    std::vector<Mat> a_star_inv_samples;

    /// E|a(box_n) - abar_ref|^2 (operator norm), set by set_reference.
    std::optional<Mat> abar_ref;
    double sq_error = 0.0;
    double sq_error_se = 0.0;

    /// Per-sample Omega(n) against abar_ref when requested.
    std::vector<double> omega;
    double omega_mean() const;

    double wall_ms = 0.0;
};

struct StudyOptions {
    int threads = 0;  ///< 0: HOMOG_THREADS, else 1
    SolverOptions solver{};
};

/// Errors in sample i are rethrown as the same category with the index in the message.
ScaleStudy run_scale_study(const MarginalLaw& law, int dim, int n, int N, int res,
                           std::uint64_t master_seed, const StudyOptions& opts = {});

/// Fill sq_error / sq_error_se against the given reference.
void set_reference(ScaleStudy& s, const Mat& abar_ref);

/// Omega(n) for every sample of the study (same fields, same res).
void attach_omega(ScaleStudy& s, const Mat& abar_ref, const StudyOptions& opts = {});

//---------------------------------------------------------------------------//
struct AbarEstimate {
    Mat abar;  ///< E a(box_{n_max})
    Mat se;
    int n = 0;
    /// E[lam(box_0)^{-1}]^{-1} and E[Lam(box_0)].
    double lower = 0.0;
    double upper = 0.0;
    /// E[avg |a^{-1}|]^{-1} and E[avg |a|] over the unit cells.
    double lower_refined = 0.0;
    double upper_refined = 0.0;
    /// Strictly inside the refined bracket beyond 3 standard errors.
    bool strictly_inside = false;
};

/// Throws StudyInconsistencyError when a bracket fails beyond 3 standard errors.
AbarEstimate estimate_abar(const std::vector<ScaleStudy>& studies);

struct TauEstimate {
    int n = 0;
    double tau = 0.0;
    /// Top eigenvalues before clamping; negative values are clamped to 0.
    double mu_part_raw = 0.0;
    double mu_star_part_raw = 0.0;
    bool clamped = false;
    /// Standard error of the paired differences (coupled) or combined (independent).
    double se = 0.0;
    bool coupled = false;
};

TauEstimate estimate_tau(const ScaleStudy& study_n, const ScaleStudy& study_n1);

//---------------------------------------------------------------------------//
/*!
 * Omega(n) = ( sum_{m=0}^n 3^{-(n-m)} (3^{-(n-m)d} sum_z |a(z + box_m) - abar|)^{1/2} )^2
 * over the subcubes z + box_m of the centered box_n, operator norm.
 */
double compute_omega(const CheckerboardField& field, int n, const Mat& abar_ref, int res,
                     SolverOptions opts = {});

/// Per-level inner sums sum_z |a(z + box_m) - abar| for m = 0..n.
std::vector<double> omega_levels(const CheckerboardField& field, int n, const Mat& abar_ref,
                                 int res, SolverOptions opts = {});

//---------------------------------------------------------------------------//
struct SuppressiveRow {
    int n = 0;
    double delta = 0.0;  ///< (n+1)^{-gamma'}
    double M = 0.0;      ///< (n+1)^{beta'}
    double upper_moment = 0.0;  ///< E[Lam^3; Lam >= M]
    double lower_moment = 0.0;  ///< E[lam^-3; lam <= delta]
    double moment() const { return upper_moment + lower_moment; }
};

struct SuppressiveProfile {
    double beta_prime = 0.0;
    double gamma_prime = 0.0;
    int dim = 0;
    std::vector<SuppressiveRow> rows;
    /// max_n moment(n) e^n
    double L = 0.0;
    /// moment(n) e^n non-increasing over the last two scales.
    bool consistent = false;
};

/// Lam(box_n), lam(box_n): max and min of 3^{nd} i.i.d. cells.
SuppressiveProfile suppressive_profile(const MarginalLaw& law, int dim, double beta_prime,
                                       double gamma_prime, int n_max);

struct TruncatedMomentMc {
    double mean = 0.0;
    double se = 0.0;
};

/// Monte Carlo E[Lam^3; Lam >= M] + E[lam^-3; lam <= delta] for one scale.
TruncatedMomentMc truncated_moment_mc(const MarginalLaw& law, int dim, int n, double delta,
                                      double M, std::int64_t samples, std::uint64_t seed);

//---------------------------------------------------------------------------//
struct ConvergenceRow {
    int n = 0;
    double sq_error = 0.0;
    double sq_error_se = 0.0;
    /// sq_error(n) - sq_error(n+1) over 2 se of the paired difference.
    double drop_over_2se = 0.0;
    double tau = 0.0;
    double omega_mean = 0.0;
    /// |a_res - a_2res| on sample 0 (operator norm), when probed.
    double discretization = -1.0;
};

struct LogFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

struct ConvergenceReport {
    std::vector<ScaleStudy> studies;
    std::vector<ConvergenceRow> rows;
    Mat abar_ref;
    std::string reference;  ///< "closed_form" or "largest_scale"
    bool coupled = true;
    bool strictly_decreasing = false;
    /// alpha in (1/beta + 1/gamma, 1/3), midpoint; NaN when the interval is empty.
    double alpha = 0.0;
    /// log error against n^{1-3 alpha}, against n, and against log(n+1).
    LogFit fit_stretched;
    LogFit fit_exponential;
    LogFit fit_power;
};

struct ConvergenceOptions {
    StudyOptions study{};
    bool closed_form_reference = true;
    bool with_omega = false;
    bool discretization_probe = false;
};

ConvergenceReport convergence_study(const MarginalLaw& law, int dim, const std::vector<int>& n_range,
                                    int N, int res, std::uint64_t master_seed,
                                    const ConvergenceOptions& opts = {});

//---------------------------------------------------------------------------//
/// Monotonicity of mean mu(p), mean mu_*(q), mean J(p, q) across consecutive studies.
struct MonotonicityRow {
    int n = 0;
    std::string quantity;
    int probe = 0;
    double value_n = 0.0;
    double value_n1 = 0.0;
    double se = 0.0;
    bool holds = false;  ///< value_n1 <= value_n + 2 se
};

std::vector<MonotonicityRow> monotonicity_rows(const std::vector<ScaleStudy>& studies);

//---------------------------------------------------------------------------//
/// One CSV row per study; wall time written only when timings is true.
std::string studies_csv(const std::vector<ScaleStudy>& studies, const std::vector<double>& tau,
                        bool timings);
std::string convergence_csv(const ConvergenceReport& r);

void to_json(nlohmann::json& j, const ScaleStudy& s);
void to_json(nlohmann::json& j, const AbarEstimate& a);
void to_json(nlohmann::json& j, const TauEstimate& t);
void to_json(nlohmann::json& j, const SuppressiveProfile& p);
void to_json(nlohmann::json& j, const ConvergenceReport& r);

}  // namespace homog
