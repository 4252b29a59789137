#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace resdiff {

/// Variance rule for the reverse transfer distribution.
///   kDdim:           eta * (1-ad[t-1])/(1-ad[t]) * (1 - ad[t]/ad[t-1]), the
///                    classic implicit-sampler schedule (ad = product-form
///                    cumulative of the source schedule).
///   kSumConstrained: eta * beta_sq[t] * beta_bar[t-1]^2 / beta_bar[t]^2; the
///                    per-step variances then sum to at most beta_bar_T^2.
enum class VarianceMode { kDdim, kSumConstrained };

enum class DdimFamily { kLinear, kScaledLinear, kSquaredCosine };

enum class AdjustMode { kNone, kAlpha, kBeta, kAlphaBeta };

std::string to_string(VarianceMode mode);
std::string to_string(DdimFamily family);
std::string to_string(AdjustMode mode);
VarianceMode variance_mode_from_string(const std::string& s);
DdimFamily ddim_family_from_string(const std::string& s);
AdjustMode adjust_mode_from_string(const std::string& s);

/// Product-form schedule of a denoising sampler: cumulative alpha in (0,1],
/// strictly decreasing in t. Index 0 holds the empty product 1.
struct DdimSchedule {
    int T = 0;
    std::vector<double> alpha_bar;  // size T+1, alpha_bar[0] == 1
    DdimFamily family = DdimFamily::kLinear;

    double at(int t) const { return alpha_bar[static_cast<std::size_t>(t)]; }
};

/// Decoupled residual/noise coefficient schedule.
///
/// Arrays are 1-indexed over t in {1..T}; index 0 holds the defined
/// boundary values alpha_bar[0] = beta_bar[0] = 0 (and sigma[0] = 0) so the
/// reverse step at t = 1 needs no special case.
struct CoefficientSchedule {
    int T = 0;
    std::vector<double> alpha;      // residual rate per step
    std::vector<double> beta_sq;    // noise-variance rate per step
    std::vector<double> alpha_bar;  // running sum of alpha
    std::vector<double> beta_bar;   // sqrt of running sum of beta_sq
    std::vector<double> sigma;      // per-step reverse stddev (adjacent steps)
    double eta = 0.0;
    double beta_bar_T_sq = 1.0;
    VarianceMode variance_mode = VarianceMode::kSumConstrained;

    double alpha_bar_at(int t) const { return alpha_bar[static_cast<std::size_t>(t)]; }
    double beta_bar_at(int t) const { return beta_bar[static_cast<std::size_t>(t)]; }
    double sigma_at(int t) const { return sigma[static_cast<std::size_t>(t)]; }

    void validate() const;  // throws on any violated structural invariant
};

/// Discretized normalized power density (a+1)*x^a sampled at x = t/T
/// (or 1 - t/T when decreasing), rescaled so the sum is exactly `total`.
std::vector<double> power_schedule(int T, double a, bool decreasing, double total);

DdimSchedule make_ddim_schedule(int T, DdimFamily family);

/// Coefficient transformation from a product-form schedule:
///   alpha_bar[t] = 1 - sqrt(ad[t]),  beta_bar[t] = sqrt(1 - ad[t]),
/// per-step values recovered by differencing, sigma per `mode`.
CoefficientSchedule schedule_from_ddim(const DdimSchedule& d, double eta, VarianceMode mode);

/// Inverse transformation; requires (1-alpha_bar)^2 + beta_bar^2 = 1 within
/// 1e-9 at every t (only schedules on that manifold are invertible).
DdimSchedule schedule_to_ddim(const CoefficientSchedule& s);

/// Direct construction from the power family: alpha steps from
/// P(1-x, alpha_a) summing to 1, beta_sq steps from P(x, beta_a) summing to
/// beta_bar_T_sq. alpha_a = beta_a = 0 gives the constant-rate schedule;
/// exponent 1 the linear ramps.
CoefficientSchedule make_power_schedule(int T, double alpha_a, double beta_a,
                                        double beta_bar_T_sq, double eta);

/// Replaces the selected cumulative family with renormalized power-family
/// values (alpha from P(1-x, a), beta_sq from P(x, a) scaled by the stored
/// beta_bar_T_sq), leaving the other family untouched. A positive
/// `beta_bar_T_sq_override` retargets the terminal noise variance while
/// adjusting the beta side (the test-time noise-intensity transformation).
CoefficientSchedule adjust_schedule(const CoefficientSchedule& s, AdjustMode mode, double a,
                                    double beta_bar_T_sq_override = 0.0);

/// Reverse-transfer standard deviation for a step from t to t_prev < t,
/// honoring the schedule's variance mode. Adjacent steps reproduce sigma[t].
double gap_sigma(const CoefficientSchedule& s, int t, int t_prev, double eta);

// CSV round-trip: header row, one row per t, 17 significant digits.
void write_schedule_csv(std::ostream& os, const CoefficientSchedule& s);
void write_schedule_csv(const std::string& path, const CoefficientSchedule& s);
CoefficientSchedule read_schedule_csv(std::istream& is);
CoefficientSchedule read_schedule_csv(const std::string& path);

}  // namespace resdiff
