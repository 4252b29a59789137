#include "resdiff/schedule.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "resdiff/io.hpp"

namespace resdiff {

namespace {

constexpr double kNormTol = 1e-12;

void recompute_sum_constrained_sigma(CoefficientSchedule& s) {
    s.sigma.assign(static_cast<std::size_t>(s.T) + 1, 0.0);
    for (int t = 1; t <= s.T; ++t) {
        const double bb = s.beta_bar[t];
        const double bb_prev = s.beta_bar[t - 1];
        if (bb <= 0.0) {
            s.sigma[t] = 0.0;
            continue;
        }
        s.sigma[t] = std::sqrt(s.eta * s.beta_sq[t] * (bb_prev * bb_prev) / (bb * bb));
    }
}

void rebuild_cumulatives(CoefficientSchedule& s) {
    const std::size_t n = static_cast<std::size_t>(s.T) + 1;
    s.alpha_bar.assign(n, 0.0);
    s.beta_bar.assign(n, 0.0);
    double asum = 0.0, bsum = 0.0;
    for (int t = 1; t <= s.T; ++t) {
        asum += s.alpha[t];
        bsum += s.beta_sq[t];
        s.alpha_bar[t] = asum;
        s.beta_bar[t] = std::sqrt(bsum);
    }
}

}  // namespace

std::string to_string(VarianceMode mode) {
    return mode == VarianceMode::kDdim ? "ddim" : "sum-constrained";
}

std::string to_string(DdimFamily family) {
    switch (family) {
        case DdimFamily::kLinear: return "linear";
        case DdimFamily::kScaledLinear: return "scaled-linear";
        case DdimFamily::kSquaredCosine: return "squared-cosine";
    }
    return "?";
}

std::string to_string(AdjustMode mode) {
    switch (mode) {
        case AdjustMode::kNone: return "none";
        case AdjustMode::kAlpha: return "alpha";
        case AdjustMode::kBeta: return "beta";
        case AdjustMode::kAlphaBeta: return "alpha+beta";
    }
    return "?";
}

VarianceMode variance_mode_from_string(const std::string& s) {
    if (s == "ddim") return VarianceMode::kDdim;
    if (s == "sum-constrained") return VarianceMode::kSumConstrained;
    throw std::invalid_argument("unknown variance mode: " + s);
}

DdimFamily ddim_family_from_string(const std::string& s) {
    if (s == "linear") return DdimFamily::kLinear;
    if (s == "scaled-linear") return DdimFamily::kScaledLinear;
    if (s == "squared-cosine") return DdimFamily::kSquaredCosine;
    throw std::invalid_argument("unknown schedule family: " + s);
}

AdjustMode adjust_mode_from_string(const std::string& s) {
    if (s == "none") return AdjustMode::kNone;
    if (s == "alpha") return AdjustMode::kAlpha;
    if (s == "beta") return AdjustMode::kBeta;
    if (s == "alpha+beta") return AdjustMode::kAlphaBeta;
    throw std::invalid_argument("unknown adjust mode: " + s);
}

void CoefficientSchedule::validate() const {
    const std::size_t n = static_cast<std::size_t>(T) + 1;
    if (T < 1) throw std::invalid_argument("schedule: T must be >= 1");
    if (alpha.size() != n || beta_sq.size() != n || alpha_bar.size() != n ||
        beta_bar.size() != n || sigma.size() != n) {
        throw std::invalid_argument("schedule: array sizes do not match T+1");
    }
    if (alpha_bar[0] != 0.0 || beta_bar[0] != 0.0) {
        throw std::invalid_argument("schedule: boundary cumulatives at t=0 must be 0");
    }
    double asum = 0.0, bsum = 0.0;
    for (int t = 1; t <= T; ++t) {
        if (alpha[t] < 0.0) throw std::invalid_argument("schedule: alpha[t] < 0 at t=" + std::to_string(t));
        if (beta_sq[t] < 0.0) throw std::invalid_argument("schedule: beta_sq[t] < 0 at t=" + std::to_string(t));
        asum += alpha[t];
        bsum += beta_sq[t];
        if (std::fabs(alpha_bar[t] - asum) > 1e-9 || std::fabs(beta_bar[t] * beta_bar[t] - bsum) > 1e-9) {
            throw std::invalid_argument("schedule: cumulative inconsistent with per-step values at t=" +
                                        std::to_string(t));
        }
        // Only the sum-constrained rule stays within the single-step budget;
        // the reference variance mode can exceed it.
        if (variance_mode == VarianceMode::kSumConstrained &&
            sigma[t] * sigma[t] > beta_sq[t] + 1e-9) {
            throw std::invalid_argument("schedule: sigma[t]^2 exceeds beta_sq[t] at t=" + std::to_string(t));
        }
    }
}

std::vector<double> power_schedule(int T, double a, bool decreasing, double total) {
    if (T < 1) throw std::invalid_argument("power_schedule: T must be >= 1");
    if (a < 0.0) throw std::invalid_argument("power_schedule: exponent must be >= 0");
    if (total <= 0.0) throw std::invalid_argument("power_schedule: total must be > 0");
    std::vector<double> v(static_cast<std::size_t>(T) + 1, 0.0);
    double sum = 0.0;
    for (int t = 1; t <= T; ++t) {
        const double x = decreasing ? 1.0 - static_cast<double>(t) / T
                                    : static_cast<double>(t) / T;
        v[t] = (a + 1.0) * std::pow(x, a) * (total / T);
        sum += v[t];
    }
    if (sum <= 0.0) throw std::invalid_argument("power_schedule: degenerate (all-zero) density");
    const double correction = total / sum;
    for (int t = 1; t <= T; ++t) v[t] *= correction;
    return v;
}

DdimSchedule make_ddim_schedule(int T, DdimFamily family) {
    if (T < 1) throw std::invalid_argument("make_ddim_schedule: T must be >= 1");
    DdimSchedule d;
    d.T = T;
    d.family = family;
    d.alpha_bar.assign(static_cast<std::size_t>(T) + 1, 1.0);

    std::vector<double> beta(static_cast<std::size_t>(T) + 1, 0.0);
    switch (family) {
        case DdimFamily::kLinear: {
            const double lo = 0.0001, hi = 0.02;
            for (int t = 1; t <= T; ++t) {
                beta[t] = (T == 1) ? lo : lo + (hi - lo) * (t - 1) / static_cast<double>(T - 1);
            }
            break;
        }
        case DdimFamily::kScaledLinear: {
            const double lo = std::sqrt(0.00085), hi = std::sqrt(0.012);
            for (int t = 1; t <= T; ++t) {
                const double r = (T == 1) ? lo : lo + (hi - lo) * (t - 1) / static_cast<double>(T - 1);
                beta[t] = r * r;
            }
            break;
        }
        case DdimFamily::kSquaredCosine: {
            const double s = 0.008;
            auto f = [&](double t) {
                const double arg = ((t / T + s) / (1.0 + s)) * std::numbers::pi / 2.0;
                const double c = std::cos(arg);
                return c * c;
            };
            const double f0 = f(0.0);
            double prev = 1.0;
            for (int t = 1; t <= T; ++t) {
                const double target = f(static_cast<double>(t)) / f0;
                beta[t] = std::min(1.0 - target / prev, 0.999);
                prev = target;
            }
            break;
        }
    }
    double prod = 1.0;
    for (int t = 1; t <= T; ++t) {
        prod *= 1.0 - beta[t];
        d.alpha_bar[t] = prod;
        if (!(d.alpha_bar[t] > 0.0) || d.alpha_bar[t] >= d.alpha_bar[t - 1]) {
            throw std::domain_error("make_ddim_schedule: cumulative not strictly decreasing at t=" +
                                    std::to_string(t));
        }
    }
    return d;
}

CoefficientSchedule schedule_from_ddim(const DdimSchedule& d, double eta, VarianceMode mode) {
    if (d.T < 1 || d.alpha_bar.size() != static_cast<std::size_t>(d.T) + 1) {
        throw std::invalid_argument("schedule_from_ddim: malformed input schedule");
    }
    for (int t = 1; t <= d.T; ++t) {
        if (!(d.at(t) > 0.0) || d.at(t) >= d.at(t - 1)) {
            throw std::invalid_argument("schedule_from_ddim: input not strictly decreasing at t=" +
                                        std::to_string(t));
        }
    }
    CoefficientSchedule s;
    s.T = d.T;
    s.eta = eta;
    s.variance_mode = mode;
    const std::size_t n = static_cast<std::size_t>(d.T) + 1;
    s.alpha.assign(n, 0.0);
    s.beta_sq.assign(n, 0.0);
    s.alpha_bar.assign(n, 0.0);
    s.beta_bar.assign(n, 0.0);
    s.sigma.assign(n, 0.0);
    for (int t = 1; t <= d.T; ++t) {
        s.alpha_bar[t] = 1.0 - std::sqrt(d.at(t));
        s.beta_bar[t] = std::sqrt(1.0 - d.at(t));
        s.alpha[t] = s.alpha_bar[t] - s.alpha_bar[t - 1];
        s.beta_sq[t] = s.beta_bar[t] * s.beta_bar[t] - s.beta_bar[t - 1] * s.beta_bar[t - 1];
    }
    s.beta_bar_T_sq = s.beta_bar[d.T] * s.beta_bar[d.T];
    if (mode == VarianceMode::kSumConstrained) {
        recompute_sum_constrained_sigma(s);
    } else {
        for (int t = 1; t <= d.T; ++t) {
            const double prev = d.at(t - 1);
            const double cur = d.at(t);
            const double var = eta * ((1.0 - prev) / (1.0 - cur)) * (1.0 - cur / prev);
            s.sigma[t] = std::sqrt(std::max(0.0, var));
        }
    }
    return s;
}

DdimSchedule schedule_to_ddim(const CoefficientSchedule& s) {
    DdimSchedule d;
    d.T = s.T;
    d.alpha_bar.assign(static_cast<std::size_t>(s.T) + 1, 1.0);
    for (int t = 1; t <= s.T; ++t) {
        const double one_minus = 1.0 - s.alpha_bar[t];
        const double compat = one_minus * one_minus + s.beta_bar[t] * s.beta_bar[t];
        if (std::fabs(compat - 1.0) > 1e-9) {
            throw std::domain_error(
                "schedule_to_ddim: (1-alpha_bar)^2 + beta_bar^2 = " + std::to_string(compat) +
                " != 1 at t=" + std::to_string(t) + "; schedule is not product-form convertible");
        }
        d.alpha_bar[t] = one_minus * one_minus;
    }
    return d;
}

CoefficientSchedule make_power_schedule(int T, double alpha_a, double beta_a,
                                        double beta_bar_T_sq, double eta) {
    if (beta_bar_T_sq <= 0.0) {
        throw std::invalid_argument("make_power_schedule: terminal noise variance must be > 0");
    }
    CoefficientSchedule s;
    s.T = T;
    s.eta = eta;
    s.beta_bar_T_sq = beta_bar_T_sq;
    s.variance_mode = VarianceMode::kSumConstrained;
    s.alpha = power_schedule(T, alpha_a, /*decreasing=*/true, 1.0);
    s.beta_sq = power_schedule(T, beta_a, /*decreasing=*/false, beta_bar_T_sq);
    rebuild_cumulatives(s);
    recompute_sum_constrained_sigma(s);
    return s;
}

CoefficientSchedule adjust_schedule(const CoefficientSchedule& s, AdjustMode mode, double a,
                                    double beta_bar_T_sq_override) {
    if (mode == AdjustMode::kNone) return s;
    CoefficientSchedule out = s;
    const bool touch_alpha = mode == AdjustMode::kAlpha || mode == AdjustMode::kAlphaBeta;
    const bool touch_beta = mode == AdjustMode::kBeta || mode == AdjustMode::kAlphaBeta;
    if (touch_alpha) out.alpha = power_schedule(s.T, a, /*decreasing=*/true, 1.0);
    if (touch_beta) {
        if (beta_bar_T_sq_override > 0.0) out.beta_bar_T_sq = beta_bar_T_sq_override;
        out.beta_sq = power_schedule(s.T, a, /*decreasing=*/false, out.beta_bar_T_sq);
    }
    rebuild_cumulatives(out);
    if (touch_beta) {
        // Stored sigma refers to the old noise family; rebuild it.
        recompute_sum_constrained_sigma(out);
        out.variance_mode = VarianceMode::kSumConstrained;
    }
    return out;
}

double gap_sigma(const CoefficientSchedule& s, int t, int t_prev, double eta) {
    if (t_prev >= t || t < 1 || t > s.T || t_prev < 0) {
        throw std::invalid_argument("gap_sigma: need 0 <= t_prev < t <= T, got t=" +
                                    std::to_string(t) + " t_prev=" + std::to_string(t_prev));
    }
    if (eta == 0.0) return 0.0;
    if (s.variance_mode == VarianceMode::kDdim) {
        const double ad_t = (1.0 - s.alpha_bar[t]) * (1.0 - s.alpha_bar[t]);
        const double ad_p = (1.0 - s.alpha_bar[t_prev]) * (1.0 - s.alpha_bar[t_prev]);
        const double var = eta * ((1.0 - ad_p) / (1.0 - ad_t)) * (1.0 - ad_t / ad_p);
        return std::sqrt(std::max(0.0, var));
    }
    const double bb_t_sq = s.beta_bar[t] * s.beta_bar[t];
    const double bb_p_sq = s.beta_bar[t_prev] * s.beta_bar[t_prev];
    if (bb_t_sq <= 0.0) return 0.0;
    return std::sqrt(eta * (bb_t_sq - bb_p_sq) * bb_p_sq / bb_t_sq);
}

void write_schedule_csv(std::ostream& os, const CoefficientSchedule& s) {
    os << "t,alpha,beta_sq,alpha_bar,beta_bar,sigma\n";
    for (int t = 1; t <= s.T; ++t) {
        os << t << ',' << format_g17(s.alpha[t]) << ',' << format_g17(s.beta_sq[t]) << ','
           << format_g17(s.alpha_bar[t]) << ',' << format_g17(s.beta_bar[t]) << ','
           << format_g17(s.sigma[t]) << '\n';
    }
}

void write_schedule_csv(const std::string& path, const CoefficientSchedule& s) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    write_schedule_csv(os, s);
}

CoefficientSchedule read_schedule_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("t,alpha,beta_sq", 0) != 0) {
        throw std::runtime_error("schedule CSV: missing or malformed header row");
    }
    CoefficientSchedule s;
    std::vector<std::array<double, 5>> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::array<double, 6> vals{};
        for (int c = 0; c < 6; ++c) {
            if (!std::getline(ls, cell, ',')) throw std::runtime_error("schedule CSV: short row");
            vals[static_cast<std::size_t>(c)] = std::stod(cell);
        }
        if (static_cast<int>(vals[0]) != static_cast<int>(rows.size()) + 1) {
            throw std::runtime_error("schedule CSV: non-contiguous t index");
        }
        rows.push_back({vals[1], vals[2], vals[3], vals[4], vals[5]});
    }
    const int T = static_cast<int>(rows.size());
    if (T < 1) throw std::runtime_error("schedule CSV: no rows");
    s.T = T;
    const std::size_t n = static_cast<std::size_t>(T) + 1;
    s.alpha.assign(n, 0.0);
    s.beta_sq.assign(n, 0.0);
    s.alpha_bar.assign(n, 0.0);
    s.beta_bar.assign(n, 0.0);
    s.sigma.assign(n, 0.0);
    for (int t = 1; t <= T; ++t) {
        const auto& r = rows[static_cast<std::size_t>(t) - 1];
        s.alpha[t] = r[0];
        s.beta_sq[t] = r[1];
        s.alpha_bar[t] = r[2];
        s.beta_bar[t] = r[3];
        s.sigma[t] = r[4];
    }
    s.beta_bar_T_sq = s.beta_bar[T] * s.beta_bar[T];
    return s;
}

CoefficientSchedule read_schedule_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open for reading: " + path);
    return read_schedule_csv(is);
}

}  // namespace resdiff
