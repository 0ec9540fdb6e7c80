#include "hdmi/pik.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "hdmi/error.hpp"
#include "hdmi/normal.hpp"
#include "hdmi/quadrature.hpp"

namespace hdmi::pik {

namespace {

void check_k(int k) {
    if (k < 2) throw DomainError("class count k must be >= 2, got " + std::to_string(k));
}

}  // namespace

double gaussian_max_exceedance(double mu, double nu2, int k) {
    check_k(k);
    if (!(nu2 > 0.0) || !std::isfinite(nu2))
        throw DomainError("nu2 must be a finite positive variance");
    if (!std::isfinite(mu)) throw DomainError("mu must be finite");

    const double nu = std::sqrt(nu2);
    const double km1 = k - 1.0;
    // 1 - Phi^{k-1} via expm1 keeps relative precision when the answer is tiny.
    const auto integrand = [&](double w) {
        const double z = (w - mu) / nu;
        return normal_pdf(z) / nu * -std::expm1(km1 * log_normal_cdf(w));
    };

    // Truncate at 10 standard deviations of the Gaussian factor (and never
    // narrower than +-10, the scale of the Phi^{k-1} transition) unless the
    // Gaussian is so narrow that its own 10-sigma window is the only region
    // with mass.
    const double half = nu >= 0.01 ? 10.0 * std::max(nu, 1.0) : 10.0 * nu;
    const double panel_width = std::min(nu, 1.0);
    const int initial = std::max(8, static_cast<int>(std::ceil(2.0 * half / (2.5 * panel_width))));
    const auto r = integrate(integrand, mu - half, mu + half, initial, 1e-12, 1 << 22);
    return std::clamp(r.value, 0.0, 1.0);
}

double pi_k(int k, double c) {
    check_k(k);
    if (!std::isfinite(c)) throw DomainError("separation c must be finite");
    return gaussian_max_exceedance(c, 1.0, k);
}

double pi_k_inverse(double e, int k) {
    check_k(k);
    if (std::isnan(e)) throw DomainError("error rate is NaN");
    if (e > 1.0) throw DomainError("error rate must be <= 1, got " + std::to_string(e));
    if (e <= 0.0)
        throw DivergenceError(
            "error rate must be > 0: the inverse diverges at zero error; apply smoothing "
            "(alpha > 0) or an explicit floor");
    const double chance = 1.0 - 1.0 / k;
    // (k - 1) / k and 1 - 1/k can differ in the last bit; both mean chance.
    if (e >= std::min(chance, static_cast<double>(k - 1) / k)) return 0.0;

    double lo = 0.0;
    double e_lo = chance;
    double hi = 1.0;
    double e_hi = pi_k(k, hi);
    while (e_hi >= e) {
        lo = hi;
        e_lo = e_hi;
        hi *= 2.0;
        if (hi > 1e6) throw DomainError("pi_k_inverse: could not bracket error rate");
        e_hi = pi_k(k, hi);
    }
    // Invariant: pi_k(lo) >= e > pi_k(hi).
    while (e_lo - e_hi >= 1e-10 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi) {
        const double mid = 0.5 * (lo + hi);
        const double e_mid = pi_k(k, mid);
        if (e_mid >= e) {
            lo = mid;
            e_lo = e_mid;
        } else {
            hi = mid;
            e_hi = e_mid;
        }
    }
    return 0.5 * (lo + hi);
}

ReducedMaxProblem reduce(const GaussianMaxProblem& p) {
    check_k(p.k);
    for (double v : {p.alpha, p.beta, p.gamma, p.delta, p.epsilon})
        if (!std::isfinite(v)) throw DomainError("moments must be finite");
    if (p.beta < 0.0) throw DomainError("requires beta = Var(Z_1) >= 0");
    const double spread = p.delta - p.epsilon;
    if (!(spread > 0.0)) throw DomainError("requires delta - epsilon > 0");
    const double shared = p.beta + p.epsilon - 2.0 * p.gamma;
    if (!(shared > 0.0)) throw DomainError("requires beta + epsilon - 2 gamma > 0");
    return {p.alpha / std::sqrt(spread), shared / spread};
}

double lemma1_exceedance(const GaussianMaxProblem& p) {
    const auto r = reduce(p);
    return gaussian_max_exceedance(r.mu, r.nu2, p.k);
}

}  // namespace hdmi::pik
