#include "hdmi/quadrature.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>

#include "hdmi/normal.hpp"

namespace hdmi {

namespace {
using Rule = boost::math::quadrature::gauss<double, 20>;
}

double gauss_legendre_composite(const std::function<double(double)>& f, double a, double b,
                                int panels) {
    const auto& x = Rule::abscissa();
    const auto& w = Rule::weights();
    const double h = (b - a) / panels;
    const double half = 0.5 * h;
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double mid = a + (p + 0.5) * h;
        double panel = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double dx = half * x[j];
            panel += w[j] * (f(mid - dx) + f(mid + dx));
        }
        total += panel * half;
    }
    return total;
}

QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           int initial_panels, double tolerance, int max_panels) {
    int panels = std::max(1, initial_panels);
    double previous = gauss_legendre_composite(f, a, b, panels);
    while (panels < max_panels) {
        panels *= 2;
        const double current = gauss_legendre_composite(f, a, b, panels);
        if (std::abs(current - previous) < tolerance) return {current, panels, true};
        previous = current;
    }
    return {previous, panels, false};
}

double standard_normal_expectation(const std::function<double(double)>& f, double feature_width,
                                   double tolerance) {
    const double width = std::clamp(feature_width, 1e-4, 1.0);
    const int panels = static_cast<int>(std::ceil(24.0 / width / 2.0));
    const auto g = [&](double z) { return normal_pdf(z) * f(z); };
    return integrate(g, -12.0, 12.0, std::max(8, panels), tolerance, 1 << 20).value;
}

}  // namespace hdmi
