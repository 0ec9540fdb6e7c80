#pragma once

#include <cmath>
#include <functional>

namespace hdmi {

struct QuadratureResult {
    double value = 0.0;
    int panels = 0;
    bool converged = false;
};

/// Composite 20-point Gauss-Legendre rule over [a, b] with `panels` equal panels.
double gauss_legendre_composite(const std::function<double(double)>& f, double a, double b,
                                int panels);

/// Composite Gauss-Legendre with the panel count doubled from `initial_panels`
/// until two successive estimates differ by less than `tolerance`.
QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           int initial_panels, double tolerance = 1e-12,
                           int max_panels = 1 << 16);

/// E[f(Z)] for Z ~ N(0, 1), truncated to |z| <= 12 (tail mass < 1e-32).
/// `feature_width` is the smallest length scale of f; panels are sized to it.
double standard_normal_expectation(const std::function<double(double)>& f,
                                   double feature_width = 1.0, double tolerance = 1e-13);

}  // namespace hdmi
