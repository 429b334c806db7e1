#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <span>
#include <vector>

namespace loko::detail {

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;
    int evaluations = 0;
    bool converged = false;
};

namespace gk15 {

// Kronrod abscissae on [0, 1]; odd indices are the embedded 7-point Gauss nodes.
inline constexpr std::array<double, 8> nodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kronrod_weights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> gauss_weights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
    double a, b, value, error;
    bool operator<(const Panel& o) const noexcept { return error < o.error; }
};

template <class F>
Panel evaluate(F& f, double a, double b, int& evals) {
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double fc = f(center);
    double kronrod = fc * kronrod_weights[7];
    double gauss = fc * gauss_weights[3];
    for (int i = 0; i < 7; ++i) {
        const double dx = half * nodes[i];
        const double sum = f(center - dx) + f(center + dx);
        kronrod += kronrod_weights[i] * sum;
        if (i % 2 == 1) gauss += gauss_weights[i / 2] * sum;
    }
    evals += 15;
    return {a, b, kronrod * half, std::abs((kronrod - gauss) * half)};
}

}  // namespace gk15

/// Globally adaptive 7/15-point Gauss-Kronrod quadrature over the panels
/// delimited by `breakpoints` (sorted, at least two entries).
template <class F>
QuadratureResult integrate_adaptive(F&& f, std::span<const double> breakpoints, double rel_tol, double abs_tol,
                                    int max_panels = 4000) {
    QuadratureResult out;
    std::priority_queue<gk15::Panel> heap;
    double total = 0.0;
    double err = 0.0;
    for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
        if (!(breakpoints[i + 1] > breakpoints[i])) continue;
        auto p = gk15::evaluate(f, breakpoints[i], breakpoints[i + 1], out.evaluations);
        total += p.value;
        err += p.error;
        heap.push(p);
    }
    int panels = static_cast<int>(heap.size());
    while (!heap.empty() && err > std::max(abs_tol, rel_tol * std::abs(total)) && panels < max_panels) {
        const auto worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        auto left = gk15::evaluate(f, worst.a, mid, out.evaluations);
        auto right = gk15::evaluate(f, mid, worst.b, out.evaluations);
        total += left.value + right.value - worst.value;
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        ++panels;
    }
    // Re-sum to shed the drift of the incremental updates.
    total = 0.0;
    err = 0.0;
    while (!heap.empty()) {
        total += heap.top().value;
        err += heap.top().error;
        heap.pop();
    }
    out.value = total;
    out.error = err;
    out.converged = err <= std::max(abs_tol, rel_tol * std::abs(total));
    return out;
}

}  // namespace loko::detail
