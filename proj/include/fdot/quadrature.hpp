#pragma once

// Globally adaptive Gauss-Kronrod (7/15) integration and Gauss-Legendre rules.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "fdot/error.hpp"

namespace fdot {

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;
    int evaluations = 0;
};

namespace detail {

// Kronrod abscissae on [0, 1); odd indices are the 7-point Gauss nodes.
inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
    double a, b, value, error;
};

// One 15-point Kronrod panel with the QUADPACK error heuristic.
template <class F>
Panel gk15(F& f, double a, double b) {
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double fc = f(center);
    double resg = fc * kWg[3];
    double resk = fc * kWgk[7];
    std::array<double, 7> f1{}, f2{};
    for (std::size_t j = 0; j < 7; ++j) {
        const double dx = half * kXgk[j];
        f1[j] = f(center - dx);
        f2[j] = f(center + dx);
        resk += kWgk[j] * (f1[j] + f2[j]);
        if (j % 2 == 1) resg += kWg[j / 2] * (f1[j] + f2[j]);
    }
    const double reskh = 0.5 * resk;
    double resasc = kWgk[7] * std::abs(fc - reskh);
    for (std::size_t j = 0; j < 7; ++j) resasc += kWgk[j] * (std::abs(f1[j] - reskh) + std::abs(f2[j] - reskh));
    resasc *= std::abs(half);

    double err = std::abs((resk - resg) * half);
    if (resasc != 0.0 && err != 0.0) err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
    return {a, b, resk * half, err};
}

}  // namespace detail

/// Adaptive integral of f over consecutive intervals [breaks[i], breaks[i+1]].
///
/// Bisects the panel with the largest error until the summed estimate is below
/// max(abs_tol, rel_tol * |I|). Throws QuadratureError when `max_panels` is
/// exhausted first.
template <class F>
QuadratureResult integrate_adaptive(F&& f, std::span<const double> breaks, double rel_tol, double abs_tol,
                                    int max_panels) {
    std::vector<detail::Panel> heap;
    auto by_error = [](const detail::Panel& x, const detail::Panel& y) { return x.error < y.error; };

    double total = 0.0, total_err = 0.0;
    if (breaks.size() == 2 && breaks[1] > breaks[0]) {
        const detail::Panel only = detail::gk15(f, breaks[0], breaks[1]);
        if (only.error <= std::max(abs_tol, rel_tol * std::abs(only.value))) return {only.value, only.error, 15};
        heap.push_back(only);
        total = only.value;
        total_err = only.error;
    }
    const bool seeded = !heap.empty();
    for (std::size_t i = 0; !seeded && i + 1 < breaks.size(); ++i) {
        if (!(breaks[i + 1] > breaks[i])) continue;
        heap.push_back(detail::gk15(f, breaks[i], breaks[i + 1]));
        total += heap.back().value;
        total_err += heap.back().error;
    }
    std::make_heap(heap.begin(), heap.end(), by_error);
    int panels = int(heap.size());
    int evaluated = panels;

    while (total_err > std::max(abs_tol, rel_tol * std::abs(total))) {
        if (panels >= max_panels) {
            throw QuadratureError("adaptive quadrature did not converge (estimate " + std::to_string(total_err) +
                                      " for value " + std::to_string(total) + ")",
                                  total_err, total);
        }
        std::pop_heap(heap.begin(), heap.end(), by_error);
        const detail::Panel worst = heap.back();
        heap.pop_back();
        const double mid = 0.5 * (worst.a + worst.b);
        const detail::Panel left = detail::gk15(f, worst.a, mid);
        const detail::Panel right = detail::gk15(f, mid, worst.b);
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        heap.push_back(left);
        std::push_heap(heap.begin(), heap.end(), by_error);
        heap.push_back(right);
        std::push_heap(heap.begin(), heap.end(), by_error);
        ++panels;
        evaluated += 2;
        // Re-sum to keep round-off from drifting across many updates.
        if (panels % 64 == 0) {
            total = total_err = 0.0;
            for (const auto& p : heap) {
                total += p.value;
                total_err += p.error;
            }
        }
    }
    // Final sum in a fixed order so the result does not depend on heap history.
    std::sort(heap.begin(), heap.end(), [](const auto& x, const auto& y) { return x.a < y.a; });
    total = total_err = 0.0;
    for (const auto& p : heap) {
        total += p.value;
        total_err += p.error;
    }
    return {total, total_err, 15 * evaluated};
}

template <class F>
QuadratureResult integrate_adaptive(F&& f, double a, double b, double rel_tol, double abs_tol, int max_panels) {
    const std::array<double, 2> breaks{a, b};
    return integrate_adaptive(std::forward<F>(f), std::span<const double>(breaks), rel_tol, abs_tol, max_panels);
}

/// Vector-valued variant of integrate_adaptive: f(x, out) fills `components`
/// values at x and every component is integrated on one shared set of panels.
/// Refinement is driven by component 0 alone, so the remaining components should
/// be small perturbations of it (finite-difference neighbours, for instance).
template <class F>
std::vector<double> integrate_adaptive_shared(F&& f, std::span<const double> breaks, std::size_t components,
                                              double rel_tol, double abs_tol, int max_panels) {
    struct Slot {
        double a, b, error;
        std::size_t offset;
    };
    std::vector<double> store;
    std::vector<Slot> heap;
    std::vector<double> nodes(15 * components);
    auto by_error = [](const Slot& x, const Slot& y) { return x.error < y.error; };

    auto panel = [&](double a, double b) {
        const double center = 0.5 * (a + b);
        const double half = 0.5 * (b - a);
        // node order: center, then (center - dx_j, center + dx_j) for j = 0..6
        f(center, std::span<double>(nodes.data(), components));
        for (std::size_t j = 0; j < 7; ++j) {
            const double dx = half * detail::kXgk[j];
            f(center - dx, std::span<double>(nodes.data() + (1 + 2 * j) * components, components));
            f(center + dx, std::span<double>(nodes.data() + (2 + 2 * j) * components, components));
        }
        const std::size_t offset = store.size();
        store.resize(offset + components);
        for (std::size_t c = 0; c < components; ++c) {
            double resk = nodes[c] * detail::kWgk[7];
            for (std::size_t j = 0; j < 7; ++j)
                resk += detail::kWgk[j] * (nodes[(1 + 2 * j) * components + c] + nodes[(2 + 2 * j) * components + c]);
            store[offset + c] = resk * half;
        }
        // error heuristic on component 0
        const double fc = nodes[0];
        double resg = fc * detail::kWg[3], resk = fc * detail::kWgk[7];
        std::array<double, 7> f1{}, f2{};
        for (std::size_t j = 0; j < 7; ++j) {
            f1[j] = nodes[(1 + 2 * j) * components];
            f2[j] = nodes[(2 + 2 * j) * components];
            resk += detail::kWgk[j] * (f1[j] + f2[j]);
            if (j % 2 == 1) resg += detail::kWg[j / 2] * (f1[j] + f2[j]);
        }
        const double reskh = 0.5 * resk;
        double resasc = detail::kWgk[7] * std::abs(fc - reskh);
        for (std::size_t j = 0; j < 7; ++j)
            resasc += detail::kWgk[j] * (std::abs(f1[j] - reskh) + std::abs(f2[j] - reskh));
        resasc *= std::abs(half);
        double err = std::abs((resk - resg) * half);
        if (resasc != 0.0 && err != 0.0) err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
        return Slot{a, b, err, offset};
    };

    double total = 0.0, total_err = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        if (!(breaks[i + 1] > breaks[i])) continue;
        heap.push_back(panel(breaks[i], breaks[i + 1]));
        total += store[heap.back().offset];
        total_err += heap.back().error;
    }
    std::make_heap(heap.begin(), heap.end(), by_error);
    int panels = int(heap.size());
    while (total_err > std::max(abs_tol, rel_tol * std::abs(total))) {
        if (panels >= max_panels)
            throw QuadratureError("shared adaptive quadrature did not converge", total_err, total);
        std::pop_heap(heap.begin(), heap.end(), by_error);
        const Slot worst = heap.back();
        heap.pop_back();
        const double mid = 0.5 * (worst.a + worst.b);
        const Slot left = panel(worst.a, mid);
        const Slot right = panel(mid, worst.b);
        total += store[left.offset] + store[right.offset] - store[worst.offset];
        total_err += left.error + right.error - worst.error;
        heap.push_back(left);
        std::push_heap(heap.begin(), heap.end(), by_error);
        heap.push_back(right);
        std::push_heap(heap.begin(), heap.end(), by_error);
        ++panels;
    }
    std::sort(heap.begin(), heap.end(), [](const Slot& x, const Slot& y) { return x.a < y.a; });
    std::vector<double> result(components, 0.0);
    for (const auto& slot : heap)
        for (std::size_t c = 0; c < components; ++c) result[c] += store[slot.offset + c];
    return result;
}

/// n-point Gauss-Legendre nodes and weights on [-1, 1].
struct GaussLegendreRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

GaussLegendreRule gauss_legendre(int n);

}  // namespace fdot
