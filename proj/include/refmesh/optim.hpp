#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <functional>
#include <vector>

namespace refmesh {

// Compact Nelder-Mead simplex minimizer for low-dimensional derivative-free
// refinement. Deterministic for a fixed start and step.
inline Eigen::VectorXd nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& start, double step, int max_iters,
                                   double* best_value = nullptr) {
    const int n = static_cast<int>(start.size());
    std::vector<std::pair<double, Eigen::VectorXd>> simplex;
    simplex.reserve(n + 1);
    simplex.emplace_back(f(start), start);
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd p = start;
        p[i] += step;
        simplex.emplace_back(f(p), p);
    }
    auto by_value = [](const auto& a, const auto& b) { return a.first < b.first; };

    for (int iter = 0; iter < max_iters; ++iter) {
        std::sort(simplex.begin(), simplex.end(), by_value);
        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (int i = 0; i < n; ++i) centroid += simplex[i].second;
        centroid /= n;

        const auto& worst = simplex[n];
        const Eigen::VectorXd reflected = centroid + (centroid - worst.second);
        const double fr = f(reflected);
        if (fr < simplex[0].first) {
            const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - worst.second);
            const double fe = f(expanded);
            simplex[n] = fe < fr ? std::make_pair(fe, expanded) : std::make_pair(fr, reflected);
        } else if (fr < simplex[n - 1].first) {
            simplex[n] = {fr, reflected};
        } else {
            const Eigen::VectorXd contracted = centroid + 0.5 * (worst.second - centroid);
            const double fc = f(contracted);
            if (fc < worst.first) {
                simplex[n] = {fc, contracted};
            } else {
                for (int i = 1; i <= n; ++i) {
                    simplex[i].second = simplex[0].second +
                                        0.5 * (simplex[i].second - simplex[0].second);
                    simplex[i].first = f(simplex[i].second);
                }
            }
        }
        if (simplex[n].first - simplex[0].first < 1e-14 * (std::abs(simplex[0].first) + 1e-30))
            break;
    }
    std::sort(simplex.begin(), simplex.end(), by_value);
    if (best_value) *best_value = simplex[0].first;
    return simplex[0].second;
}

}  // namespace refmesh
