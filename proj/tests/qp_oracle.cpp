#include "qp_oracle.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace lifestyle::testing {

Eigen::VectorXd brute_force_cqp(const Eigen::VectorXd& excess, const Eigen::MatrixXd& cov,
                                double alpha, double rho, double mesh) {
    const int d = static_cast<int>(excess.size());
    const long budget = std::lround(alpha / mesh);
    auto objective = [&](const std::vector<long>& n) {
        Eigen::VectorXd pi(d);
        for (int i = 0; i < d; ++i) pi(i) = static_cast<double>(n[i]) * mesh;
        return pi.dot(excess) - 0.5 * rho * pi.dot(cov * pi);
    };

    std::vector<long> best(d, 0);
    double best_val = objective(best);
    long step = 1;
    while (step * 8 < budget) step *= 2;

    std::vector<long> lo(d, 0), hi(d, budget);
    for (;;) {
        std::vector<long> cur(d);
        // Depth-first walk over the window lattice with the budget pruned early.
        std::function<void(int, long)> walk = [&](int i, long used) {
            if (i == d) {
                const double v = objective(cur);
                if (v > best_val) {
                    best_val = v;
                    best = cur;
                }
                return;
            }
            for (long n = lo[i]; n <= hi[i] && used + n <= budget; n += step) {
                cur[i] = n;
                walk(i + 1, used + n);
            }
        };
        walk(0, 0);
        if (step == 1) break;
        const long window = 3 * step;
        step /= 2;
        for (int i = 0; i < d; ++i) {
            lo[i] = std::max(0L, best[i] - window);
            hi[i] = std::min(budget, best[i] + window);
        }
    }
    Eigen::VectorXd pi(d);
    for (int i = 0; i < d; ++i) pi(i) = static_cast<double>(best[i]) * mesh;
    return pi;
}

}  // namespace lifestyle::testing
