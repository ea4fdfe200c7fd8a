#include "mmwave/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace mmwave {

// Shortest augmenting path assignment (Jonker-Volgenant style) with
// potentials; O(n^3).
std::vector<int> hungarian(const Eigen::MatrixXd& cost) {
    const int n = static_cast<int>(cost.rows());
    if (cost.cols() != n) throw std::invalid_argument("hungarian: square matrix required");
    if (n == 0) return {};
    const double inf = std::numeric_limits<double>::infinity();

    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, false);
        do {
            used[j0] = true;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= n; ++j)
        if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
    return row_to_col;
}

namespace {

double position_distance(const Eigen::Vector4d& a, const Eigen::Vector4d& b) {
    return std::hypot(a[0] - b[0], a[2] - b[2]);
}

}  // namespace

double ospa(const LabeledSet& X, const LabeledSet& Y, double p, double c) {
    if (p < 1.0 || c <= 0.0) throw std::invalid_argument("ospa: need p >= 1, c > 0");
    const LabeledSet* small = &X;
    const LabeledSet* big = &Y;
    if (small->items.size() > big->items.size()) std::swap(small, big);
    const int m = static_cast<int>(small->items.size());
    const int n = static_cast<int>(big->items.size());
    if (n == 0) return 0.0;
    if (m == 0) return c;

    // Square n x n: rows beyond m cost c^p against every column, which
    // contributes the (n - m) c^p cardinality penalty for any matching.
    const double cp = std::pow(c, p);
    Eigen::MatrixXd cost(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            cost(i, j) =
                i < m ? std::pow(std::min(c, position_distance(small->items[i].second,
                                                               big->items[j].second)),
                                 p)
                      : cp;
    const std::vector<int> match = hungarian(cost);
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += cost(i, match[i]);
    return std::pow(total / n, 1.0 / p);
}

double mospa(const std::vector<std::pair<LabeledSet, LabeledSet>>& series, double p,
             double c) {
    if (series.empty()) throw std::invalid_argument("mospa: empty series");
    double tot = 0.0;
    for (const auto& [X, Y] : series) tot += ospa(X, Y, p, c);
    return tot / series.size();
}

}  // namespace mmwave
