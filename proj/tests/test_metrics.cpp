#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mmwave/metrics.hpp"
#include "mmwave/signal.hpp"

using namespace mmwave;

namespace {

LabeledSet set_of(std::initializer_list<std::pair<double, double>> positions) {
    LabeledSet s;
    std::int64_t label = 1;
    for (const auto& [px, py] : positions) {
        Eigen::Vector4d x;
        x << px, 0.0, py, 0.0;
        s.items.emplace_back(label++, x);
    }
    return s;
}

double brute_force_assignment(const Eigen::MatrixXd& cost) {
    const int n = static_cast<int>(cost.rows());
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double tot = 0.0;
        for (int i = 0; i < n; ++i) tot += cost(i, perm[i]);
        best = std::min(best, tot);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

}  // namespace

TEST_CASE("hungarian matches brute force on random matrices") {
    Rng rng(3);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (int n = 1; n <= 5; ++n) {
        for (int rep = 0; rep < 20; ++rep) {
            Eigen::MatrixXd cost(n, n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) cost(i, j) = u(rng);
            const std::vector<int> match = hungarian(cost);
            double tot = 0.0;
            std::vector<bool> used(n, false);
            for (int i = 0; i < n; ++i) {
                REQUIRE(match[i] >= 0);
                REQUIRE(!used[match[i]]);
                used[match[i]] = true;
                tot += cost(i, match[i]);
            }
            CHECK(tot == doctest::Approx(brute_force_assignment(cost)).epsilon(1e-12));
        }
    }
}

TEST_CASE("ospa basics") {
    SUBCASE("identical sets give zero") {
        const LabeledSet X = set_of({{1.0, 2.0}, {-3.0, 7.0}});
        CHECK(ospa(X, X, 1.0, 10.0) == doctest::Approx(0.0));
    }
    SUBCASE("empty versus two gives the cutoff") {
        const LabeledSet X;
        const LabeledSet Y = set_of({{1.0, 2.0}, {5.0, 5.0}});
        CHECK(ospa(X, Y, 1.0, 10.0) == doctest::Approx(10.0));
    }
    SUBCASE("both empty gives zero") {
        CHECK(ospa({}, {}, 1.0, 10.0) == doctest::Approx(0.0));
    }
    SUBCASE("optimal pairing beats the crossed one") {
        // truth at 0 and 4; estimates at 1 and 3: straight pairing costs
        // (1,1), crossed costs (3,3)
        const LabeledSet X = set_of({{0.0, 0.0}, {4.0, 0.0}});
        const LabeledSet Y = set_of({{1.0, 0.0}, {3.0, 0.0}});
        CHECK(ospa(X, Y, 1.0, 10.0) == doctest::Approx(1.0));
    }
    SUBCASE("cardinality penalty") {
        const LabeledSet X = set_of({{0.0, 0.0}});
        const LabeledSet Y = set_of({{0.0, 0.0}, {100.0, 0.0}});
        // one perfect match plus one unmatched at cutoff 10, normalized by 2
        CHECK(ospa(X, Y, 1.0, 10.0) == doctest::Approx(5.0));
    }
}

TEST_CASE("ospa properties") {
    Rng rng(8);
    std::uniform_real_distribution<double> u(-20.0, 20.0);
    std::uniform_int_distribution<int> un(0, 5);
    auto random_set = [&]() {
        LabeledSet s;
        const int n = un(rng);
        for (int i = 0; i < n; ++i) {
            Eigen::Vector4d x;
            x << u(rng), 0.0, u(rng), 0.0;
            s.items.emplace_back(i + 1, x);
        }
        return s;
    };

    SUBCASE("symmetry and cutoff bound") {
        for (int rep = 0; rep < 50; ++rep) {
            const LabeledSet X = random_set(), Y = random_set();
            const double d1 = ospa(X, Y, 1.0, 10.0);
            const double d2 = ospa(Y, X, 1.0, 10.0);
            CHECK(d1 == doctest::Approx(d2).epsilon(1e-12));
            CHECK(d1 <= 10.0 + 1e-12);
            CHECK(d1 >= 0.0);
        }
    }
    SUBCASE("triangle inequality, order 1 spot checks") {
        for (int rep = 0; rep < 30; ++rep) {
            const LabeledSet X = random_set(), Y = random_set(), Z = random_set();
            const double xy = ospa(X, Y, 1.0, 10.0);
            const double yz = ospa(Y, Z, 1.0, 10.0);
            const double xz = ospa(X, Z, 1.0, 10.0);
            CHECK(xz <= xy + yz + 1e-9);
        }
    }
    SUBCASE("relabeling does not change the distance") {
        LabeledSet X = random_set();
        if (X.items.empty()) X = set_of({{1.0, 1.0}});
        const LabeledSet Y = random_set();
        LabeledSet Xr = X;
        for (auto& [label, x] : Xr.items) label += 1000;
        std::reverse(Xr.items.begin(), Xr.items.end());
        CHECK(ospa(X, Y, 1.0, 10.0) ==
              doctest::Approx(ospa(Xr, Y, 1.0, 10.0)).epsilon(1e-12));
    }
    SUBCASE("all pairs beyond the cutoff saturate at c") {
        const LabeledSet X = set_of({{0.0, 0.0}, {0.0, 30.0}});
        const LabeledSet Y = set_of({{100.0, 0.0}, {100.0, 30.0}});
        CHECK(ospa(X, Y, 1.0, 10.0) == doctest::Approx(10.0));
        CHECK(ospa(X, Y, 2.0, 10.0) == doctest::Approx(10.0));
    }
}

TEST_CASE("mospa") {
    const LabeledSet A = set_of({{0.0, 0.0}});
    const LabeledSet B = set_of({{3.0, 0.0}});

    SUBCASE("constant series returns the constant") {
        const double d = ospa(A, B, 1.0, 10.0);
        const double m = mospa({{A, B}, {A, B}, {A, B}}, 1.0, 10.0);
        CHECK(m == doctest::Approx(d));
    }
    SUBCASE("identical sets average to zero") {
        CHECK(mospa({{A, A}, {B, B}}, 1.0, 10.0) == doctest::Approx(0.0));
    }
    SUBCASE("zero and cutoff average to half the cutoff") {
        const LabeledSet empty;
        CHECK(mospa({{A, A}, {empty, B}}, 1.0, 10.0) == doctest::Approx(5.0));
    }
    SUBCASE("empty series is rejected") {
        CHECK_THROWS(mospa({}, 1.0, 10.0));
    }
}
