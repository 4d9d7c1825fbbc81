#include "doctest.h"

#include <cmath>

#include "isac/array_model.hpp"

using namespace isac;

namespace {

ArrayGeometry ula(int n, double d = 0.5) { return ArrayGeometry{n, n, d}; }

double rel_err(const CVector& a, const CVector& b) { return (a - b).norm() / std::max(1e-300, b.norm()); }

}  // namespace

TEST_CASE("broadside steering is all ones") {
    const CVector a = steering(ula(4), ArraySide::Tx, 0.0);
    for (int n = 0; n < 4; ++n) CHECK(std::abs(a(n) - cplx(1, 0)) < 1e-15);
}

TEST_CASE("30 degrees gives quarter-turn phase steps") {
    const CVector a = steering(ula(4), ArraySide::Tx, deg_to_rad(30.0));
    const cplx expected[] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    for (int n = 0; n < 4; ++n) CHECK(std::abs(a(n) - expected[n]) < 1e-12);
}

TEST_CASE("45 degrees on 8 elements matches entrywise cos/sin evaluation") {
    const double th = deg_to_rad(45.0);
    const CVector a = steering(ula(8), ArraySide::Tx, th);
    for (int n = 0; n < 8; ++n) {
        const double ph = 2.0 * 3.141592653589793 * 0.5 * n * std::sin(th);
        CHECK(std::abs(a(n).real() - std::cos(ph)) < 1e-12);
        CHECK(std::abs(a(n).imag() - std::sin(ph)) < 1e-12);
        CHECK(std::abs(std::abs(a(n)) - 1.0) < 1e-12);
    }
}

TEST_CASE("tx and rx sides use their own element counts") {
    ArrayGeometry g{8, 9, 0.5};
    CHECK(steering(g, ArraySide::Tx, 0.3).size() == 8);
    CHECK(steering(g, ArraySide::Rx, 0.3).size() == 9);
}

TEST_CASE("angles outside the open interval are rejected") {
    CHECK_THROWS_AS(steering(ula(4), ArraySide::Tx, 3.141592653589793 / 2), DomainError);
    CHECK_THROWS_AS(steering(ula(4), ArraySide::Tx, -2.0), DomainError);
    CHECK_THROWS_AS(steering_derivative(ula(4), ArraySide::Rx, 1.6), DomainError);
    CHECK_THROWS_AS(steering(ula(4), ArraySide::Tx, std::nan("")), DomainError);
}

TEST_CASE("derivative at broadside for two elements") {
    const CVector d = steering_derivative(ula(2), ArraySide::Tx, 0.0);
    CHECK(std::abs(d(0)) == 0.0);
    CHECK(std::abs(d(1) - cplx(0.0, 3.141592653589793)) < 1e-12);
}

TEST_CASE("derivative matches central finite differences on a 37-point grid") {
    for (int n : {1, 3, 8, 9}) {
        for (int i = 0; i < 37; ++i) {
            const double th = -1.4 + 2.8 * i / 36.0;
            const double h = 1e-6;
            const CVector fd = (steering(ula(n), ArraySide::Tx, th + h) - steering(ula(n), ArraySide::Tx, th - h)) / (2 * h);
            const CVector d = steering_derivative(ula(n), ArraySide::Tx, th);
            CHECK(std::abs(d(0)) == 0.0);
            if (n > 1) CHECK(rel_err(d, fd) <= 1e-6);
        }
    }
}

TEST_CASE("norm and Lipschitz continuity") {
    for (int n : {1, 4, 9}) {
        const double c = 2.0 * 3.141592653589793 * 0.5 * std::pow(n, 1.5);
        for (int i = 0; i < 37; ++i) {
            const double th = -1.4 + 2.8 * i / 36.0;
            const CVector a = steering(ula(n), ArraySide::Rx, th);
            CHECK(std::abs(a.squaredNorm() - n) < 1e-12);
            for (double eps : {1e-3, 1e-5}) {
                const CVector b = steering(ula(n), ArraySide::Rx, th + eps);
                CHECK((b - a).norm() <= c * eps);
            }
        }
    }
}

TEST_CASE("geometry validation") {
    CHECK_THROWS_AS((ArrayGeometry{0, 4, 0.5}.validate()), ConfigError);
    CHECK_THROWS_AS((ArrayGeometry{4, 4, 0.0}.validate()), ConfigError);
    CHECK_NOTHROW((ArrayGeometry{1, 1, 0.5}.validate()));
}
