#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace llot {

using Index = Eigen::Index;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// A configuration of N particles in R^d, one column per particle.
template <typename Scalar>
using Configuration = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Raised when inputs violate a documented precondition. Maps to CLI exit code 1.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when a computation cannot reach its contract (overflow, non-convergence,
/// size limits). Maps to CLI exit code 2.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::int64_t factorial(int n)
{
    std::int64_t f = 1;
    for (int k = 2; k <= n; ++k) f *= k;
    return f;
}

/// All permutations of {0..n-1} in lexicographic order, with their signs.
struct PermutationTable {
    std::vector<std::vector<int>> perms;
    std::vector<int> signs;

    explicit PermutationTable(int n)
    {
        std::vector<int> p(n);
        std::iota(p.begin(), p.end(), 0);
        do {
            perms.push_back(p);
            signs.push_back(sign_of(p));
        } while (std::next_permutation(p.begin(), p.end()));
    }

    static int sign_of(const std::vector<int>& p)
    {
        int inversions = 0;
        for (std::size_t i = 0; i < p.size(); ++i)
            for (std::size_t j = i + 1; j < p.size(); ++j)
                if (p[i] > p[j]) ++inversions;
        return (inversions % 2 == 0) ? 1 : -1;
    }

    std::size_t size() const { return perms.size(); }
};

/// Least-squares slope of log(y) against log(x).
template <typename Scalar>
Scalar loglog_slope(const std::vector<Scalar>& x, const std::vector<Scalar>& y)
{
    if (x.size() != y.size() || x.size() < 2)
        throw ValidationError("log-log fit needs at least two paired points");
    const auto n = static_cast<Scalar>(x.size());
    Scalar sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0) || !(y[i] > 0))
            throw ValidationError("log-log fit needs positive data");
        const Scalar lx = std::log(x[i]);
        const Scalar ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const Scalar denom = n * sxx - sx * sx;
    if (denom == 0) throw ValidationError("log-log fit needs distinct abscissae");
    return (n * sxy - sx * sy) / denom;
}

}  // namespace llot
