#pragma once

#include <cmath>
#include <vector>

#include "lsda/core/rng.hpp"
#include "lsda/core/tensor.hpp"

namespace testutil {

template <class T>
void fill_random(lsda::Tensor<T>& t, lsda::Rng& rng, T lo = T(-1), T hi = T(1)) {
    for (size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(rng.uniform(lo, hi));
}

// Central difference of a scalar functional with respect to one slot.
template <class F, class T>
T central_diff(F&& f, T* slot, T h) {
    const T x0 = *slot;
    *slot = x0 + h;
    const T fp = f();
    *slot = x0 - h;
    const T fm = f();
    *slot = x0;
    return (fp - fm) / (2 * h);
}

inline bool close(double a, double b, double atol, double rtol) {
    return std::abs(a - b) <= atol + rtol * std::max(std::abs(a), std::abs(b));
}

// Relative L2 distance between two gradient vectors, guarded for tiny norms.
inline double rel_l2(const std::vector<double>& a, const std::vector<double>& b) {
    double num = 0, den = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

}  // namespace testutil
