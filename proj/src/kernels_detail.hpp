#pragma once

#include <array>
#include <cmath>

namespace steg::kernels::detail {

// orthonormal DCT-II basis, row k: s_k * cos(pi*(2n+1)*k/16)
inline const std::array<std::array<double, 8>, 8>& dct_mat() {
    static const auto m = [] {
        std::array<std::array<double, 8>, 8> c{};
        for (int k = 0; k < 8; ++k) {
            const double s = k == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
            for (int n = 0; n < 8; ++n) c[k][n] = s * std::cos(M_PI * (2 * n + 1) * k / 16.0);
        }
        return c;
    }();
    return m;
}

}  // namespace steg::kernels::detail
