#include "steg/kernels.hpp"

#include <cstddef>

#include "kernels_detail.hpp"

namespace steg::kernels::omp {

using detail::dct_mat;

#ifdef _OPENMP
#define STEG_PAR _Pragma("omp parallel for schedule(static)")
#else
#define STEG_PAR
#endif
#include "kernels_body.inl"
#undef STEG_PAR

}  // namespace steg::kernels::omp
