#include "steg/kernels.hpp"

#include <cstddef>

#include "kernels_detail.hpp"

namespace steg::kernels::serial {

using detail::dct_mat;

#define STEG_PAR
#include "kernels_body.inl"
#undef STEG_PAR

}  // namespace steg::kernels::serial
