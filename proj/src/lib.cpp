// Compile-check translation unit for the header-only parts of the library.
#include "veil/common.hpp"
#include "veil/kernels.hpp"
#include "veil/tensor.hpp"

namespace veil {

template struct TensorT<float>;
template struct TensorT<double>;

}  // namespace veil
