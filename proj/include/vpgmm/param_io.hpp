#pragma once

#include <filesystem>
#include <iosfwd>

#include "vpgmm/gmm_core.hpp"

namespace vpgmm {

// Parameter file container. Layout:
//   vpgmm-params v1 M T I J
//   <J weights, one line>
//   <J lines of D row-major means>
//   <J*D lines of D row-major covariance entries>
// All reals printed with 17 significant digits so write -> read -> write
// reproduces identical bytes.

void write_params(std::ostream& out, const GmmParams& params, const Dims& dims);
void write_params_file(const std::filesystem::path& path, const GmmParams& params, const Dims& dims);

struct LoadedParams {
    GmmParams params;
    Dims dims;
};

LoadedParams read_params(std::istream& in);
LoadedParams read_params_file(const std::filesystem::path& path);

} // namespace vpgmm
