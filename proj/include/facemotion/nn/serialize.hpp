#pragma once

#include <iosfwd>

#include "facemotion/nn/layers.hpp"

namespace facemotion::nn {

// Binary tensor blobs: [u32 name_len][name][u32 rows][u32 cols][f64 ...].
// Order and shapes must match on load; mismatches raise IntegrityError.
void write_params(std::ostream& out, const ParamList& params);
void read_params(std::istream& in, const ParamList& params);

}  // namespace facemotion::nn
