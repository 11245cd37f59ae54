#pragma once

#include "tsdiag/arma.hpp"
#include "tsdiag/ccf.hpp"
#include "tsdiag/csv.hpp"
#include "tsdiag/errors.hpp"
#include "tsdiag/lagmodel.hpp"
#include "tsdiag/pca.hpp"
#include "tsdiag/rng.hpp"
#include "tsdiag/segment.hpp"
#include "tsdiag/series.hpp"
#include "tsdiag/svg.hpp"

namespace tsdiag {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace tsdiag
