#pragma once

// Umbrella header: the full fixed-width multigrade toolkit.

#include "analysis.hpp"    // IWYU pragma: export
#include "decoder.hpp"     // IWYU pragma: export
#include "encoder.hpp"     // IWYU pragma: export
#include "experiment.hpp"  // IWYU pragma: export
#include "net.hpp"         // IWYU pragma: export
#include "partition.hpp"   // IWYU pragma: export
#include "quadrature.hpp"  // IWYU pragma: export
#include "targets.hpp"     // IWYU pragma: export
#include "weights.hpp"     // IWYU pragma: export
