#pragma once

#include "omnitrace/analysis.hpp"
#include "omnitrace/baselines.hpp"
#include "omnitrace/chunking.hpp"
#include "omnitrace/config.hpp"
#include "omnitrace/curation.hpp"
#include "omnitrace/error.hpp"
#include "omnitrace/evaluation.hpp"
#include "omnitrace/report.hpp"
#include "omnitrace/rng.hpp"
#include "omnitrace/sources.hpp"
#include "omnitrace/synth.hpp"
#include "omnitrace/trace_io.hpp"
#include "omnitrace/tracing.hpp"
#include "omnitrace/types.hpp"

namespace omnitrace {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace omnitrace
