#pragma once

// Umbrella header.

#include "veriq/analyze.hpp"
#include "veriq/claims.hpp"
#include "veriq/compile.hpp"
#include "veriq/embed.hpp"
#include "veriq/engine.hpp"
#include "veriq/expr.hpp"
#include "veriq/gen.hpp"
#include "veriq/harness.hpp"
#include "veriq/oracle.hpp"
#include "veriq/optimizer.hpp"
#include "veriq/parse.hpp"
#include "veriq/physical.hpp"
#include "veriq/plan.hpp"
#include "veriq/provenance.hpp"
#include "veriq/relation.hpp"
#include "veriq/relevance.hpp"
#include "veriq/stats.hpp"
#include "veriq/text.hpp"
#include "veriq/value.hpp"
