#pragma once

#include "gsbf/conic/builders.hpp"
#include "gsbf/conic/program.hpp"
#include "gsbf/conic/solver.hpp"
#include "gsbf/diagnostics.hpp"
#include "gsbf/netmodel.hpp"
#include "gsbf/oracle.hpp"
#include "gsbf/pipeline.hpp"
#include "gsbf/task_selection.hpp"
#include "gsbf/trace.hpp"
#include "gsbf/types.hpp"
