// Umbrella header.
#pragma once

#include "dgt/common.hpp"
#include "dgt/diagnostics.hpp"
#include "dgt/engine.hpp"
#include "dgt/executor.hpp"
#include "dgt/graph.hpp"
#include "dgt/model.hpp"
#include "dgt/oracle.hpp"
#include "dgt/problems.hpp"
