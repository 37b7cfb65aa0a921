#pragma once

#include "csgraph/calculus.hpp"
#include "csgraph/critical.hpp"
#include "csgraph/graph.hpp"
#include "csgraph/io.hpp"
#include "csgraph/linalg.hpp"
#include "csgraph/monotone.hpp"
#include "csgraph/nonlinearity.hpp"
#include "csgraph/sweep.hpp"
#include "csgraph/variational.hpp"
