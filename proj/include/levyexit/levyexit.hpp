#pragma once

#include "levyexit/csv_io.hpp"
#include "levyexit/drift_expr.hpp"
#include "levyexit/estimator.hpp"
#include "levyexit/linalg.hpp"
#include "levyexit/monte_carlo.hpp"
#include "levyexit/nonlocal_solver.hpp"
#include "levyexit/stable_math.hpp"
