#pragma once

#include "inopca/algorithms.hpp"
#include "inopca/errors.hpp"
#include "inopca/experiments.hpp"
#include "inopca/harness.hpp"
#include "inopca/io.hpp"
#include "inopca/metrics.hpp"
#include "inopca/multipc.hpp"
#include "inopca/parse.hpp"
#include "inopca/random.hpp"
#include "inopca/spiked_model.hpp"
#include "inopca/theory_ode.hpp"
#include "inopca/theory_pde.hpp"
#include "inopca/vector_ops.hpp"
