#pragma once

#include "pnpflow/errors.hpp"
#include "pnpflow/grid.hpp"
#include "pnpflow/rng.hpp"
#include "pnpflow/distributions.hpp"
#include "pnpflow/fields.hpp"
#include "pnpflow/quadrature.hpp"
#include "pnpflow/oracles.hpp"
#include "pnpflow/mc_loss.hpp"
#include "pnpflow/mlp.hpp"
#include "pnpflow/adam.hpp"
#include "pnpflow/assignment.hpp"
#include "pnpflow/train.hpp"
#include "pnpflow/operators.hpp"
#include "pnpflow/fidelity.hpp"
#include "pnpflow/metrics.hpp"
#include "pnpflow/solver.hpp"
#include "pnpflow/io.hpp"
#include "pnpflow/config.hpp"
#include "pnpflow/experiment.hpp"
