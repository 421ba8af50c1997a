#pragma once

#include "dphase/config.hpp"
#include "dphase/errors.hpp"
#include "dphase/expression.hpp"
#include "dphase/io.hpp"
#include "dphase/mesh.hpp"
#include "dphase/operator_core.hpp"
#include "dphase/orlicz.hpp"
#include "dphase/problem.hpp"
#include "dphase/run.hpp"
#include "dphase/small_linalg.hpp"
#include "dphase/studies.hpp"
#include "dphase/variational.hpp"
#include "dphase/version.hpp"
#include "dphase/viscosity.hpp"
