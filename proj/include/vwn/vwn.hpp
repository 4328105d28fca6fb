#pragma once

/// \file
/// Umbrella header.

#include "vwn/agma.hpp"
#include "vwn/config.hpp"
#include "vwn/core_model.hpp"
#include "vwn/gp.hpp"
#include "vwn/harness.hpp"
#include "vwn/joint_solver.hpp"
#include "vwn/oracle.hpp"
#include "vwn/power_allocation.hpp"
#include "vwn/scenario.hpp"
#include "vwn/user_association.hpp"
