#pragma once

#include "dkaczmarz/core.hpp"
#include "dkaczmarz/numerics.hpp"
#include "dkaczmarz/topology.hpp"
#include "dkaczmarz/solver.hpp"
#include "dkaczmarz/closedform.hpp"
#include "dkaczmarz/experiments.hpp"
#include "dkaczmarz/config.hpp"
