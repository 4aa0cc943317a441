#pragma once

#include "shellquad/algebra.hpp"
#include "shellquad/commands.hpp"
#include "shellquad/config.hpp"
#include "shellquad/io.hpp"
#include "shellquad/kinematics.hpp"
#include "shellquad/parallel.hpp"
#include "shellquad/quadrature.hpp"
#include "shellquad/rng.hpp"
#include "shellquad/vev.hpp"
