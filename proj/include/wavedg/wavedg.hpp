#pragma once

#include "wavedg/sparse_matrix.hpp"
#include "wavedg/linear_solver.hpp"
#include "wavedg/quadrature.hpp"
#include "wavedg/space_discretization.hpp"
#include "wavedg/dg_time_stepper.hpp"
#include "wavedg/energy_monitor.hpp"
#include "wavedg/convergence_lab.hpp"
