#pragma once

#include "errors.hpp"
#include "quadrature.hpp"
#include "core_dynamics.hpp"
#include "phase_accounting.hpp"
#include "force_design.hpp"
#include "two_qubit_gate.hpp"
#include "thermal_mc.hpp"
#include "lindblad_oracle.hpp"
