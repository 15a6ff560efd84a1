#pragma once

#include "isosim/error.hpp"
#include "isosim/expr.hpp"
#include "isosim/model.hpp"
#include "isosim/compiler.hpp"
#include "isosim/state.hpp"
#include "isosim/hamiltonian.hpp"
#include "isosim/dynamics.hpp"
#include "isosim/verify.hpp"
#include "isosim/io.hpp"
