#ifndef LLE_LLE_HPP
#define LLE_LLE_HPP

#include "continuation.hpp"
#include "dynamics.hpp"
#include "errors.hpp"
#include "grid.hpp"
#include "io.hpp"
#include "linops.hpp"
#include "resolvent.hpp"
#include "soliton.hpp"
#include "spectrum.hpp"

#endif // LLE_LLE_HPP
