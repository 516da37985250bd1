#pragma once

#include "fracmap/cli.hpp"
#include "fracmap/constructions.hpp"
#include "fracmap/energy.hpp"
#include "fracmap/error.hpp"
#include "fracmap/geometry.hpp"
#include "fracmap/homotopy.hpp"
#include "fracmap/json_io.hpp"
#include "fracmap/mesh.hpp"
#include "fracmap/minimizer.hpp"
#include "fracmap/parallel.hpp"
#include "fracmap/rescaling.hpp"
#include "fracmap/verify.hpp"
