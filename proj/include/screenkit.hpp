#pragma once

#include "screenkit/linalg.hpp"
#include "screenkit/losses.hpp"
#include "screenkit/penalties.hpp"
#include "screenkit/duality.hpp"
#include "screenkit/screening.hpp"
#include "screenkit/solver.hpp"
#include "screenkit/path.hpp"
#include "screenkit/identification.hpp"
#include "screenkit/io.hpp"
