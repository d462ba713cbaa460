#pragma once

#include "granular/dynamics.hpp"
#include "granular/error.hpp"
#include "granular/eulerian.hpp"
#include "granular/heterogeneous.hpp"
#include "granular/isotonic.hpp"
#include "granular/particles.hpp"
#include "granular/picard.hpp"
#include "granular/projection.hpp"
#include "granular/qp_oracle.hpp"
#include "granular/two_block.hpp"
