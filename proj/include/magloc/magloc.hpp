#pragma once

#include "magloc/body.hpp"
#include "magloc/config.hpp"
#include "magloc/field.hpp"
#include "magloc/geometry.hpp"
#include "magloc/locate.hpp"
#include "magloc/rng.hpp"
#include "magloc/sensor.hpp"
#include "magloc/sim.hpp"
#include "magloc/textio.hpp"
#include "magloc/vec.hpp"
