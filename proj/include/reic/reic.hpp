#pragma once

#include "reic/crystal.hpp"
#include "reic/dynamics.hpp"
#include "reic/errors.hpp"
#include "reic/gates.hpp"
#include "reic/optctrl.hpp"
#include "reic/pulse.hpp"
#include "reic/pumping.hpp"
#include "reic/readout.hpp"
#include "reic/harness/config.hpp"
#include "reic/harness/io.hpp"
#include "reic/harness/recipes.hpp"
#include "reic/harness/report.hpp"
