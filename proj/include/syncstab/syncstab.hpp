#pragma once

#include "syncstab/errors.hpp"
#include "syncstab/frames.hpp"
#include "syncstab/network.hpp"
#include "syncstab/pll.hpp"
#include "syncstab/strategies.hpp"
#include "syncstab/equilibrium.hpp"
#include "syncstab/scenario.hpp"
#include "syncstab/simulator.hpp"
#include "syncstab/metrics.hpp"
#include "syncstab/analysis.hpp"
#include "syncstab/scenario_io.hpp"
#include "syncstab/io.hpp"
