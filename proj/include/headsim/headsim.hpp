#pragma once

#include "headsim/error.hpp"
#include "headsim/geom.hpp"
#include "headsim/world.hpp"
#include "headsim/perception.hpp"
#include "headsim/memory.hpp"
#include "headsim/reasoning.hpp"
#include "headsim/engine.hpp"
#include "headsim/eval.hpp"
#include "headsim/io.hpp"
#include "headsim/remote.hpp"
