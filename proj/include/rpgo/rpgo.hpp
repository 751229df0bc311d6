// Umbrella header.
#pragma once

#include "rpgo/errors.hpp"
#include "rpgo/evaluation.hpp"
#include "rpgo/factor_graph.hpp"
#include "rpgo/frontend.hpp"
#include "rpgo/geometry.hpp"
#include "rpgo/gnc.hpp"
#include "rpgo/io.hpp"
#include "rpgo/max_clique.hpp"
#include "rpgo/odometry_fusion.hpp"
#include "rpgo/optimizer.hpp"
#include "rpgo/pcm.hpp"
#include "rpgo/synth.hpp"
