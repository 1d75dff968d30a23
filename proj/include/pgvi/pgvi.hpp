#pragma once

// Umbrella header.

#include "pgvi/checkpoint.hpp"
#include "pgvi/count_data.hpp"
#include "pgvi/dirichlet.hpp"
#include "pgvi/errors.hpp"
#include "pgvi/experiments.hpp"
#include "pgvi/gridworld.hpp"
#include "pgvi/imitation.hpp"
#include "pgvi/kernels.hpp"
#include "pgvi/linalg.hpp"
#include "pgvi/mdp.hpp"
#include "pgvi/model.hpp"
#include "pgvi/numeric.hpp"
#include "pgvi/planning.hpp"
#include "pgvi/psrl.hpp"
#include "pgvi/queueing.hpp"
#include "pgvi/rng.hpp"
#include "pgvi/stick.hpp"
#include "pgvi/subgoal.hpp"
