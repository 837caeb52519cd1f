#pragma once

#include "towerlab/config.hpp"
#include "towerlab/errors.hpp"
#include "towerlab/experiment.hpp"
#include "towerlab/io.hpp"
#include "towerlab/measures.hpp"
#include "towerlab/mn_decomposition.hpp"
#include "towerlab/numerics.hpp"
#include "towerlab/observables.hpp"
#include "towerlab/return_time_spec.hpp"
#include "towerlab/rng.hpp"
#include "towerlab/stats/birkhoff.hpp"
#include "towerlab/stats/bootstrap.hpp"
#include "towerlab/stats/correlation.hpp"
#include "towerlab/stats/deviations.hpp"
#include "towerlab/stats/fit.hpp"
#include "towerlab/stats/parallel.hpp"
#include "towerlab/stats/tails.hpp"
#include "towerlab/systems.hpp"
#include "towerlab/tower.hpp"
#include "towerlab/transfer.hpp"
