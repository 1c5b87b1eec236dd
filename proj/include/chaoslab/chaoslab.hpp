#pragma once

#include "chaoslab/config.hpp"
#include "chaoslab/drift.hpp"
#include "chaoslab/errors.hpp"
#include "chaoslab/experiment.hpp"
#include "chaoslab/fokker_planck.hpp"
#include "chaoslab/initial.hpp"
#include "chaoslab/kernel.hpp"
#include "chaoslab/metrics.hpp"
#include "chaoslab/mollifier.hpp"
#include "chaoslab/particles.hpp"
#include "chaoslab/rng.hpp"
#include "chaoslab/torus.hpp"
