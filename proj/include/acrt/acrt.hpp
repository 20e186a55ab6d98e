#pragma once

#include "acrt/calibrate.hpp"
#include "acrt/datagen.hpp"
#include "acrt/grid.hpp"
#include "acrt/model.hpp"
#include "acrt/oc.hpp"
#include "acrt/plot_data.hpp"
#include "acrt/posterior_binary.hpp"
#include "acrt/posterior_continuous.hpp"
#include "acrt/results.hpp"
#include "acrt/rng.hpp"
#include "acrt/runner.hpp"
#include "acrt/scenario_io.hpp"
#include "acrt/trial.hpp"
