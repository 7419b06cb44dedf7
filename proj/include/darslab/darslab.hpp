#pragma once

// Umbrella header for the full library.

#include "darslab/advantage.hpp"
#include "darslab/checkpoint.hpp"
#include "darslab/config.hpp"
#include "darslab/dars.hpp"
#include "darslab/errors.hpp"
#include "darslab/evaluation.hpp"
#include "darslab/experiment.hpp"
#include "darslab/metrics.hpp"
#include "darslab/parallel.hpp"
#include "darslab/plot_data.hpp"
#include "darslab/policy.hpp"
#include "darslab/presets.hpp"
#include "darslab/rng.hpp"
#include "darslab/task_suite.hpp"
#include "darslab/trainer.hpp"
#include "darslab/version.hpp"
